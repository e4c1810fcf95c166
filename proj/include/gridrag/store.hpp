#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gridrag/embedding.hpp"
#include "gridrag/rationale.hpp"

namespace gridrag {

struct StoreRecord {
  std::string record_id;
  Rationale rationale;
  Eigen::VectorXd vector;  // L2-normalized or all zero

  bool operator==(const StoreRecord& other) const {
    return record_id == other.record_id && rationale == other.rationale &&
           vector.size() == other.vector.size() && vector == other.vector;
  }
};

struct RetrievalHit {
  std::string record_id;
  double score = 0;  // cosine, in [-1, 1]
  int rank = 0;      // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

// Immutable set of embedded rationales. Records are kept sorted by
// record_id, so index order is also the tie-break order.
class RagStore {
 public:
  RagStore() = default;
  // Throws StoreError on duplicate ids or inconsistent dimensions.
  RagStore(std::string embedder, int dims, std::vector<StoreRecord> records);

  const std::string& embedder() const { return embedder_; }
  int dims() const { return dims_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<StoreRecord>& records() const { return records_; }
  const StoreRecord* find(std::string_view record_id) const;

  // Dot product of every record with `query` (cosine for unit vectors),
  // clamped to [-1, 1].
  Eigen::VectorXd scores(const Eigen::VectorXd& query) const;

  RagStore filter(const std::function<bool(const StoreRecord&)>& keep) const;

  bool operator==(const RagStore& other) const {
    return embedder_ == other.embedder_ && dims_ == other.dims_ &&
           records_ == other.records_;
  }

 private:
  std::string embedder_;
  int dims_ = 0;
  std::vector<StoreRecord> records_;
  Eigen::MatrixXd matrix_;  // one row per record
};

// Embeds every rationale. Throws StoreError naming the offending rationale
// on duplicate ids, empty text or embedding failure.
RagStore build_store(const std::vector<Rationale>& rationales,
                     const Embedder& embedder);

// Top min(k, size) records by score, ties by ascending record_id.
std::vector<RetrievalHit> rank_top_k(const RagStore& store,
                                     const Eigen::VectorXd& query, int k);

// Embeds the query and ranks. Throws StoreMismatch when `embedder` is not the
// one the store was built with, StoreError on an empty store or k < 1.
std::vector<RetrievalHit> retrieve_top_k(std::string_view query,
                                         const RagStore& store, int k,
                                         const Embedder& embedder);

// JSONL: a {"schema":1,"dims":D,"embedder":...} header line, then one record
// per line.
void write_store(const RagStore& store, std::ostream& out);
RagStore read_store(std::istream& in);
void persist(const RagStore& store, const std::filesystem::path& path);
// Throws LoadError with the 1-based offending line.
RagStore load_store(const std::filesystem::path& path);

}  // namespace gridrag
