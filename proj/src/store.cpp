#include "gridrag/store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gridrag/errors.hpp"

namespace gridrag {

RagStore::RagStore(std::string embedder, int dims,
                   std::vector<StoreRecord> records)
    : embedder_(std::move(embedder)), dims_(dims), records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const StoreRecord& a, const StoreRecord& b) {
              return a.record_id < b.record_id;
            });
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].record_id == records_[i - 1].record_id) {
      throw StoreError("duplicate record id " + records_[i].record_id);
    }
  }
  matrix_.resize(static_cast<Eigen::Index>(records_.size()), dims_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].vector.size() != dims_) {
      throw StoreError("record " + records_[i].record_id + " has dimension " +
                       std::to_string(records_[i].vector.size()) +
                       ", store has " + std::to_string(dims_));
    }
    matrix_.row(static_cast<Eigen::Index>(i)) = records_[i].vector.transpose();
  }
}

const StoreRecord* RagStore::find(std::string_view record_id) const {
  auto it = std::lower_bound(
      records_.begin(), records_.end(), record_id,
      [](const StoreRecord& r, std::string_view id) { return r.record_id < id; });
  return it != records_.end() && it->record_id == record_id ? &*it : nullptr;
}

Eigen::VectorXd RagStore::scores(const Eigen::VectorXd& query) const {
  if (query.size() != dims_) {
    throw StoreMismatch("query has dimension " + std::to_string(query.size()) +
                        ", store has " + std::to_string(dims_));
  }
  return (matrix_ * query).cwiseMax(-1.0).cwiseMin(1.0);
}

RagStore RagStore::filter(
    const std::function<bool(const StoreRecord&)>& keep) const {
  std::vector<StoreRecord> kept;
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(kept), keep);
  return RagStore(embedder_, dims_, std::move(kept));
}

RagStore build_store(const std::vector<Rationale>& rationales,
                     const Embedder& embedder) {
  std::set<std::string_view> ids;
  std::vector<std::string> texts;
  texts.reserve(rationales.size());
  for (const auto& r : rationales) {
    if (!ids.insert(r.rationale_id).second) {
      throw StoreError("duplicate rationale id " + r.rationale_id);
    }
    if (r.text.empty()) throw StoreError("rationale " + r.rationale_id + " is empty");
    texts.push_back(r.text);
  }

  std::vector<Eigen::VectorXd> vectors;
  try {
    vectors = embedder.embed(texts);
  } catch (const std::exception& batch_error) {
    // Locate the culprit so the error names it.
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        embedder.embed({texts[i]});
      } catch (const std::exception& e) {
        throw StoreError("embedding failed for " + rationales[i].rationale_id +
                         ": " + e.what());
      }
    }
    throw StoreError(std::string("embedding failed: ") + batch_error.what());
  }
  if (vectors.size() != rationales.size()) {
    throw StoreError("embedder returned " + std::to_string(vectors.size()) +
                     " vectors for " + std::to_string(rationales.size()) + " texts");
  }

  const int dims = vectors.empty() ? 0 : static_cast<int>(vectors.front().size());
  std::vector<StoreRecord> records;
  records.reserve(rationales.size());
  for (std::size_t i = 0; i < rationales.size(); ++i) {
    records.push_back({rationales[i].rationale_id, rationales[i],
                       l2_normalized(std::move(vectors[i]))});
  }
  return RagStore(embedder.fingerprint(), dims, std::move(records));
}

std::vector<RetrievalHit> rank_top_k(const RagStore& store,
                                     const Eigen::VectorXd& query, int k) {
  if (k < 1) throw StoreError("k must be at least 1");
  const Eigen::VectorXd scores = store.scores(query);
  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto sa = scores[static_cast<Eigen::Index>(a)];
                      const auto sb = scores[static_cast<Eigen::Index>(b)];
                      return sa != sb ? sa > sb : a < b;
                    });
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({store.records()[order[i]].record_id,
                    scores[static_cast<Eigen::Index>(order[i])],
                    static_cast<int>(i + 1)});
  }
  return hits;
}

std::vector<RetrievalHit> retrieve_top_k(std::string_view query,
                                         const RagStore& store, int k,
                                         const Embedder& embedder) {
  if (store.empty()) throw StoreError("store is empty");
  if (embedder.fingerprint() != store.embedder()) {
    throw StoreMismatch("store was built with '" + store.embedder() +
                        "', query embedder is '" + embedder.fingerprint() + "'");
  }
  auto vectors = embedder.embed({std::string(query)});
  return rank_top_k(store, l2_normalized(std::move(vectors.at(0))), k);
}

void write_store(const RagStore& store, std::ostream& out) {
  nlohmann::ordered_json header;
  header["schema"] = 1;
  header["dims"] = store.dims();
  header["embedder"] = store.embedder();
  out << header.dump() << '\n';
  for (const auto& record : store.records()) {
    const auto& r = record.rationale;
    nlohmann::ordered_json line;
    line["record_id"] = record.record_id;
    line["doc_id"] = r.page.doc_id;
    line["page_index"] = r.page.page_index;
    line["component_id"] = r.component_id;
    line["origin"] = to_string(r.origin);
    line["mode"] = to_string(r.mode);
    line["text"] = r.text;
    line["vector"] = std::vector<double>(record.vector.begin(), record.vector.end());
    out << line.dump() << '\n';
  }
}

RagStore read_store(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw LoadError(1, "missing header");
  ++line_no;
  int dims = 0;
  std::string embedder;
  {
    auto header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
      throw LoadError(line_no, "header is not a JSON object");
    }
    if (header.value("schema", 0) != 1) throw LoadError(line_no, "unsupported schema");
    if (!header.contains("dims") || !header["dims"].is_number_integer() ||
        header["dims"].get<int>() < 0) {
      throw LoadError(line_no, "header lacks dims");
    }
    dims = header["dims"].get<int>();
    embedder = header.value("embedder", "");
  }

  std::vector<StoreRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (in.eof() && !line.empty()) {
      // Every record line is newline-terminated; a missing one means truncation.
      throw LoadError(line_no, "truncated record");
    }
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw LoadError(line_no, "invalid JSON");
    try {
      StoreRecord record;
      record.record_id = j.at("record_id").get<std::string>();
      auto& r = record.rationale;
      r.rationale_id = record.record_id;
      r.page = {j.at("doc_id").get<std::string>(), j.at("page_index").get<int>()};
      r.component_id = j.at("component_id").get<std::string>();
      r.origin = origin_from_string(j.at("origin").get<std::string>());
      r.mode = rationale_mode_from_string(j.at("mode").get<std::string>());
      r.text = j.at("text").get<std::string>();
      const auto values = j.at("vector").get<std::vector<double>>();
      if (static_cast<int>(values.size()) != dims) {
        throw LoadError(line_no, "vector has " + std::to_string(values.size()) +
                                     " components, header says " + std::to_string(dims));
      }
      record.vector = Eigen::Map<const Eigen::VectorXd>(
          values.data(), static_cast<Eigen::Index>(values.size()));
      records.push_back(std::move(record));
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception& e) {
      throw LoadError(line_no, e.what());
    }
  }
  try {
    return RagStore(std::move(embedder), dims, std::move(records));
  } catch (const StoreError& e) {
    throw LoadError(line_no, e.what());
  }
}

void persist(const RagStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write store " + path.string());
  write_store(store, out);
  if (!out) throw StoreError("failed writing store " + path.string());
}

RagStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(0, "cannot open store " + path.string());
  return read_store(in);
}

}  // namespace gridrag
