#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gridrag/gateway.hpp"

namespace gridrag {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;
inline constexpr int kDefaultHashingDims = 256;

std::uint64_t fnv1a64(std::string_view data);

// Maximal runs of ASCII letters and digits, lowercased.
std::vector<std::string> hashing_tokens(std::string_view text);

// Signed feature hashing over hashing_tokens: token t adds +1 (bit 63 of
// fnv1a64(t) clear) or -1 (set) to component fnv1a64(t) % dims. The result is
// L2-normalized unless it is all zero.
Eigen::VectorXd hashing_embed(std::string_view text,
                              int dims = kDefaultHashingDims);

class Embedder {
 public:
  virtual ~Embedder() = default;

  // Identifies the embedding space; stores built with one embedder refuse
  // queries embedded by another.
  virtual std::string fingerprint() const = 0;
  virtual std::vector<Eigen::VectorXd> embed(
      const std::vector<std::string>& texts) const = 0;
};

class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(int dims = kDefaultHashingDims);

  std::string fingerprint() const override;
  std::vector<Eigen::VectorXd> embed(
      const std::vector<std::string>& texts) const override;
  int dims() const { return dims_; }

 private:
  int dims_;
};

// Embeds through an /v1/embeddings endpoint; vectors are L2-normalized on
// arrival.
class GatewayEmbedder final : public Embedder {
 public:
  explicit GatewayEmbedder(ModelClient client);

  std::string fingerprint() const override;
  std::vector<Eigen::VectorXd> embed(
      const std::vector<std::string>& texts) const override;

 private:
  ModelClient client_;
};

// v / |v|, or v unchanged when it is all zero.
Eigen::VectorXd l2_normalized(Eigen::VectorXd v);

}  // namespace gridrag
