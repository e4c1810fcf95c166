#include "gridrag/embedding.hpp"

#include "gridrag/errors.hpp"

namespace gridrag {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = kFnvOffsetBasis;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

namespace {

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

}  // namespace

std::vector<std::string> hashing_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_ascii_alnum(c)) {
      current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Eigen::VectorXd l2_normalized(Eigen::VectorXd v) {
  const double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

Eigen::VectorXd hashing_embed(std::string_view text, int dims) {
  if (dims < 1) throw Error("hashing dimension must be at least 1");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dims);
  for (const auto& token : hashing_tokens(text)) {
    const std::uint64_t h = fnv1a64(token);
    const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
    v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dims))] += sign;
  }
  return l2_normalized(std::move(v));
}

HashingEmbedder::HashingEmbedder(int dims) : dims_(dims) {
  if (dims < 1) throw ConfigError("hashing dimension must be at least 1");
}

std::string HashingEmbedder::fingerprint() const {
  return "hashing-fnv1a64:dims=" + std::to_string(dims_) +
         ":offset=" + std::to_string(kFnvOffsetBasis) +
         ":prime=" + std::to_string(kFnvPrime);
}

std::vector<Eigen::VectorXd> HashingEmbedder::embed(
    const std::vector<std::string>& texts) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(hashing_embed(text, dims_));
  return out;
}

GatewayEmbedder::GatewayEmbedder(ModelClient client)
    : client_(std::move(client)) {}

std::string GatewayEmbedder::fingerprint() const {
  return "gateway:" + client_.config().model;
}

std::vector<Eigen::VectorXd> GatewayEmbedder::embed(
    const std::vector<std::string>& texts) const {
  auto response = client_.embed({client_.config().model, texts});
  std::vector<Eigen::VectorXd> out;
  out.reserve(response.vectors.size());
  for (const auto& v : response.vectors) {
    out.push_back(l2_normalized(Eigen::Map<const Eigen::VectorXd>(
        v.data(), static_cast<Eigen::Index>(v.size()))));
  }
  return out;
}

}  // namespace gridrag
