#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace navpruner {

using Embedding = std::vector<double>;

struct EncoderConfig {
  int dim = 256;
  int max_ngram = 2;  // word n-gram orders 1..max_ngram
  std::uint64_t hash_seed = 0x5eed;

  bool operator==(const EncoderConfig& o) const {
    return dim == o.dim && max_ngram == o.max_ngram && hash_seed == o.hash_seed;
  }
};

// Deterministic signed-feature-hashing text encoder. Words are maximal runs
// of ASCII letters, lowercased; digits and punctuation separate tokens.
// Each unigram/bigram hashes to a bucket and to a +/-1 sign; the count
// vector is L2-normalized. Text with no tokens encodes to the zero vector.
//
// An optional override table (text -> precomputed embedding) is consulted
// before hashing, so externally computed embeddings can be substituted.
class TextEncoder {
 public:
  TextEncoder() = default;
  explicit TextEncoder(EncoderConfig config) : config_(config) {}

  const EncoderConfig& config() const { return config_; }

  Embedding encode(const std::string& text) const;

  // Loads a JSON-lines file of {"text", "embedding": [...]} entries.
  // Embedding dimensions must match the encoder config.
  void load_overrides(const std::string& path);
  std::size_t num_overrides() const { return overrides_.size(); }

  static std::vector<std::string> tokenize(const std::string& text);

 private:
  EncoderConfig config_;
  std::unordered_map<std::string, Embedding> overrides_;
};

// <a,b> / (|a||b|); 0.0 when either norm is zero.
double cosine_sim(const Embedding& a, const Embedding& b);

double l2_norm(const Embedding& v);

}  // namespace navpruner
