#include "navpruner/text_encoder.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "navpruner/errors.hpp"
#include "navpruner/rng.hpp"

namespace navpruner {

std::vector<std::string> TextEncoder::tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Embedding TextEncoder::encode(const std::string& text) const {
  if (!overrides_.empty()) {
    const auto it = overrides_.find(text);
    if (it != overrides_.end()) return it->second;
  }

  Embedding v(config_.dim, 0.0);
  const auto tokens = tokenize(text);

  auto add_feature = [&](const std::string& feature) {
    const std::uint64_t h = fnv1a64(feature, config_.hash_seed);
    const std::uint64_t s = fnv1a64(feature, config_.hash_seed ^ 0x9e3779b9ULL);
    const std::size_t bucket = h % static_cast<std::uint64_t>(config_.dim);
    v[bucket] += (s & 1) ? 1.0 : -1.0;
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (config_.max_ngram >= 1) add_feature(tokens[i]);
    if (config_.max_ngram >= 2 && i + 1 < tokens.size())
      add_feature(tokens[i] + " " + tokens[i + 1]);
  }

  const double norm = l2_norm(v);
  if (norm > 0.0)
    for (auto& x : v) x /= norm;
  return v;
}

void TextEncoder::load_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json entry;
    try {
      entry = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": invalid JSON: " + e.what());
    }
    Embedding emb;
    for (const auto& x : entry.at("embedding")) emb.push_back(x.get<double>());
    if (static_cast<int>(emb.size()) != config_.dim)
      throw DimensionMismatch(path + ":" + std::to_string(line_no) +
                              ": embedding has dimension " +
                              std::to_string(emb.size()) + ", expected " +
                              std::to_string(config_.dim));
    overrides_[entry.at("text").get<std::string>()] = std::move(emb);
  }
}

double l2_norm(const Embedding& v) {
  double total = 0.0;
  for (const double x : v) total += x * x;
  return std::sqrt(total);
}

double cosine_sim(const Embedding& a, const Embedding& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

}  // namespace navpruner
