#include "fgmgt/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "fgmgt/corpus.hpp"
#include "fgmgt/errors.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {

namespace {

constexpr unsigned char kCharTag = 'c';
constexpr unsigned char kWordTag = 'w';

std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

uint32_t bucket_for(unsigned char tag, std::string_view bytes, uint64_t seed, uint32_t dim) {
  uint64_t h = fnv1a64(&tag, 1);
  h = fnv1a64(bytes.data(), bytes.size(), h);
  unsigned char seed_le[8];
  for (int i = 0; i < 8; ++i) seed_le[i] = static_cast<unsigned char>(seed >> (8 * i));
  h = fnv1a64(seed_le, 8, h);
  return static_cast<uint32_t>(h & (dim - 1));
}

}  // namespace

void EncoderConfig::validate() const {
  if (dim < 256) throw ConfigError("encoder dim must be >= 256");
  if ((dim & (dim - 1)) != 0) throw ConfigError("encoder dim must be a power of two");
  for (int n : char_ngram_orders) {
    if (n < 1) throw ConfigError("char n-gram orders must be >= 1");
  }
  if (char_ngram_orders.empty() && !use_word_unigrams) {
    throw ConfigError("encoder needs at least one feature kind");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  std::vector<int> orders(char_ngram_orders);
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  return {{"dim", dim},
          {"char_ngram_orders", orders},
          {"use_word_unigrams", use_word_unigrams},
          {"hash_seed", hash_seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.dim = j.at("dim").get<uint32_t>();
  cfg.char_ngram_orders = j.at("char_ngram_orders").get<std::vector<int>>();
  cfg.use_word_unigrams = j.at("use_word_unigrams").get<bool>();
  cfg.hash_seed = j.at("hash_seed").get<uint64_t>();
  cfg.validate();
  return cfg;
}

double FeatureVector::norm() const {
  double s = 0;
  for (const auto& [idx, v] : entries) s += v * v;
  return std::sqrt(s);
}

FeatureVector encode(const EncoderConfig& cfg, std::string_view text, size_t max_tokens) {
  cfg.validate();
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");

  FeatureVector out;
  out.dim = cfg.dim;

  std::string s = lowercase_ascii(truncate_to_tokens(text, max_tokens));
  if (s.empty()) return out;

  std::unordered_map<uint32_t, double> counts;
  counts.reserve(1024);

  std::set<int> orders(cfg.char_ngram_orders.begin(), cfg.char_ngram_orders.end());
  for (int n : orders) {
    if (static_cast<size_t>(n) > s.size()) continue;
    for (size_t i = 0; i + static_cast<size_t>(n) <= s.size(); ++i) {
      counts[bucket_for(kCharTag, std::string_view(s).substr(i, static_cast<size_t>(n)),
                        cfg.hash_seed, cfg.dim)] += 1.0;
    }
  }
  if (cfg.use_word_unigrams) {
    for (const auto& tok : tokenize(s)) {
      counts[bucket_for(kWordTag, tok, cfg.hash_seed, cfg.dim)] += 1.0;
    }
  }
  if (counts.empty()) return out;

  out.entries.assign(counts.begin(), counts.end());
  std::sort(out.entries.begin(), out.entries.end());
  double norm = 0;
  for (const auto& [idx, v] : out.entries) norm += v * v;
  norm = std::sqrt(norm);
  for (auto& [idx, v] : out.entries) v /= norm;
  return out;
}

}  // namespace fgmgt
