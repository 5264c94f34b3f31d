#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace fgmgt {

struct EncoderConfig {
  uint32_t dim = 65536;
  std::vector<int> char_ngram_orders = {2, 3, 4};
  bool use_word_unigrams = true;
  uint64_t hash_seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

// Sparse L2-normalized feature vector; entries sorted by index.
struct FeatureVector {
  uint32_t dim = 0;
  std::vector<std::pair<uint32_t, double>> entries;

  double norm() const;
};

FeatureVector encode(const EncoderConfig& cfg, std::string_view text, size_t max_tokens);

}  // namespace fgmgt
