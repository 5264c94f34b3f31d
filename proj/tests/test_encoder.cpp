#include "doctest.h"

#include <cmath>

#include "fgmgt/corpus.hpp"
#include "fgmgt/encoder.hpp"
#include "fgmgt/errors.hpp"
#include "fgmgt/rng.hpp"

using namespace fgmgt;

namespace {

EncoderConfig small_cfg() {
  EncoderConfig cfg;
  cfg.dim = 1024;
  return cfg;
}

}  // namespace

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dim = 255;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dim = 300;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dim = 256;
  CHECK_NOTHROW(cfg.validate());
  cfg.char_ngram_orders = {0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.char_ngram_orders = {};
  cfg.use_word_unigrams = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("encoder config json round trip") {
  EncoderConfig cfg;
  cfg.dim = 4096;
  cfg.char_ngram_orders = {4, 2, 3, 2};
  cfg.hash_seed = 0xdeadbeefcafef00dULL;
  EncoderConfig back = EncoderConfig::from_json(cfg.to_json());
  CHECK(back.dim == cfg.dim);
  CHECK(back.char_ngram_orders == std::vector<int>{2, 3, 4});
  CHECK(back.hash_seed == cfg.hash_seed);
  CHECK(back.use_word_unigrams == cfg.use_word_unigrams);
}

TEST_CASE("empty text encodes to the zero vector") {
  auto v = encode(small_cfg(), "", 512);
  CHECK(v.dim == 1024);
  CHECK(v.entries.empty());
  CHECK(v.norm() == 0.0);
  CHECK(encode(small_cfg(), "   \t\n ", 512).entries.empty());
}

TEST_CASE("non-empty text encodes to a unit vector") {
  auto v = encode(small_cfg(), "abc def", 512);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-9);
  for (const auto& [idx, val] : v.entries) {
    CHECK(idx < v.dim);
    CHECK(val > 0.0);
  }
  for (size_t i = 1; i < v.entries.size(); ++i) CHECK(v.entries[i - 1].first < v.entries[i].first);
}

TEST_CASE("encoding is deterministic") {
  const std::string text = "The quick brown fox jumps over the lazy dog, twice.";
  auto a = encode(small_cfg(), text, 512);
  auto b = encode(small_cfg(), text, 512);
  CHECK(a.entries == b.entries);
}

TEST_CASE("truncation-first consistency") {
  const std::string text = "one two three four five six seven eight nine ten";
  for (size_t limit : {1u, 3u, 5u, 9u, 10u, 50u}) {
    auto direct = encode(small_cfg(), text, limit);
    auto pre = encode(small_cfg(), truncate_to_tokens(text, limit), limit + 7);
    CHECK(direct.entries == pre.entries);
  }
}

TEST_CASE("case folding") {
  auto lower = encode(small_cfg(), "mixed case text!", 512);
  auto upper = encode(small_cfg(), "MIXED Case TEXT!", 512);
  CHECK(lower.entries == upper.entries);
}

TEST_CASE("hash_seed shifts buckets") {
  Rng rng(31);
  const std::string words[] = {"alpha", "beta", "gamma", "delta", "epsilon"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    for (int i = 0; i < 6; ++i) {
      if (i) text += ' ';
      text += words[rng.uniform_u32(5)];
    }
    EncoderConfig a = small_cfg();
    EncoderConfig b = small_cfg();
    b.hash_seed = 1 + trial;
    CHECK(encode(a, text, 512).entries != encode(b, text, 512).entries);
  }
}

TEST_CASE("word unigrams and char n-grams both contribute") {
  EncoderConfig chars_only = small_cfg();
  chars_only.use_word_unigrams = false;
  EncoderConfig words_only = small_cfg();
  words_only.char_ngram_orders = {};

  auto c = encode(chars_only, "hello world", 512);
  auto w = encode(words_only, "hello world", 512);
  auto both = encode(small_cfg(), "hello world", 512);
  CHECK(!c.entries.empty());
  CHECK(w.entries.size() == 2);
  CHECK(both.entries.size() >= c.entries.size());
  CHECK(both.entries != c.entries);
}

TEST_CASE("word features are kind-tagged apart from char features") {
  // A one-char word with order-1 char grams: same underlying bytes must land
  // in different buckets via the kind tag (for nearly all seeds).
  EncoderConfig cfg;
  cfg.dim = 65536;
  cfg.char_ngram_orders = {1};
  auto v = encode(cfg, "a", 512);
  CHECK(v.entries.size() == 2);
}

TEST_CASE("short text below smallest order still encodes via words") {
  auto v = encode(small_cfg(), "a", 512);
  CHECK(!v.entries.empty());
  CHECK(std::abs(v.norm() - 1.0) <= 1e-9);
}
