#include <algorithm>
#include <cmath>

#include "fgmgt/datagen.hpp"
#include "fgmgt/errors.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {

void SyntheticConfig::validate() const {
  if (docs_per_class < 1) throw ConfigError("docs_per_class must be >= 1");
  if (min_sentences < 1 || max_sentences < min_sentences) {
    throw ConfigError("sentence range must satisfy 1 <= min <= max");
  }
  if (vocab_size < 16) throw ConfigError("vocab_size must be >= 16");
  if (!(confusability >= 0.0) || !(confusability <= 1.0)) {
    throw ConfigError("confusability must be in [0, 1]");
  }
}

nlohmann::json SyntheticConfig::to_json() const {
  return {{"seed", seed},
          {"docs_per_class", docs_per_class},
          {"min_sentences", min_sentences},
          {"max_sentences", max_sentences},
          {"vocab_size", vocab_size},
          {"confusability", confusability}};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("docs_per_class")) cfg.docs_per_class = j.at("docs_per_class").get<int>();
  if (j.contains("min_sentences")) cfg.min_sentences = j.at("min_sentences").get<int>();
  if (j.contains("max_sentences")) cfg.max_sentences = j.at("max_sentences").get<int>();
  if (j.contains("vocab_size")) cfg.vocab_size = j.at("vocab_size").get<int>();
  if (j.contains("confusability")) cfg.confusability = j.at("confusability").get<double>();
  cfg.validate();
  return cfg;
}

namespace {

// Zipf-weighted sampling over a seeded permutation of the shared vocabulary.
// Each profile ranks the same words differently, giving each class its own
// word-frequency signature.
struct WordProfile {
  std::vector<std::string> words;      // permuted
  std::vector<double> cumulative;

  static WordProfile make(int vocab_size, uint64_t seed) {
    WordProfile p;
    p.words.resize(static_cast<size_t>(vocab_size));
    for (int k = 0; k < vocab_size; ++k) p.words[static_cast<size_t>(k)] = "w" + std::to_string(k);
    Rng rng(seed);
    rng.shuffle(p.words);
    p.cumulative.resize(p.words.size());
    double total = 0;
    for (size_t k = 0; k < p.words.size(); ++k) {
      total += 1.0 / static_cast<double>(k + 1);
      p.cumulative[k] = total;
    }
    return p;
  }

  const std::string& sample(Rng& rng) const {
    double u = rng.uniform() * cumulative.back();
    size_t i = static_cast<size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    if (i >= words.size()) i = words.size() - 1;
    return words[i];
  }
};

constexpr int kMarkersPerPool = 8;

}  // namespace

std::vector<Document> synth_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  Taxonomy tax = Taxonomy::default_taxonomy();

  WordProfile gh_base = WordProfile::make(cfg.vocab_size, derive_seed(cfg.seed, "profile:base:GH"));
  WordProfile trans_base =
      WordProfile::make(cfg.vocab_size, derive_seed(cfg.seed, "profile:base:Trans"));

  std::vector<Document> docs;
  for (int ci = 0; ci < tax.num_fine(); ++ci) {
    const std::string& class_name = tax.fine_classes[static_cast<size_t>(ci)];
    auto label = static_cast<CategoryLabel>(ci);
    auto group = tax.group_of(ci);
    const WordProfile* base = nullptr;
    std::string shared_pool;
    if (group.has_value()) {
      const std::string& group_name = tax.guidance_groups[*group].first;
      base = group_name == "GH" ? &gh_base : &trans_base;
      shared_pool = group_name == "GH" ? "gh" : "trans";
    }
    WordProfile own = WordProfile::make(cfg.vocab_size, derive_seed(cfg.seed, "profile:" + class_name));

    Rng rng(derive_seed(cfg.seed, "docs:" + class_name));
    for (int d = 0; d < cfg.docs_per_class; ++d) {
      int n_sentences = cfg.min_sentences +
                        static_cast<int>(rng.uniform_u32(
                            static_cast<uint32_t>(cfg.max_sentences - cfg.min_sentences + 1)));
      std::string text;
      for (int s = 0; s < n_sentences; ++s) {
        int n_words = 6 + static_cast<int>(rng.uniform_u32(7));
        std::vector<std::string> words;
        words.reserve(static_cast<size_t>(n_words) + 1);
        for (int w = 0; w < n_words; ++w) {
          bool from_base = base != nullptr && rng.bernoulli(cfg.confusability);
          words.push_back(from_base ? base->sample(rng) : own.sample(rng));
        }
        // One marker token per sentence; grouped classes lean on the shared
        // pool as confusability grows.
        bool shared_marker = base != nullptr && rng.bernoulli(cfg.confusability);
        std::string marker = shared_marker
                                 ? "m" + shared_pool + std::to_string(rng.uniform_u32(kMarkersPerPool))
                                 : "m" + class_name + std::to_string(rng.uniform_u32(kMarkersPerPool));
        words.insert(words.begin() + static_cast<long>(rng.uniform_u32(static_cast<uint32_t>(words.size() + 1))),
                     marker);
        for (size_t w = 0; w < words.size(); ++w) {
          if (w || s) text += ' ';
          text += words[w];
        }
        text += '.';
      }

      Document doc;
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%04d", d);
      doc.id = "synth-" + class_name + "-" + idx;
      doc.text = std::move(text);
      doc.label = label;
      doc.generator_id = label == CategoryLabel::human ? "human" : "synthetic";
      doc.source_dataset = "synthetic";
      doc.split = "train";
      if (is_translated(label)) {
        doc.meta["source_language"] = std::string(source_language_for(label));
        doc.meta["bleu_roundtrip"] = 0.2 + 0.75 * rng.uniform();
      }
      docs.push_back(std::move(doc));
    }
  }

  SplitResult split = stratified_split(docs, 0.8, 0.1, 0.1, derive_seed(cfg.seed, "split"));
  docs.clear();
  for (auto* part : {&split.train, &split.val, &split.test}) {
    for (auto& d : *part) docs.push_back(std::move(d));
  }
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
  return docs;
}

}  // namespace fgmgt
