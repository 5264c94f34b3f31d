#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fgmgt/corpus.hpp"
#include "json.hpp"

namespace fgmgt {

struct ScoredExample {
  std::string doc_id;
  CategoryLabel true_label = CategoryLabel::human;
  std::vector<double> fine_probs;
  std::string generator_id;
  int token_len = 0;
  std::optional<double> bleu_roundtrip;

  void validate(size_t num_classes) const;
  nlohmann::json to_json() const;
  static ScoredExample from_json(const nlohmann::json& j);
};

// Non-interpolated AP; ties are broken by ascending original index.
double average_precision(const std::vector<std::pair<double, bool>>& scores);

struct MapResult {
  std::map<std::string, double> per_class_ap;
  double map = 0;
  std::vector<std::string> skipped_classes;

  bool operator==(const MapResult&) const = default;
};

// Generic one-vs-rest mAP over an arbitrary class list; probs[i] aligns with
// class_names, labels[i] is an index into class_names.
MapResult map_score_indexed(const std::vector<std::vector<double>>& probs,
                            const std::vector<int>& labels,
                            const std::vector<std::string>& class_names);

MapResult map_score(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy);

struct GeneratorMapResult {
  std::map<std::string, double> per_generator;
  double avg = 0;

  bool operator==(const GeneratorMapResult&) const = default;
};

// Machine examples partitioned by generator_id, each partition evaluated
// together with every human example.
GeneratorMapResult per_generator_map(const std::vector<ScoredExample>& examples,
                                     const Taxonomy& taxonomy);

// Machine-vs-human detection rate: positive = any machine class, score =
// 1 - P(human); max TPR on the ROC staircase subject to FPR <= budget.
double pd_at_fpr(const std::vector<ScoredExample>& examples, double fpr_budget);

struct MacroF1Result {
  double macro_f1 = 0;
  std::map<std::string, double> per_class_f1;
  std::vector<std::string> flagged_classes;

  bool operator==(const MacroF1Result&) const = default;
};

MacroF1Result macro_f1_indexed(const std::vector<std::vector<double>>& probs,
                               const std::vector<int>& labels,
                               const std::vector<std::string>& class_names);
MacroF1Result macro_f1(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy);

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<int64_t>> counts;          // rows true, cols predicted
  std::vector<std::vector<double>> row_normalized;   // zero row stays zero

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_indexed(const std::vector<std::vector<double>>& probs,
                                  const std::vector<int>& labels,
                                  const std::vector<std::string>& class_names);
ConfusionMatrix confusion(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy);

double bleu(const std::string& candidate, const std::string& reference);
double bleu_corpus(const std::vector<std::pair<std::string, std::string>>& pairs);

struct BinReport {
  std::vector<std::string> doc_ids;
  MapResult eval;

  bool operator==(const BinReport&) const = default;
};

// Terciles of translated examples by round-trip BLEU (ascending, ties by
// doc_id); each bin is evaluated together with all non-translated examples.
std::map<std::string, BinReport> bleu_bins(const std::vector<ScoredExample>& examples,
                                           const Taxonomy& taxonomy);

struct EvalReport {
  MapResult overall;
  GeneratorMapResult by_generator;
  double pd_at_5fpr = 0;
  MacroF1Result f1;
  ConfusionMatrix confusion;
  std::optional<std::map<std::string, BinReport>> bleu_bins;

  bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate_examples(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy,
                             double fpr_budget = 0.05);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Fixed-width table, one row per labeled report; values are percentages with
// two decimals. Columns: per-generator mAP, avg mAP, overall mAP, PD@FPR,
// macro-F1.
std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

void render_report(const EvalReport& report, const std::string& format, const std::string& path);

}  // namespace fgmgt
