#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fgmgt/experts.hpp"
#include "fgmgt/metrics.hpp"

namespace fgmgt {

// Scores documents after truncating each to max_tokens. token_len on the
// result is the scored (truncated) length; bleu_roundtrip carries over from
// document metadata when present.
std::vector<ScoredExample> score_documents(const ExpertBundle& bundle,
                                           const std::vector<Document>& docs, int max_tokens,
                                           PredictMode mode);
std::vector<ScoredExample> score_documents(const StagedModel& staged,
                                           const std::vector<Document>& docs, int max_tokens);

// Four-class evaluation: rank by max-over-members coarse scores.
struct CoarseReport {
  MapResult map;
  MacroF1Result f1;
  ConfusionMatrix confusion;

  bool operator==(const CoarseReport&) const = default;
};

CoarseReport coarse_report(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy);
nlohmann::json coarse_report_to_json(const CoarseReport& report);

struct GridEvalOptions {
  std::vector<int> lengths = {32, 50, 128, 256, 500, 512};
  bool routed = true;
  bool ensemble = true;
  bool coarse = false;
  double fpr_budget = 0.05;
  std::string split = "test";  // empty string evaluates every document

  void validate() const;  // throws ConfigError
};

struct ModeEval {
  EvalReport report;
  std::optional<CoarseReport> coarse;

  bool operator==(const ModeEval&) const = default;
};

struct LengthEval {
  int max_tokens = 0;
  std::optional<ModeEval> routed;
  std::optional<ModeEval> ensemble;

  bool operator==(const LengthEval&) const = default;
};

struct GridEvalResult {
  std::vector<LengthEval> lengths;

  bool operator==(const GridEvalResult&) const = default;
};

GridEvalResult evaluate_grid(const ExpertBundle& bundle, const std::vector<Document>& docs,
                             const GridEvalOptions& options);

nlohmann::json grid_eval_to_json(const GridEvalResult& result);

// One table row per (length, mode); coarse blocks appended when present.
std::string render_grid_eval(const GridEvalResult& result);

}  // namespace fgmgt
