#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fgmgt/corpus.hpp"
#include "fgmgt/encoder.hpp"
#include "fgmgt/model.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {

struct ExpertSpec {
  int max_tokens = 0;

  bool operator==(const ExpertSpec&) const = default;
};

std::vector<ExpertSpec> default_expert_specs();  // {128, 256, 512}

struct RoutingPolicy {
  // false: route to the spec nearest in token length, exact ties toward the
  // longer spec. true: any length strictly between two specs goes to the
  // longer one regardless of distance.
  bool round_up_between = false;

  bool operator==(const RoutingPolicy&) const = default;
};

struct TrainConfig {
  int epochs = 3;
  int batch_size = 32;
  double lr = 1e-3;
  int hidden = 256;
  double p_crop = 0.3;
  std::vector<int> crop_lengths = {32, 50, 128, 256, 500};
  uint64_t seed = 0;
  int max_concurrency = 1;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

struct ExpertBundle {
  EncoderConfig encoder_cfg;
  Taxonomy taxonomy;
  // Sorted by max_tokens, strictly ascending.
  std::vector<std::pair<ExpertSpec, MlpParams>> experts;
  RoutingPolicy routing;
  bool ensemble_average_logits = false;

  void validate() const;  // throws ConfigError
};

// With probability p_crop, truncates the document to a length drawn uniformly
// from crop_lengths minus {expert_len}; otherwise truncates to expert_len.
// Consumes rng draws in a fixed order, so callers stay reproducible.
std::string crop_augment(const Document& doc, int expert_len, const TrainConfig& cfg, Rng& rng);

// Per-epoch loss means. epoch_loss is the mean batch objective; the component
// vectors carry raw (unweighted) means: cross-entropy over every example,
// each group term over that group's examples only. Group means stay zero when
// lambda == 0 or the group never appears.
struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_ce;
  std::vector<double> epoch_gh;
  std::vector<double> epoch_trans;
};

// Trains one expert on the split == "train" documents. The batch objective is
// mean cross-entropy plus lambda times the group-conditional mean of each
// guidance term. Bit-deterministic for a given cfg.seed.
MlpParams train_expert(const std::vector<Document>& docs, const EncoderConfig& encoder_cfg,
                       const ExpertSpec& spec, const TrainConfig& cfg, const LossConfig& loss_cfg,
                       TrainReport* report = nullptr);

// Trains one expert per spec (sorted ascending); expert m uses seed + m, so
// sequential and concurrent schedules produce identical bundles.
// reports, when given, is filled with one entry per expert in sorted order.
ExpertBundle train_bundle(const std::vector<Document>& docs, const EncoderConfig& encoder_cfg,
                          const std::vector<ExpertSpec>& specs, const TrainConfig& cfg,
                          const LossConfig& loss_cfg,
                          std::vector<TrainReport>* reports = nullptr);

// Index of the expert handling a document of token_len tokens.
size_t route(const ExpertBundle& bundle, int token_len);

enum class PredictMode { routed, ensemble };

// Fine-class probability vector. Routed: the routed expert's softmax at its
// own max_tokens. Ensemble: unweighted mean over experts' softmax vectors
// (or a softmax of mean logits when the bundle says so).
std::vector<double> predict(const ExpertBundle& bundle, const std::string& text, PredictMode mode);

// Coarse score per coarse class = max over its fine members' probabilities.
// Scores, not a distribution; order follows taxonomy.coarse_classes().
std::vector<double> aggregate_coarse(const Taxonomy& taxonomy,
                                     const std::vector<double>& fine_probs);

// Ablation baseline: a plain-CE coarse classifier plus one conditional
// sub-classifier per multi-member coarse class.
struct StagedModel {
  EncoderConfig encoder_cfg;
  Taxonomy taxonomy;
  int max_tokens = 512;
  MlpParams coarse;
  std::vector<std::pair<std::string, MlpParams>> heads;  // coarse class -> sub-classifier
};

// reports entries are named "coarse" then "sub:<coarse class>" in class order.
StagedModel naive_coarse_to_fine_train(
    const std::vector<Document>& docs, const EncoderConfig& encoder_cfg, const TrainConfig& cfg,
    int max_tokens = 512, std::vector<std::pair<std::string, TrainReport>>* reports = nullptr);

// coarse probability times conditional sub-probability; singleton coarse
// classes pass through. A valid fine-class distribution.
std::vector<double> naive_coarse_to_fine_predict(const StagedModel& staged,
                                                 const std::string& text);

}  // namespace fgmgt
