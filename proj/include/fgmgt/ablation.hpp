#pragma once

#include <string>
#include <vector>

#include "fgmgt/datagen.hpp"
#include "fgmgt/evaluate.hpp"

namespace fgmgt {

// Technique comparison on a seeded confusable corpus: a shared-marker synth
// fixture where the grouped classes overlap enough that the ranking between
// the variants is informative.
struct AblationConfig {
  SyntheticConfig corpus;  // see default_ablation_config
  uint32_t encoder_dim = 4096;
  TrainConfig train;
  double lambda = 0.01;
  int eval_length = 512;
  double fpr_budget = 0.05;
};

// confusability 0.7, seed 42, linear heads with lr 0.1.
AblationConfig default_ablation_config();

struct AblationRow {
  std::string name;
  double map = 0;
  double macro_f1 = 0;
  double pd_at_5fpr = 0;

  bool operator==(const AblationRow&) const = default;
};

// Rows, in order: baseline, +guidance, +cropping, +experts, full,
// naive-coarse-to-fine. The first three train a single expert at eval_length;
// the expert rows train the default {128,256,512} specs and predict as an
// ensemble; "full" combines guidance, cropping and experts.
std::vector<AblationRow> run_ablation(const AblationConfig& cfg);

std::string render_ablation(const std::vector<AblationRow>& rows);

}  // namespace fgmgt
