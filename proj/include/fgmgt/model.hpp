#pragma once

#include <cstdint>
#include <vector>

#include "fgmgt/corpus.hpp"
#include "fgmgt/encoder.hpp"

namespace fgmgt {

// Two-layer ReLU classifier head. Weights are stored as float32 so bundles
// round-trip bit-exactly; all arithmetic runs in double. hidden == 0 selects
// a single linear layer (w1/b1 empty, w2 is dim x C).
struct MlpParams {
  uint32_t dim = 0;
  uint32_t hidden = 256;
  uint32_t C = 0;
  std::vector<float> w1;  // dim x hidden, row-major
  std::vector<float> b1;  // hidden
  std::vector<float> w2;  // hidden x C (or dim x C when hidden == 0), row-major
  std::vector<float> b2;  // C

  void validate() const;
  size_t coord_count() const;
};

MlpParams init_params(uint32_t dim, uint32_t hidden, uint32_t C, uint64_t seed);

struct LossConfig {
  double lambda = 0.01;
  Taxonomy taxonomy = Taxonomy::default_taxonomy();

  void validate() const;
};

struct LossBreakdown {
  double ce = 0;
  double gh = 0;
  double trans = 0;
  double total = 0;
};

struct GradientSet {
  std::vector<double> w1, b1, w2, b2;

  static GradientSet zeros_like(const MlpParams& params);
  size_t coord_count() const;
};

struct AdamState {
  int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<float> m_w1, m_b1, m_w2, m_b2;
  std::vector<float> v_w1, v_b1, v_w2, v_b2;

  static AdamState zeros_like(const MlpParams& params, double lr = 1e-3);
};

std::vector<double> forward(const MlpParams& params, const FeatureVector& features);
std::vector<double> softmax(const std::vector<double>& logits);

LossBreakdown loss_total(const std::vector<double>& logits, CategoryLabel label,
                         const LossConfig& cfg);

// Adds ce_coeff * d(ce)/d(theta) + guidance_coeff * d(group term)/d(theta)
// into grad. backward() is the single-sample case (ce_coeff=1,
// guidance_coeff=lambda); batch training reweights the guidance part by
// group-conditional batch means. The returned breakdown carries the raw
// (unweighted) ce and group terms, with total set to this sample's weighted
// contribution to the batch objective:
// ce_coeff * ce + guidance_coeff * group term. The group terms are only
// evaluated when guidance_coeff is nonzero.
LossBreakdown accumulate_gradient(GradientSet& grad, const MlpParams& params,
                                  const FeatureVector& features, CategoryLabel label,
                                  const Taxonomy& taxonomy, double ce_coeff,
                                  double guidance_coeff);

GradientSet backward(const MlpParams& params, const FeatureVector& features, CategoryLabel label,
                     const LossConfig& cfg);

void adam_step(AdamState& state, MlpParams& params, const GradientSet& grads);

struct GradCheckReport {
  double max_rel_error = 0;
  size_t coords_checked = 0;
  bool pass = false;
};

GradCheckReport grad_check(const MlpParams& params, const FeatureVector& features,
                           CategoryLabel label, const LossConfig& cfg, double step,
                           double tolerance);

}  // namespace fgmgt
