#include "fgmgt/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fgmgt/errors.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {

namespace {

void check_finite(const std::vector<float>& v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw DataError(std::string("non-finite value in ") + what);
  }
}

double logsumexp(const std::vector<double>& z, const std::vector<int>* subset = nullptr) {
  double mx = -std::numeric_limits<double>::infinity();
  if (subset) {
    for (int i : *subset) mx = std::max(mx, z[static_cast<size_t>(i)]);
  } else {
    for (double v : z) mx = std::max(mx, v);
  }
  double s = 0;
  if (subset) {
    for (int i : *subset) s += std::exp(z[static_cast<size_t>(i)] - mx);
  } else {
    for (double v : z) s += std::exp(v - mx);
  }
  return mx + std::log(s);
}

}  // namespace

void MlpParams::validate() const {
  if (C < 2) throw ConfigError("model needs at least 2 classes");
  if (dim < 1) throw ConfigError("model input dim must be >= 1");
  size_t in = hidden > 0 ? hidden : dim;
  if (hidden > 0) {
    if (w1.size() != static_cast<size_t>(dim) * hidden) throw ConfigError("w1 shape mismatch");
    if (b1.size() != hidden) throw ConfigError("b1 shape mismatch");
  } else {
    if (!w1.empty() || !b1.empty()) throw ConfigError("linear mode must have empty w1/b1");
  }
  if (w2.size() != in * C) throw ConfigError("w2 shape mismatch");
  if (b2.size() != C) throw ConfigError("b2 shape mismatch");
  check_finite(w1, "w1");
  check_finite(b1, "b1");
  check_finite(w2, "w2");
  check_finite(b2, "b2");
}

size_t MlpParams::coord_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

MlpParams init_params(uint32_t dim, uint32_t hidden, uint32_t C, uint64_t seed) {
  MlpParams p;
  p.dim = dim;
  p.hidden = hidden;
  p.C = C;
  Rng rng(derive_seed(seed, "init_params"));
  auto fill = [&](std::vector<float>& w, size_t n, double bound) {
    w.resize(n);
    for (size_t i = 0; i < n; ++i) w[i] = static_cast<float>((rng.uniform() * 2 - 1) * bound);
  };
  if (hidden > 0) {
    fill(p.w1, static_cast<size_t>(dim) * hidden, std::sqrt(6.0 / (double(dim) + hidden)));
    p.b1.assign(hidden, 0.0f);
    fill(p.w2, static_cast<size_t>(hidden) * C, std::sqrt(6.0 / (double(hidden) + C)));
  } else {
    fill(p.w2, static_cast<size_t>(dim) * C, std::sqrt(6.0 / (double(dim) + C)));
  }
  p.b2.assign(C, 0.0f);
  p.validate();
  return p;
}

void LossConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0) throw ConfigError("lambda must be finite and >= 0");
  taxonomy.validate();
  for (const auto& [name, members] : taxonomy.guidance_groups) {
    if (name != "GH" && name != "Trans") {
      throw ConfigError("loss breakdown supports guidance groups GH and Trans, got \"" + name + "\"");
    }
  }
}

GradientSet GradientSet::zeros_like(const MlpParams& params) {
  GradientSet g;
  g.w1.assign(params.w1.size(), 0.0);
  g.b1.assign(params.b1.size(), 0.0);
  g.w2.assign(params.w2.size(), 0.0);
  g.b2.assign(params.b2.size(), 0.0);
  return g;
}

size_t GradientSet::coord_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

AdamState AdamState::zeros_like(const MlpParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m_w1.assign(params.w1.size(), 0.0f);
  s.m_b1.assign(params.b1.size(), 0.0f);
  s.m_w2.assign(params.w2.size(), 0.0f);
  s.m_b2.assign(params.b2.size(), 0.0f);
  s.v_w1 = s.m_w1;
  s.v_b1 = s.m_b1;
  s.v_w2 = s.m_w2;
  s.v_b2 = s.m_b2;
  return s;
}

std::vector<double> forward(const MlpParams& params, const FeatureVector& features) {
  if (features.dim != params.dim) {
    throw ConfigError("feature dim " + std::to_string(features.dim) + " does not match model dim " +
                      std::to_string(params.dim));
  }
  const uint32_t C = params.C;
  std::vector<double> logits(params.b2.begin(), params.b2.end());
  if (params.hidden > 0) {
    const uint32_t H = params.hidden;
    std::vector<double> a1(params.b1.begin(), params.b1.end());
    for (const auto& [idx, x] : features.entries) {
      const float* row = &params.w1[static_cast<size_t>(idx) * H];
      for (uint32_t j = 0; j < H; ++j) a1[j] += x * static_cast<double>(row[j]);
    }
    for (uint32_t j = 0; j < H; ++j) {
      double h = a1[j] > 0 ? a1[j] : 0.0;
      if (h == 0.0) continue;
      const float* row = &params.w2[static_cast<size_t>(j) * C];
      for (uint32_t c = 0; c < C; ++c) logits[c] += h * static_cast<double>(row[c]);
    }
  } else {
    for (const auto& [idx, x] : features.entries) {
      const float* row = &params.w2[static_cast<size_t>(idx) * C];
      for (uint32_t c = 0; c < C; ++c) logits[c] += x * static_cast<double>(row[c]);
    }
  }
  return logits;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

LossBreakdown loss_total(const std::vector<double>& logits, CategoryLabel label,
                         const LossConfig& cfg) {
  cfg.validate();
  const auto& tax = cfg.taxonomy;
  int li = static_cast<int>(label);
  if (li < 0 || li >= tax.num_fine() || logits.size() != static_cast<size_t>(tax.num_fine())) {
    throw DataError("label or logit count does not match taxonomy");
  }

  LossBreakdown out;
  out.ce = logsumexp(logits) - logits[static_cast<size_t>(li)];
  auto group = tax.group_of(li);
  if (group.has_value()) {
    const auto& [name, members] = tax.guidance_groups[*group];
    std::vector<int> idx = tax.group_indices(name);
    double term = logsumexp(logits, &idx) - logits[static_cast<size_t>(li)];
    if (name == "GH") out.gh = term;
    else out.trans = term;
  }
  out.total = out.ce + cfg.lambda * (out.gh + out.trans);
  return out;
}

LossBreakdown accumulate_gradient(GradientSet& grad, const MlpParams& params,
                                  const FeatureVector& features, CategoryLabel label,
                                  const Taxonomy& taxonomy, double ce_coeff,
                                  double guidance_coeff) {
  const uint32_t C = params.C;
  const int li = static_cast<int>(label);

  // Forward pass, keeping hidden activations for the backward sweep.
  std::vector<double> a1, h;
  std::vector<double> logits(params.b2.begin(), params.b2.end());
  if (params.hidden > 0) {
    const uint32_t H = params.hidden;
    a1.assign(params.b1.begin(), params.b1.end());
    for (const auto& [idx, x] : features.entries) {
      const float* row = &params.w1[static_cast<size_t>(idx) * H];
      for (uint32_t j = 0; j < H; ++j) a1[j] += x * static_cast<double>(row[j]);
    }
    h.resize(H);
    for (uint32_t j = 0; j < H; ++j) h[j] = a1[j] > 0 ? a1[j] : 0.0;
    for (uint32_t j = 0; j < H; ++j) {
      if (h[j] == 0.0) continue;
      const float* row = &params.w2[static_cast<size_t>(j) * C];
      for (uint32_t c = 0; c < C; ++c) logits[c] += h[j] * static_cast<double>(row[c]);
    }
  } else {
    for (const auto& [idx, x] : features.entries) {
      const float* row = &params.w2[static_cast<size_t>(idx) * C];
      for (uint32_t c = 0; c < C; ++c) logits[c] += x * static_cast<double>(row[c]);
    }
  }

  // Logit-space gradient: ce_coeff * (p - onehot), plus the group term
  // scattered onto the group's coordinates.
  std::vector<double> p = softmax(logits);
  std::vector<double> dz(C);
  for (uint32_t c = 0; c < C; ++c) dz[c] = ce_coeff * (p[c] - (static_cast<int>(c) == li ? 1.0 : 0.0));
  double mx_all = -std::numeric_limits<double>::infinity();
  for (uint32_t c = 0; c < C; ++c) mx_all = std::max(mx_all, logits[c]);
  double sum_all = 0;
  for (uint32_t c = 0; c < C; ++c) sum_all += std::exp(logits[c] - mx_all);
  LossBreakdown out;
  out.ce = mx_all + std::log(sum_all) - logits[static_cast<size_t>(li)];
  out.total = ce_coeff * out.ce;
  if (guidance_coeff != 0.0) {
    auto group = taxonomy.group_of(li);
    if (group.has_value()) {
      std::vector<int> idx = taxonomy.group_indices(taxonomy.guidance_groups[*group].first);
      double mx = -std::numeric_limits<double>::infinity();
      for (int i : idx) mx = std::max(mx, logits[static_cast<size_t>(i)]);
      double s = 0;
      std::vector<double> e(idx.size());
      for (size_t k = 0; k < idx.size(); ++k) {
        e[k] = std::exp(logits[static_cast<size_t>(idx[k])] - mx);
        s += e[k];
      }
      for (size_t k = 0; k < idx.size(); ++k) {
        double pg = e[k] / s;
        dz[static_cast<size_t>(idx[k])] += guidance_coeff * (pg - (idx[k] == li ? 1.0 : 0.0));
      }
      double term = mx + std::log(s) - logits[static_cast<size_t>(li)];
      if (taxonomy.guidance_groups[*group].first == "Trans") {
        out.trans = term;
      } else {
        out.gh = term;
      }
      out.total += guidance_coeff * term;
    }
  }

  if (params.hidden > 0) {
    const uint32_t H = params.hidden;
    for (uint32_t j = 0; j < H; ++j) {
      if (h[j] == 0.0) continue;
      double* g2 = &grad.w2[static_cast<size_t>(j) * C];
      for (uint32_t c = 0; c < C; ++c) g2[c] += h[j] * dz[c];
    }
    for (uint32_t c = 0; c < C; ++c) grad.b2[c] += dz[c];
    std::vector<double> da1(H, 0.0);
    for (uint32_t j = 0; j < H; ++j) {
      if (a1[j] <= 0) continue;
      const float* row = &params.w2[static_cast<size_t>(j) * C];
      double acc = 0;
      for (uint32_t c = 0; c < C; ++c) acc += static_cast<double>(row[c]) * dz[c];
      da1[j] = acc;
    }
    for (uint32_t j = 0; j < H; ++j) grad.b1[j] += da1[j];
    for (const auto& [idx, x] : features.entries) {
      double* g1 = &grad.w1[static_cast<size_t>(idx) * H];
      for (uint32_t j = 0; j < H; ++j) g1[j] += x * da1[j];
    }
  } else {
    for (const auto& [idx, x] : features.entries) {
      double* g2 = &grad.w2[static_cast<size_t>(idx) * C];
      for (uint32_t c = 0; c < C; ++c) g2[c] += x * dz[c];
    }
    for (uint32_t c = 0; c < C; ++c) grad.b2[c] += dz[c];
  }
  return out;
}

GradientSet backward(const MlpParams& params, const FeatureVector& features, CategoryLabel label,
                     const LossConfig& cfg) {
  cfg.validate();
  GradientSet g = GradientSet::zeros_like(params);
  accumulate_gradient(g, params, features, label, cfg.taxonomy, 1.0, cfg.lambda);
  return g;
}

namespace {

void adam_update(int64_t step, double lr, double beta1, double beta2, double eps,
                 std::vector<float>& p, std::vector<float>& m, std::vector<float>& v,
                 const std::vector<double>& g) {
  if (p.size() != g.size() || m.size() != g.size() || v.size() != g.size()) {
    throw ConfigError("adam state shape mismatch");
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (size_t i = 0; i < g.size(); ++i) {
    double gi = g[i];
    if (!std::isfinite(gi)) throw DataError("non-finite gradient in adam_step");
    double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
    double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    double mhat = mi / bc1;
    double vhat = vi / bc2;
    p[i] = static_cast<float>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + eps));
  }
}

}  // namespace

void adam_step(AdamState& state, MlpParams& params, const GradientSet& grads) {
  ++state.step;
  adam_update(state.step, state.lr, state.beta1, state.beta2, state.eps, params.w1, state.m_w1,
              state.v_w1, grads.w1);
  adam_update(state.step, state.lr, state.beta1, state.beta2, state.eps, params.b1, state.m_b1,
              state.v_b1, grads.b1);
  adam_update(state.step, state.lr, state.beta1, state.beta2, state.eps, params.w2, state.m_w2,
              state.v_w2, grads.w2);
  adam_update(state.step, state.lr, state.beta1, state.beta2, state.eps, params.b2, state.m_b2,
              state.v_b2, grads.b2);
}

namespace {

float* param_coord(MlpParams& p, size_t flat) {
  if (flat < p.w1.size()) return &p.w1[flat];
  flat -= p.w1.size();
  if (flat < p.b1.size()) return &p.b1[flat];
  flat -= p.b1.size();
  if (flat < p.w2.size()) return &p.w2[flat];
  flat -= p.w2.size();
  return &p.b2[flat];
}

double grad_coord(const GradientSet& g, size_t flat) {
  if (flat < g.w1.size()) return g.w1[flat];
  flat -= g.w1.size();
  if (flat < g.b1.size()) return g.b1[flat];
  flat -= g.b1.size();
  if (flat < g.w2.size()) return g.w2[flat];
  flat -= g.w2.size();
  return g.b2[flat];
}

}  // namespace

GradCheckReport grad_check(const MlpParams& params, const FeatureVector& features,
                           CategoryLabel label, const LossConfig& cfg, double step,
                           double tolerance) {
  if (step <= 0) throw ConfigError("grad_check step must be > 0");
  GradientSet analytic = backward(params, features, label, cfg);

  const size_t total = params.coord_count();
  std::vector<size_t> coords;
  const size_t target = 256;
  if (total <= target * 2) {
    coords.resize(total);
    for (size_t i = 0; i < total; ++i) coords[i] = i;
  } else {
    std::set<size_t> picked;
    Rng rng(derive_seed(total, "grad_check"));
    while (picked.size() < target) picked.insert(rng.next() % total);
    coords.assign(picked.begin(), picked.end());
  }

  MlpParams work = params;
  GradCheckReport report;
  report.coords_checked = coords.size();
  for (size_t flat : coords) {
    float* slot = param_coord(work, flat);
    const float orig = *slot;
    *slot = static_cast<float>(static_cast<double>(orig) + step);
    double hi_val = static_cast<double>(*slot);
    double hi = loss_total(forward(work, features), label, cfg).total;
    *slot = static_cast<float>(static_cast<double>(orig) - step);
    double lo_val = static_cast<double>(*slot);
    double lo = loss_total(forward(work, features), label, cfg).total;
    *slot = orig;
    double realized = hi_val - lo_val;  // float rounding makes this differ slightly from 2*step
    if (realized == 0.0) continue;
    double fd = (hi - lo) / realized;
    double an = grad_coord(analytic, flat);
    // 1e-6 floor absorbs finite-difference noise on true-zero coordinates.
    double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace fgmgt
