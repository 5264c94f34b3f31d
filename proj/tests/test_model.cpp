#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "fgmgt/errors.hpp"
#include "fgmgt/model.hpp"
#include "fgmgt/rng.hpp"

using namespace fgmgt;

namespace {

FeatureVector sparse_vec(uint32_t dim, uint64_t seed, size_t nnz = 6) {
  Rng rng(seed);
  std::set<uint32_t> idx;
  while (idx.size() < std::min<size_t>(nnz, dim)) idx.insert(rng.uniform_u32(dim));
  FeatureVector v;
  v.dim = dim;
  double norm = 0;
  for (uint32_t i : idx) {
    double val = 0.1 + rng.uniform();
    v.entries.emplace_back(i, val);
    norm += val * val;
  }
  norm = std::sqrt(norm);
  for (auto& [i, val] : v.entries) val /= norm;
  return v;
}

// Instances for finite differences keep every ReLU pre-activation away from
// zero so the +-step probes never cross a kink.
struct Instance {
  MlpParams params;
  FeatureVector features;
  CategoryLabel label;
};

Instance make_instance(uint64_t seed, uint32_t hidden = 8) {
  const uint32_t dim = 16, C = 8;
  for (uint64_t attempt = 0;; ++attempt) {
    uint64_t s = derive_seed(seed, attempt);
    Instance inst;
    inst.params = init_params(dim, hidden, C, s);
    inst.features = sparse_vec(dim, derive_seed(s, "x"));
    inst.label = static_cast<CategoryLabel>(Rng(derive_seed(s, "y")).uniform_u32(C));
    if (hidden == 0) return inst;
    bool safe = true;
    for (uint32_t j = 0; j < hidden && safe; ++j) {
      double a = inst.params.b1[j];
      for (const auto& [i, x] : inst.features.entries) a += x * inst.params.w1[i * hidden + j];
      if (std::abs(a) < 1e-3) safe = false;
    }
    if (safe) return inst;
  }
}

double plain_ce(const std::vector<double>& z, int label) {
  double mx = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s) - z[static_cast<size_t>(label)];
}

}  // namespace

TEST_CASE("forward basics") {
  MlpParams p = init_params(16, 8, 8, 1);
  FeatureVector x = sparse_vec(16, 2);

  SUBCASE("zero params give zero logits") {
    std::fill(p.w1.begin(), p.w1.end(), 0.0f);
    std::fill(p.b1.begin(), p.b1.end(), 0.0f);
    std::fill(p.w2.begin(), p.w2.end(), 0.0f);
    std::fill(p.b2.begin(), p.b2.end(), 0.0f);
    for (double z : forward(p, x)) CHECK(z == 0.0);
  }
  SUBCASE("zero input passes b2 through") {
    for (uint32_t c = 0; c < 8; ++c) p.b2[c] = static_cast<float>(c + 1);
    std::fill(p.b1.begin(), p.b1.end(), 0.0f);
    FeatureVector zero;
    zero.dim = 16;
    auto z = forward(p, zero);
    for (uint32_t c = 0; c < 8; ++c) CHECK(z[c] == doctest::Approx(c + 1));
  }
  SUBCASE("finite in, finite out") {
    for (double z : forward(p, x)) CHECK(std::isfinite(z));
  }
  SUBCASE("dimension mismatch") {
    FeatureVector bad = sparse_vec(32, 3);
    CHECK_THROWS_AS(forward(p, bad), ConfigError);
  }
  SUBCASE("linear mode") {
    MlpParams lin = init_params(16, 0, 8, 4);
    CHECK(lin.w1.empty());
    CHECK(lin.w2.size() == 16 * 8);
    for (double z : forward(lin, x)) CHECK(std::isfinite(z));
  }
}

TEST_CASE("softmax") {
  auto u = softmax(std::vector<double>(8, 3.7));
  for (double p : u) CHECK(p == doctest::Approx(0.125).epsilon(1e-12));

  auto big = softmax({1000.0, 0.0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] >= 0.0);
  CHECK(std::isfinite(big[0]));

  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> z(8);
    for (double& v : z) v = rng.uniform() * 20 - 10;
    auto p = softmax(z);
    double sum = 0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    auto argmax = [](const std::vector<double>& v) {
      return std::distance(v.begin(), std::max_element(v.begin(), v.end()));
    };
    CHECK(argmax(p) == argmax(z));
  }
}

TEST_CASE("loss on uniform logits hits closed forms bit-exactly") {
  std::vector<double> z(8, 0.0);
  LossConfig cfg;

  auto human = loss_total(z, CategoryLabel::human, cfg);
  CHECK(human.ce == std::log(8.0));
  CHECK(human.gh == 0.0);
  CHECK(human.trans == 0.0);
  CHECK(human.total == human.ce);

  auto gen = loss_total(z, CategoryLabel::generated, cfg);
  CHECK(gen.ce == std::log(8.0));
  CHECK(gen.gh == std::log(2.0));
  CHECK(gen.trans == 0.0);
  CHECK(gen.total == gen.ce + 0.01 * std::log(2.0));

  auto zh = loss_total(z, CategoryLabel::translated_zh, cfg);
  CHECK(zh.gh == 0.0);
  CHECK(zh.trans == std::log(4.0));
  CHECK(zh.total == zh.ce + 0.01 * std::log(4.0));

  auto para = loss_total(z, CategoryLabel::paraphrased, cfg);
  CHECK(para.total == para.ce);

  // Nonzero uniform logits land within tolerance.
  std::vector<double> z2(8, 1.375);
  CHECK(std::abs(loss_total(z2, CategoryLabel::human, cfg).ce - std::log(8.0)) <= 1e-9);
}

TEST_CASE("loss breakdown invariant holds on random logits") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(8);
    for (double& v : z) v = rng.uniform() * 12 - 6;
    LossConfig cfg;
    cfg.lambda = rng.uniform();
    auto label = static_cast<CategoryLabel>(rng.uniform_u32(8));
    auto bd = loss_total(z, label, cfg);
    CHECK(bd.ce >= 0.0);
    CHECK(bd.gh >= 0.0);
    CHECK(bd.trans >= 0.0);
    CHECK(bd.total == bd.ce + cfg.lambda * (bd.gh + bd.trans));
  }
}

TEST_CASE("loss is shift invariant") {
  Rng rng(23);
  LossConfig cfg;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> z(8);
    for (double& v : z) v = rng.uniform() * 6 - 3;
    std::vector<double> shifted(z);
    double c = rng.uniform() * 100 - 50;
    for (double& v : shifted) v += c;
    auto label = static_cast<CategoryLabel>(rng.uniform_u32(8));
    auto a = loss_total(z, label, cfg);
    auto b = loss_total(shifted, label, cfg);
    CHECK(a.ce == doctest::Approx(b.ce).epsilon(1e-9));
    CHECK(a.gh == doctest::Approx(b.gh).epsilon(1e-9));
    CHECK(a.trans == doctest::Approx(b.trans).epsilon(1e-9));
  }
}

TEST_CASE("lambda zero is bit-identical to plain cross-entropy") {
  Rng rng(29);
  LossConfig zero_cfg;
  zero_cfg.lambda = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z(8);
    for (double& v : z) v = rng.uniform() * 10 - 5;
    int label = static_cast<int>(rng.uniform_u32(8));
    auto bd = loss_total(z, static_cast<CategoryLabel>(label), zero_cfg);
    CHECK(bd.total == plain_ce(z, label));
  }

  // Gradients too: lambda=0 must equal a taxonomy with no guidance groups.
  LossConfig groupless;
  groupless.lambda = 0.7;
  groupless.taxonomy.guidance_groups.clear();
  for (int t = 0; t < 10; ++t) {
    Instance inst = make_instance(1000 + t);
    auto a = backward(inst.params, inst.features, inst.label, zero_cfg);
    auto b = backward(inst.params, inst.features, inst.label, groupless);
    CHECK(a.w1 == b.w1);
    CHECK(a.b1 == b.b1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b2 == b.b2);
  }
}

TEST_CASE("logit gradient matches the closed form via b2") {
  // d(total)/d(b2) is exactly the logit-space gradient.
  Instance inst = make_instance(77);
  LossConfig cfg;
  cfg.lambda = 0.25;
  auto z = forward(inst.params, inst.features);
  auto p = softmax(z);
  auto g = backward(inst.params, inst.features, inst.label, cfg);

  int li = static_cast<int>(inst.label);
  std::vector<double> expect(8);
  for (int c = 0; c < 8; ++c) expect[static_cast<size_t>(c)] = p[static_cast<size_t>(c)] - (c == li ? 1.0 : 0.0);
  auto group = cfg.taxonomy.group_of(li);
  if (group.has_value()) {
    auto idx = cfg.taxonomy.group_indices(cfg.taxonomy.guidance_groups[*group].first);
    double mx = -1e300, s = 0;
    for (int i : idx) mx = std::max(mx, z[static_cast<size_t>(i)]);
    for (int i : idx) s += std::exp(z[static_cast<size_t>(i)] - mx);
    for (int i : idx) {
      double pg = std::exp(z[static_cast<size_t>(i)] - mx) / s;
      expect[static_cast<size_t>(i)] += cfg.lambda * (pg - (i == li ? 1.0 : 0.0));
    }
  }
  for (int c = 0; c < 8; ++c) CHECK(g.b2[static_cast<size_t>(c)] == doctest::Approx(expect[static_cast<size_t>(c)]).epsilon(1e-12));
}

TEST_CASE("guidance touches only group logit coordinates") {
  LossConfig on;
  on.lambda = 0.01;
  LossConfig off;
  off.lambda = 0.0;

  // GH-labeled sample, hidden mode: logit-space delta confined to {1,2}.
  Instance inst = make_instance(101);
  inst.label = CategoryLabel::humanized;
  auto g_on = backward(inst.params, inst.features, inst.label, on);
  auto g_off = backward(inst.params, inst.features, inst.label, off);
  for (int c = 0; c < 8; ++c) {
    double delta = std::abs(g_on.b2[static_cast<size_t>(c)] - g_off.b2[static_cast<size_t>(c)]);
    if (c == 1 || c == 2) CHECK(delta > 0.0);
    else CHECK(delta == 0.0);
  }

  // Linear mode: all parameter-space deltas stay on group columns.
  Instance lin = make_instance(103, 0);
  lin.label = CategoryLabel::translated_es;
  auto l_on = backward(lin.params, lin.features, lin.label, on);
  auto l_off = backward(lin.params, lin.features, lin.label, off);
  for (size_t i = 0; i < l_on.w2.size(); ++i) {
    int c = static_cast<int>(i % 8);
    bool in_group = c >= 4;
    if (!in_group) CHECK(l_on.w2[i] == l_off.w2[i]);
  }
  bool any_group_delta = false;
  for (size_t i = 0; i < l_on.w2.size(); ++i) {
    if (static_cast<int>(i % 8) >= 4 && l_on.w2[i] != l_off.w2[i]) any_group_delta = true;
  }
  CHECK(any_group_delta);

  // Human label: guidance adds nothing anywhere.
  Instance h = make_instance(105);
  h.label = CategoryLabel::human;
  auto h_on = backward(h.params, h.features, h.label, on);
  auto h_off = backward(h.params, h.features, h.label, off);
  CHECK(h_on.w1 == h_off.w1);
  CHECK(h_on.b2 == h_off.b2);
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (double lambda : {0.0, 0.01, 0.5}) {
    LossConfig cfg;
    cfg.lambda = lambda;
    for (int t = 0; t < 12; ++t) {
      Instance inst = make_instance(derive_seed(2024, static_cast<uint64_t>(t)) + static_cast<uint64_t>(lambda * 1000));
      auto report = grad_check(inst.params, inst.features, inst.label, cfg, 1e-4, 1e-4);
      CHECK(report.coords_checked >= 200);
      CHECK(report.pass);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
  // Linear mode too.
  LossConfig cfg;
  Instance lin = make_instance(55, 0);
  auto report = grad_check(lin.params, lin.features, lin.label, cfg, 1e-4, 1e-4);
  CHECK(report.pass);
}

TEST_CASE("a scaled gradient would fail the check") {
  Instance inst = make_instance(303);
  LossConfig cfg;
  auto g = backward(inst.params, inst.features, inst.label, cfg);
  // Scaling by 1.01 puts every nonzero coordinate ~1e-2 away in relative
  // terms, far beyond the 1e-4 gate grad_check passes at.
  double worst = 0;
  for (double v : g.b2) {
    if (v == 0) continue;
    double scaled = v * 1.01;
    worst = std::max(worst, std::abs(scaled - v) / std::max(std::abs(scaled), std::abs(v)));
  }
  CHECK(worst > 1e-4);
  CHECK_THROWS_AS(grad_check(inst.params, inst.features, inst.label, cfg, 0.0, 1e-4), ConfigError);
}

TEST_CASE("adam") {
  MlpParams p = init_params(16, 8, 8, 9);
  AdamState s = AdamState::zeros_like(p);

  SUBCASE("zero gradient is a fixed point") {
    MlpParams before = p;
    adam_step(s, p, GradientSet::zeros_like(p));
    CHECK(p.w1 == before.w1);
    CHECK(p.b2 == before.b2);
    CHECK(s.step == 1);
  }
  SUBCASE("descends on w^2") {
    MlpParams w;
    w.dim = 1;
    w.hidden = 0;
    w.C = 2;
    w.w2 = {1.0f, 0.0f};
    w.b2 = {0.0f, 0.0f};
    AdamState st = AdamState::zeros_like(w);
    GradientSet g = GradientSet::zeros_like(w);
    g.w2[0] = 2.0;  // d(w^2)/dw at w=1
    adam_step(st, w, g);
    CHECK(w.w2[0] < 1.0f);
    CHECK(w.w2[1] == 0.0f);
  }
  SUBCASE("deterministic trajectories") {
    MlpParams p1 = init_params(16, 8, 8, 12), p2 = init_params(16, 8, 8, 12);
    AdamState s1 = AdamState::zeros_like(p1), s2 = AdamState::zeros_like(p2);
    FeatureVector x = sparse_vec(16, 40);
    LossConfig cfg;
    for (int t = 0; t < 5; ++t) {
      adam_step(s1, p1, backward(p1, x, CategoryLabel::generated, cfg));
      adam_step(s2, p2, backward(p2, x, CategoryLabel::generated, cfg));
    }
    CHECK(p1.w1 == p2.w1);
    CHECK(p1.w2 == p2.w2);
    CHECK(p1.b1 == p2.b1);
    CHECK(p1.b2 == p2.b2);
  }
  SUBCASE("non-finite gradient halts") {
    GradientSet g = GradientSet::zeros_like(p);
    g.w2[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(s, p, g), DataError);
  }
  SUBCASE("training reduces loss on a fixed sample") {
    MlpParams q = init_params(16, 8, 8, 13);
    AdamState st = AdamState::zeros_like(q, 1e-2);
    FeatureVector x = sparse_vec(16, 41);
    LossConfig cfg;
    double first = loss_total(forward(q, x), CategoryLabel::paraphrased, cfg).total;
    for (int t = 0; t < 50; ++t) adam_step(st, q, backward(q, x, CategoryLabel::paraphrased, cfg));
    double last = loss_total(forward(q, x), CategoryLabel::paraphrased, cfg).total;
    CHECK(last < first);
  }
}

TEST_CASE("init_params shapes and reproducibility") {
  MlpParams a = init_params(64, 16, 8, 5);
  MlpParams b = init_params(64, 16, 8, 5);
  MlpParams c = init_params(64, 16, 8, 6);
  CHECK(a.w1 == b.w1);
  CHECK(a.w2 == b.w2);
  CHECK(a.w1 != c.w1);
  CHECK_NOTHROW(a.validate());
  CHECK(a.coord_count() == 64 * 16 + 16 + 16 * 8 + 8);
  for (float v : a.b1) CHECK(v == 0.0f);
  for (float v : a.b2) CHECK(v == 0.0f);

  MlpParams bad = a;
  bad.w1.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = a;
  bad.w2[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda = 0.01;
  cfg.taxonomy.guidance_groups[0].first = "Mystery";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
