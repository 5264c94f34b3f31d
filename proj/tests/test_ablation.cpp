#include "doctest.h"

#include "fgmgt/ablation.hpp"

using namespace fgmgt;

namespace {

AblationConfig quick_config() {
  AblationConfig cfg = default_ablation_config();
  cfg.corpus.docs_per_class = 24;
  cfg.corpus.vocab_size = 48;
  cfg.encoder_dim = 1024;
  cfg.train.epochs = 2;
  return cfg;
}

}  // namespace

TEST_CASE("ablation emits the six comparison rows in order") {
  auto rows = run_ablation(quick_config());
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].name == "baseline");
  CHECK(rows[1].name == "+guidance");
  CHECK(rows[2].name == "+cropping");
  CHECK(rows[3].name == "+experts");
  CHECK(rows[4].name == "full");
  CHECK(rows[5].name == "naive-coarse-to-fine");
  for (const auto& row : rows) {
    CHECK(row.map >= 0.0);
    CHECK(row.map <= 1.0);
    CHECK(row.macro_f1 >= 0.0);
    CHECK(row.macro_f1 <= 1.0);
    CHECK(row.pd_at_5fpr >= 0.0);
    CHECK(row.pd_at_5fpr <= 1.0);
  }
  // Guidance changes training, so the row cannot coincide with the baseline.
  CHECK(rows[1] != rows[0]);
  CHECK(rows[4] != rows[0]);
}

TEST_CASE("ablation is deterministic") {
  auto a = run_ablation(quick_config());
  auto b = run_ablation(quick_config());
  CHECK(a == b);
}

TEST_CASE("ablation table renders every row") {
  auto rows = run_ablation(quick_config());
  std::string table = render_ablation(rows);
  for (const auto& row : rows) {
    CHECK(table.find(row.name) != std::string::npos);
  }
  CHECK(table.find("mAP") != std::string::npos);
  CHECK(table.find("PD@5%FPR") != std::string::npos);
}
