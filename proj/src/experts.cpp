#include "fgmgt/experts.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "fgmgt/errors.hpp"

namespace fgmgt {

std::vector<ExpertSpec> default_expert_specs() { return {{128}, {256}, {512}}; }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive and finite");
  if (hidden < 0) throw ConfigError("hidden must be >= 0");
  if (!(p_crop >= 0.0 && p_crop <= 1.0)) throw ConfigError("p_crop must be in [0, 1]");
  if (p_crop > 0 && crop_lengths.empty()) {
    throw ConfigError("crop_lengths must be non-empty when p_crop > 0");
  }
  for (int len : crop_lengths) {
    if (len < 1) throw ConfigError("crop lengths must be >= 1");
  }
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"epochs", epochs},
                        {"batch_size", batch_size},
                        {"lr", lr},
                        {"hidden", hidden},
                        {"p_crop", p_crop},
                        {"crop_lengths", crop_lengths},
                        {"seed", seed},
                        {"max_concurrency", max_concurrency}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<int>();
  if (j.contains("p_crop")) cfg.p_crop = j.at("p_crop").get<double>();
  if (j.contains("crop_lengths")) cfg.crop_lengths = j.at("crop_lengths").get<std::vector<int>>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("max_concurrency")) cfg.max_concurrency = j.at("max_concurrency").get<int>();
  cfg.validate();
  return cfg;
}

void ExpertBundle::validate() const {
  encoder_cfg.validate();
  taxonomy.validate();
  if (experts.empty()) throw ConfigError("bundle must hold at least one expert");
  for (size_t m = 0; m < experts.size(); ++m) {
    const auto& [spec, params] = experts[m];
    if (spec.max_tokens < 1) throw ConfigError("expert max_tokens must be >= 1");
    if (m > 0 && experts[m - 1].first.max_tokens >= spec.max_tokens) {
      throw ConfigError("expert specs must be strictly ascending in max_tokens");
    }
    params.validate();
    if (params.dim != encoder_cfg.dim) {
      throw ConfigError("expert input width does not match the encoder dimension");
    }
    if (static_cast<int>(params.C) != taxonomy.num_fine()) {
      throw ConfigError("expert class count does not match the taxonomy");
    }
  }
}

std::string crop_augment(const Document& doc, int expert_len, const TrainConfig& cfg, Rng& rng) {
  if (expert_len < 1) throw ConfigError("expert_len must be >= 1");
  int target = expert_len;
  if (cfg.p_crop > 0 && rng.bernoulli(cfg.p_crop)) {
    std::vector<int> pool;
    pool.reserve(cfg.crop_lengths.size());
    for (int len : cfg.crop_lengths) {
      if (len != expert_len) pool.push_back(len);
    }
    if (!pool.empty()) target = pool[rng.uniform_u32(static_cast<uint32_t>(pool.size()))];
  }
  return truncate_to_tokens(doc.text, static_cast<size_t>(target));
}

namespace {

struct HeadSample {
  const Document* doc;
  int label;
};

// Shared SGD loop for experts and staged heads. The guidance taxonomy indexes
// the same label space as the samples; lambda == 0 is plain cross-entropy.
MlpParams train_head(const std::vector<HeadSample>& samples, const EncoderConfig& enc,
                     int max_tokens, int num_classes, const TrainConfig& cfg,
                     const Taxonomy& guidance, double lambda, uint64_t seed,
                     TrainReport* report) {
  if (samples.empty()) throw DataError("no training documents");

  MlpParams params = init_params(enc.dim, static_cast<uint32_t>(cfg.hidden),
                                 static_cast<uint32_t>(num_classes), seed);
  AdamState adam = AdamState::zeros_like(params, cfg.lr);
  Rng rng(derive_seed(seed, "train_loop"));

  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t n_groups = guidance.guidance_groups.size();
  const size_t B = static_cast<size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    size_t batches = 0;
    double ce_sum = 0, gh_sum = 0, trans_sum = 0;
    size_t gh_n = 0, trans_n = 0;
    for (size_t start = 0; start < order.size(); start += B) {
      const size_t end = std::min(start + B, order.size());
      const size_t batch_n = end - start;

      std::vector<FeatureVector> feats;
      feats.reserve(batch_n);
      std::vector<int> labels;
      labels.reserve(batch_n);
      std::vector<size_t> group_count(n_groups, 0);
      for (size_t i = start; i < end; ++i) {
        const HeadSample& s = samples[order[i]];
        std::string text = crop_augment(*s.doc, max_tokens, cfg, rng);
        feats.push_back(encode(enc, text, static_cast<size_t>(max_tokens)));
        labels.push_back(s.label);
        if (lambda != 0.0) {
          auto g = guidance.group_of(s.label);
          if (g.has_value()) ++group_count[*g];
        }
      }

      GradientSet grad = GradientSet::zeros_like(params);
      double batch_loss = 0;
      for (size_t k = 0; k < batch_n; ++k) {
        double gcoeff = 0;
        std::optional<size_t> g;
        if (lambda != 0.0) {
          g = guidance.group_of(labels[k]);
          if (g.has_value()) gcoeff = lambda / static_cast<double>(group_count[*g]);
        }
        LossBreakdown part = accumulate_gradient(grad, params, feats[k],
                                                 static_cast<CategoryLabel>(labels[k]), guidance,
                                                 1.0 / static_cast<double>(batch_n), gcoeff);
        batch_loss += part.total;
        ce_sum += part.ce;
        if (g.has_value()) {
          if (guidance.guidance_groups[*g].first == "Trans") {
            trans_sum += part.trans;
            ++trans_n;
          } else {
            gh_sum += part.gh;
            ++gh_n;
          }
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw DataError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                        ", batch " + std::to_string(batches + 1));
      }
      try {
        adam_step(adam, params, grad);
      } catch (const DataError& e) {
        throw DataError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                        std::to_string(batches + 1) + ": " + e.what());
      }
      loss_sum += batch_loss;
      ++batches;
    }
    if (report) {
      report->epoch_loss.push_back(loss_sum / static_cast<double>(batches));
      report->epoch_ce.push_back(ce_sum / static_cast<double>(order.size()));
      report->epoch_gh.push_back(gh_n ? gh_sum / static_cast<double>(gh_n) : 0.0);
      report->epoch_trans.push_back(trans_n ? trans_sum / static_cast<double>(trans_n) : 0.0);
    }
  }
  return params;
}

std::vector<HeadSample> train_split_samples(const std::vector<Document>& docs,
                                            const Taxonomy& taxonomy) {
  std::vector<HeadSample> samples;
  for (const auto& doc : docs) {
    if (doc.split != "train") continue;
    int idx = taxonomy.fine_index(to_string(doc.label));
    if (idx < 0) {
      throw DataError("document \"" + doc.id + "\" has label " +
                      std::string(to_string(doc.label)) + " outside the taxonomy");
    }
    samples.push_back({&doc, idx});
  }
  return samples;
}

}  // namespace

MlpParams train_expert(const std::vector<Document>& docs, const EncoderConfig& encoder_cfg,
                       const ExpertSpec& spec, const TrainConfig& cfg, const LossConfig& loss_cfg,
                       TrainReport* report) {
  encoder_cfg.validate();
  cfg.validate();
  loss_cfg.validate();
  if (spec.max_tokens < 1) throw ConfigError("expert max_tokens must be >= 1");

  std::vector<HeadSample> samples = train_split_samples(docs, loss_cfg.taxonomy);
  return train_head(samples, encoder_cfg, spec.max_tokens, loss_cfg.taxonomy.num_fine(), cfg,
                    loss_cfg.taxonomy, loss_cfg.lambda, cfg.seed, report);
}

ExpertBundle train_bundle(const std::vector<Document>& docs, const EncoderConfig& encoder_cfg,
                          const std::vector<ExpertSpec>& specs, const TrainConfig& cfg,
                          const LossConfig& loss_cfg, std::vector<TrainReport>* reports) {
  if (specs.empty()) throw ConfigError("at least one expert spec is required");
  std::vector<ExpertSpec> sorted = specs;
  std::sort(sorted.begin(), sorted.end(),
            [](const ExpertSpec& a, const ExpertSpec& b) { return a.max_tokens < b.max_tokens; });
  for (size_t m = 1; m < sorted.size(); ++m) {
    if (sorted[m - 1].max_tokens == sorted[m].max_tokens) {
      throw ConfigError("expert specs must be unique");
    }
  }

  std::vector<MlpParams> trained(sorted.size());
  if (reports) {
    reports->clear();
    reports->resize(sorted.size());
  }
  auto train_one = [&](size_t m) {
    TrainConfig expert_cfg = cfg;
    expert_cfg.seed = cfg.seed + static_cast<uint64_t>(m);
    trained[m] = train_expert(docs, encoder_cfg, sorted[m], expert_cfg, loss_cfg,
                              reports ? &(*reports)[m] : nullptr);
  };

  const size_t workers = std::min<size_t>(static_cast<size_t>(cfg.max_concurrency), sorted.size());
  if (workers <= 1) {
    for (size_t m = 0; m < sorted.size(); ++m) train_one(m);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          size_t m = next.fetch_add(1);
          if (m >= sorted.size()) return;
          try {
            train_one(m);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExpertBundle bundle;
  bundle.encoder_cfg = encoder_cfg;
  bundle.taxonomy = loss_cfg.taxonomy;
  for (size_t m = 0; m < sorted.size(); ++m) {
    bundle.experts.emplace_back(sorted[m], std::move(trained[m]));
  }
  bundle.validate();
  return bundle;
}

size_t route(const ExpertBundle& bundle, int token_len) {
  if (token_len < 1) throw ConfigError("token_len must be >= 1");
  if (bundle.experts.empty()) throw ConfigError("bundle has no experts");
  const auto& ex = bundle.experts;

  if (bundle.routing.round_up_between) {
    for (size_t m = 0; m < ex.size(); ++m) {
      if (token_len <= ex[m].first.max_tokens) return m;
    }
    return ex.size() - 1;
  }

  size_t best = 0;
  long best_dist = std::labs(static_cast<long>(ex[0].first.max_tokens) - token_len);
  for (size_t m = 1; m < ex.size(); ++m) {
    long dist = std::labs(static_cast<long>(ex[m].first.max_tokens) - token_len);
    // <= so an exact tie moves to the longer spec (specs ascend)
    if (dist <= best_dist) {
      best = m;
      best_dist = dist;
    }
  }
  return best;
}

std::vector<double> predict(const ExpertBundle& bundle, const std::string& text, PredictMode mode) {
  if (bundle.experts.empty()) throw ConfigError("bundle has no experts");
  const size_t len = token_length(text);
  if (len == 0) throw DataError("cannot predict on empty text");

  if (mode == PredictMode::routed) {
    size_t m = route(bundle, static_cast<int>(len));
    const auto& [spec, params] = bundle.experts[m];
    FeatureVector feat = encode(bundle.encoder_cfg, text, static_cast<size_t>(spec.max_tokens));
    return softmax(forward(params, feat));
  }

  const size_t M = bundle.experts.size();
  const size_t C = bundle.experts[0].second.C;
  std::vector<double> acc(C, 0.0);
  for (const auto& [spec, params] : bundle.experts) {
    FeatureVector feat = encode(bundle.encoder_cfg, text, static_cast<size_t>(spec.max_tokens));
    std::vector<double> z = forward(params, feat);
    if (bundle.ensemble_average_logits) {
      for (size_t c = 0; c < C; ++c) acc[c] += z[c];
    } else {
      std::vector<double> p = softmax(z);
      for (size_t c = 0; c < C; ++c) acc[c] += p[c];
    }
  }
  for (double& v : acc) v /= static_cast<double>(M);
  if (bundle.ensemble_average_logits) return softmax(acc);
  return acc;
}

std::vector<double> aggregate_coarse(const Taxonomy& taxonomy,
                                     const std::vector<double>& fine_probs) {
  if (static_cast<int>(fine_probs.size()) != taxonomy.num_fine()) {
    throw ConfigError("fine_probs length does not match the taxonomy");
  }
  std::vector<std::string> coarse = taxonomy.coarse_classes();
  std::vector<double> scores(coarse.size(), 0.0);
  for (size_t i = 0; i < fine_probs.size(); ++i) {
    const std::string& cname = taxonomy.coarse_map.at(taxonomy.fine_classes[i]);
    auto it = std::find(coarse.begin(), coarse.end(), cname);
    size_t ci = static_cast<size_t>(it - coarse.begin());
    scores[ci] = std::max(scores[ci], fine_probs[i]);
  }
  return scores;
}

StagedModel naive_coarse_to_fine_train(const std::vector<Document>& docs,
                                       const EncoderConfig& encoder_cfg, const TrainConfig& cfg,
                                       int max_tokens,
                                       std::vector<std::pair<std::string, TrainReport>>* reports) {
  encoder_cfg.validate();
  cfg.validate();
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");

  StagedModel staged;
  staged.encoder_cfg = encoder_cfg;
  staged.taxonomy = Taxonomy::default_taxonomy();
  staged.max_tokens = max_tokens;

  const Taxonomy& tax = staged.taxonomy;
  std::vector<std::string> coarse = tax.coarse_classes();

  auto flat_taxonomy = [](const std::vector<std::string>& classes) {
    Taxonomy t;
    t.fine_classes = classes;
    for (const auto& c : classes) t.coarse_map[c] = c;
    return t;
  };

  // 4-way coarse head over all training docs.
  {
    std::vector<HeadSample> samples;
    for (const auto& doc : docs) {
      if (doc.split != "train") continue;
      const std::string fine(to_string(doc.label));
      const std::string& cname = tax.coarse_map.at(fine);
      auto it = std::find(coarse.begin(), coarse.end(), cname);
      samples.push_back({&doc, static_cast<int>(it - coarse.begin())});
    }
    TrainReport rep;
    staged.coarse = train_head(samples, encoder_cfg, max_tokens, static_cast<int>(coarse.size()),
                               cfg, flat_taxonomy(coarse), 0.0,
                               derive_seed(cfg.seed, "staged:coarse"), &rep);
    if (reports) reports->emplace_back("coarse", std::move(rep));
  }

  // One conditional head per coarse class with two or more fine members.
  for (const auto& cname : coarse) {
    std::vector<std::string> members;
    for (const auto& fine : tax.fine_classes) {
      if (tax.coarse_map.at(fine) == cname) members.push_back(fine);
    }
    if (members.size() < 2) continue;

    std::vector<HeadSample> samples;
    for (const auto& doc : docs) {
      if (doc.split != "train") continue;
      const std::string fine(to_string(doc.label));
      auto it = std::find(members.begin(), members.end(), fine);
      if (it == members.end()) continue;
      samples.push_back({&doc, static_cast<int>(it - members.begin())});
    }
    TrainReport rep;
    MlpParams head = train_head(samples, encoder_cfg, max_tokens, static_cast<int>(members.size()),
                                cfg, flat_taxonomy(members), 0.0,
                                derive_seed(cfg.seed, "staged:" + cname), &rep);
    if (reports) reports->emplace_back("sub:" + cname, std::move(rep));
    staged.heads.emplace_back(cname, std::move(head));
  }
  return staged;
}

std::vector<double> naive_coarse_to_fine_predict(const StagedModel& staged,
                                                 const std::string& text) {
  if (token_length(text) == 0) throw DataError("cannot predict on empty text");

  const Taxonomy& tax = staged.taxonomy;
  std::vector<std::string> coarse = tax.coarse_classes();
  FeatureVector feat = encode(staged.encoder_cfg, text, static_cast<size_t>(staged.max_tokens));
  std::vector<double> p_coarse = softmax(forward(staged.coarse, feat));

  std::vector<double> fine(tax.fine_classes.size(), 0.0);
  for (size_t ci = 0; ci < coarse.size(); ++ci) {
    std::vector<size_t> members;
    for (size_t i = 0; i < tax.fine_classes.size(); ++i) {
      if (tax.coarse_map.at(tax.fine_classes[i]) == coarse[ci]) members.push_back(i);
    }
    if (members.size() == 1) {
      fine[members[0]] = p_coarse[ci];
      continue;
    }
    auto it = std::find_if(staged.heads.begin(), staged.heads.end(),
                           [&](const auto& h) { return h.first == coarse[ci]; });
    if (it == staged.heads.end()) {
      throw DataError("staged model is missing the sub-classifier for " + coarse[ci]);
    }
    std::vector<double> p_sub = softmax(forward(it->second, feat));
    for (size_t k = 0; k < members.size(); ++k) fine[members[k]] = p_coarse[ci] * p_sub[k];
  }
  return fine;
}

}  // namespace fgmgt
