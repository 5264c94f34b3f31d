#include "fgmgt/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fgmgt/ablation.hpp"
#include "fgmgt/bundle.hpp"
#include "fgmgt/corpus.hpp"
#include "fgmgt/datagen.hpp"
#include "fgmgt/errors.hpp"
#include "fgmgt/evaluate.hpp"
#include "fgmgt/experts.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {
namespace {

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("failed while writing " + path);
}

nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  return j;
}

// Ties each command flag to a config-file key of the same name. After
// parsing, resolve() folds in file values wherever the flag was not given on
// the command line (precedence: flags > file > defaults), rejects unknown
// keys, and returns the fully resolved configuration for hashing.
class CommandConfig {
 public:
  explicit CommandConfig(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", config_path_,
                    "JSON config file; explicit flags override its values");
  }

  template <typename T>
  CLI::Option* option(const std::string& name, T& target, const std::string& help) {
    CLI::Option* opt = cmd_->add_option("--" + name, target, help);
    register_key(name, opt, &target);
    return opt;
  }

  template <typename T>
  CLI::Option* flag(const std::string& name, T& target, const std::string& help) {
    CLI::Option* opt = cmd_->add_flag("--" + name, target, help);
    register_key(name, opt, &target);
    return opt;
  }

  nlohmann::json resolve(const std::string& command_name) {
    if (!config_path_.empty()) {
      nlohmann::json file = load_config_json(config_path_);
      for (auto it = file.begin(); it != file.end(); ++it) {
        auto entry = entries_.find(it.key());
        if (entry == entries_.end()) {
          throw ConfigError("unknown config key \"" + it.key() + "\" in " + config_path_);
        }
        if (entry->second.opt->count() > 0) continue;
        try {
          entry->second.set(it.value());
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("config key \"" + it.key() + "\" in " + config_path_ +
                            " has the wrong type");
        }
      }
    }
    nlohmann::json resolved = nlohmann::json::object();
    resolved["command"] = command_name;
    for (const auto& [name, entry] : entries_) resolved[name] = entry.get();
    return resolved;
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(const nlohmann::json&)> set;
    std::function<nlohmann::json()> get;
  };

  template <typename T>
  void register_key(const std::string& name, CLI::Option* opt, T* target) {
    entries_[name] = Entry{opt, [target](const nlohmann::json& j) { *target = j.get<T>(); },
                           [target]() { return nlohmann::json(*target); }};
  }

  CLI::App* cmd_;
  std::string config_path_;
  std::map<std::string, Entry> entries_;
};

std::string config_hash(const nlohmann::json& resolved) { return hex16(fnv1a64(resolved.dump())); }

const std::map<std::string, std::string>& language_codes() {
  static const std::map<std::string, std::string> codes = {
      {"zh", "Chinese"}, {"es", "Spanish"}, {"fr", "French"}, {"ru", "Russian"}};
  return codes;
}

// Maps language codes to the full names the generation pipeline uses,
// deduplicating while keeping the caller's order.
std::vector<std::string> resolve_languages(const std::vector<std::string>& raw) {
  std::vector<std::string> full;
  for (const auto& code : raw) {
    auto it = language_codes().find(code);
    if (it == language_codes().end()) {
      std::string known;
      for (const auto& [c, _] : language_codes()) {
        if (!known.empty()) known += ", ";
        known += c;
      }
      throw ConfigError("unknown language code \"" + code + "\"; known codes: " + known);
    }
    if (std::find(full.begin(), full.end(), it->second) == full.end()) full.push_back(it->second);
  }
  if (full.empty()) throw ConfigError("at least one language is required");
  return full;
}

// ---------------------------------------------------------------------------
// generate

struct GenArgs {
  std::string out;
  bool synthetic = false;
  uint64_t seed = 42;
  int per_class = 100;
  int min_sentences = 4;
  int max_sentences = 12;
  int vocab_size = 500;
  double confusability = 0.1;
  std::vector<std::string> languages = {"zh", "es", "fr", "ru"};
  std::string human_seed;
  std::string base_url;
  std::string model;
  double temperature = 0.6;
  int max_retries = 3;
  double timeout = 30.0;
  std::string api_key_env = "FGMGT_API_KEY";
  double retry_backoff = 0.25;
  double failure_budget = 0.10;
  int concurrency = 1;
  double paraphrase_extent = 1.0;
  std::string log;
};

int cmd_generate(const GenArgs& a, const std::string& hash) {
  if (a.out.empty()) throw ConfigError("generate needs --out");
  std::vector<std::string> langs = resolve_languages(a.languages);

  std::vector<Document> docs;
  std::vector<BuildFailure> failures;
  size_t requests_attempted = 0;

  if (a.synthetic) {
    SyntheticConfig sc;
    sc.seed = a.seed;
    sc.docs_per_class = a.per_class;
    sc.min_sentences = a.min_sentences;
    sc.max_sentences = a.max_sentences;
    sc.vocab_size = a.vocab_size;
    sc.confusability = a.confusability;
    docs = synth_corpus(sc);
    // Translated classes outside the requested languages are dropped; every
    // other class always ships.
    docs.erase(std::remove_if(docs.begin(), docs.end(),
                              [&](const Document& d) {
                                if (!is_translated(d.label)) return false;
                                std::string lang(source_language_for(d.label));
                                return std::find(langs.begin(), langs.end(), lang) == langs.end();
                              }),
               docs.end());
  } else {
    if (a.base_url.empty() || a.model.empty()) {
      throw ConfigError("no endpoint configured: pass --base-url and --model, or --synthetic");
    }
    if (a.human_seed.empty()) {
      throw ConfigError("endpoint generation needs --human-seed (JSONL of human documents)");
    }
    ChatEndpointConfig cfg;
    cfg.base_url = a.base_url;
    cfg.model_name = a.model;
    cfg.temperature = a.temperature;
    cfg.max_retries = a.max_retries;
    cfg.timeout_seconds = a.timeout;
    cfg.api_key_env = a.api_key_env;
    cfg.retry_backoff_seconds = a.retry_backoff;
    cfg.validate();

    std::vector<Document> humans = read_jsonl(a.human_seed);
    BuildOptions opts;
    opts.failure_budget = a.failure_budget;
    opts.max_concurrency = a.concurrency;
    opts.paraphrase_extent = a.paraphrase_extent;
    BuildResult result = build_corpus(cfg, humans, langs, a.seed, opts);
    docs = std::move(result.documents);
    failures = std::move(result.failures);
    requests_attempted = result.requests_attempted;
  }

  write_jsonl(docs, a.out);

  std::map<std::string, size_t> by_class;
  for (const auto& d : docs) ++by_class[std::string(to_string(d.label))];

  std::ostringstream log;
  log << "command generate\n";
  log << "config_hash " << hash << "\n";
  log << "documents " << docs.size() << "\n";
  for (const auto& [name, n] : by_class) log << "count " << name << " " << n << "\n";
  if (!a.synthetic) log << "requests_attempted " << requests_attempted << "\n";
  log << "failures " << failures.size() << "\n";
  for (const auto& f : failures) {
    log << "failure " << f.doc_id << " " << f.category << " " << f.error << "\n";
  }
  write_text_file(a.log.empty() ? a.out + ".log" : a.log, log.str());

  std::cout << "config_hash " << hash << "\n";
  std::cout << "wrote " << docs.size() << " documents to " << a.out << "\n";
  if (!failures.empty()) std::cout << failures.size() << " failed documents (see log)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  uint64_t seed = 0;
  int epochs = 3;
  int batch_size = 32;
  double lr = 1e-3;
  int hidden = 256;
  int encoder_dim = 65536;
  double lambda = 0.01;
  bool no_guidance = false;
  double p_crop = 0.3;
  std::vector<int> crop_lengths = {32, 50, 128, 256, 500};
  bool no_crop = false;
  std::vector<int> experts = {128, 256, 512};
  int single_expert = 0;
  bool staged = false;
  bool round_up_routing = false;
  bool ensemble_logits = false;
  int max_concurrency = 1;
};

void print_epochs(const std::string& label, const TrainReport& rep) {
  char buf[160];
  for (size_t e = 0; e < rep.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%s  epoch %zu  loss %.6f  ce %.6f  gh %.6f  trans %.6f\n",
                  label.c_str(), e + 1, rep.epoch_loss[e], rep.epoch_ce[e], rep.epoch_gh[e],
                  rep.epoch_trans[e]);
    std::cout << buf;
  }
}

int cmd_train(const TrainArgs& a, const std::string& hash) {
  if (a.data.empty()) throw ConfigError("train needs --data");
  if (a.out.empty()) throw ConfigError("train needs --out");

  std::vector<Document> docs = read_jsonl(a.data);
  std::string digest = dataset_digest(docs);

  EncoderConfig enc;
  enc.dim = static_cast<uint32_t>(a.encoder_dim);

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.lr = a.lr;
  cfg.hidden = a.hidden;
  cfg.p_crop = a.no_crop ? 0.0 : a.p_crop;
  cfg.crop_lengths = a.crop_lengths;
  cfg.seed = a.seed;
  cfg.max_concurrency = a.max_concurrency;

  LossConfig loss_cfg;
  loss_cfg.lambda = a.no_guidance ? 0.0 : a.lambda;

  BundleProvenance prov;
  prov.seed = a.seed;
  prov.epochs = a.epochs;
  prov.dataset_hash = digest;

  std::cout << "config_hash " << hash << "\n";
  std::cout << "dataset " << a.data << "  documents " << docs.size() << "  digest " << digest
            << "\n";

  if (a.staged) {
    int max_tokens = a.single_expert > 0 ? a.single_expert : 512;
    std::vector<std::pair<std::string, TrainReport>> reports;
    StagedModel staged = naive_coarse_to_fine_train(docs, enc, cfg, max_tokens, &reports);
    for (const auto& [name, rep] : reports) print_epochs("head " + name, rep);
    // The staged baseline trains plain cross-entropy heads, so the recorded
    // guidance weight is always zero.
    save_staged(staged, a.out, 0.0, prov);
  } else {
    std::vector<ExpertSpec> specs;
    if (a.single_expert > 0) {
      specs.push_back({a.single_expert});
    } else {
      for (int len : a.experts) specs.push_back({len});
    }
    std::vector<TrainReport> reports;
    ExpertBundle bundle = train_bundle(docs, enc, specs, cfg, loss_cfg, &reports);
    bundle.routing.round_up_between = a.round_up_routing;
    bundle.ensemble_average_logits = a.ensemble_logits;
    for (size_t m = 0; m < bundle.experts.size(); ++m) {
      print_epochs("expert L=" + std::to_string(bundle.experts[m].first.max_tokens), reports[m]);
    }
    save_bundle(bundle, a.out, loss_cfg.lambda, prov);
  }
  std::cout << "wrote bundle to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string bundle;
  std::string data;
  std::vector<int> lengths = {32, 50, 128, 256, 500, 512};
  std::string mode = "both";
  bool coarse = false;
  bool by_generator = false;
  bool bleu_bins = false;
  double fpr = 0.05;
  std::string split = "test";
  std::string out;
};

void append_report_details(std::string& text, const std::string& label, const EvalReport& report,
                           const EvalArgs& a) {
  char buf[64];
  if (a.by_generator) {
    text += "by-generator mAP " + label + ":";
    for (const auto& [gen, ap] : report.by_generator.per_generator) {
      std::snprintf(buf, sizeof(buf), " %s %.2f", gen.c_str(), 100.0 * ap);
      text += buf;
    }
    std::snprintf(buf, sizeof(buf), "  avg %.2f\n", 100.0 * report.by_generator.avg);
    text += buf;
  }
  if (a.bleu_bins) {
    text += "bleu bins " + label + ":";
    if (report.bleu_bins.has_value()) {
      for (const auto& [bin, rep] : *report.bleu_bins) {
        std::snprintf(buf, sizeof(buf), " %s %.2f", bin.c_str(), 100.0 * rep.eval.map);
        text += buf;
      }
      text += "\n";
    } else {
      text += " unavailable (needs >= 3 translated documents with round-trip scores)\n";
    }
  }
}

int cmd_eval(const EvalArgs& a, const std::string& hash) {
  if (a.bundle.empty()) throw ConfigError("eval needs --bundle");
  if (a.data.empty()) throw ConfigError("eval needs --data");
  if (a.mode != "both" && a.mode != "routed" && a.mode != "ensemble") {
    throw ConfigError("--mode must be routed, ensemble, or both");
  }
  if (a.split != "train" && a.split != "val" && a.split != "test" && a.split != "all") {
    throw ConfigError("--split must be train, val, test, or all");
  }

  std::vector<Document> docs = read_jsonl(a.data);

  GridEvalOptions options;
  options.lengths = a.lengths;
  options.routed = a.mode != "ensemble";
  options.ensemble = a.mode != "routed";
  options.coarse = a.coarse;
  options.fpr_budget = a.fpr;
  options.split = a.split == "all" ? "" : a.split;

  const std::string kind = saved_model_kind(a.bundle);
  nlohmann::json grid_json;
  std::string table;
  std::string details;

  if (kind == "experts") {
    ExpertBundle bundle = load_bundle(a.bundle);
    GridEvalResult result = evaluate_grid(bundle, docs, options);
    grid_json = grid_eval_to_json(result);
    table = render_grid_eval(result);
    for (const auto& le : result.lengths) {
      std::string l = "L=" + std::to_string(le.max_tokens);
      if (le.routed) append_report_details(details, l + " routed", le.routed->report, a);
      if (le.ensemble) append_report_details(details, l + " ensemble", le.ensemble->report, a);
    }
  } else {
    // Staged models have a single prediction path, so the mode flags do not
    // apply; each grid length gets one row.
    options.validate();
    StagedModel staged = load_staged(a.bundle);

    std::vector<Document> subset;
    for (const auto& d : docs) {
      if (options.split.empty() || d.split == options.split) subset.push_back(d);
    }
    if (subset.empty()) {
      throw DataError("no documents in split \"" + options.split + "\"");
    }
    std::vector<int> grid = options.lengths;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<std::pair<std::string, EvalReport>> rows;
    grid_json = nlohmann::json::object();
    grid_json["lengths"] = nlohmann::json::array();
    for (int len : grid) {
      std::vector<ScoredExample> examples = score_documents(staged, subset, len);
      EvalReport report = evaluate_examples(examples, staged.taxonomy, options.fpr_budget);
      std::string label = "L=" + std::to_string(len);
      nlohmann::json entry;
      entry["max_tokens"] = len;
      entry["staged"]["report"] = report_to_json(report);
      if (options.coarse) {
        entry["staged"]["coarse"] = coarse_report_to_json(coarse_report(examples, staged.taxonomy));
      }
      grid_json["lengths"].push_back(std::move(entry));
      append_report_details(details, label, report, a);
      rows.emplace_back(std::move(label), std::move(report));
    }
    table = render_table(rows);
  }

  std::string text = "config_hash " + hash + "\nmodel " + a.bundle + " (" + kind + ")\ndataset " +
                     a.data + "\n\n" + table;
  if (!details.empty()) text += "\n" + details;
  std::cout << text;

  if (!a.out.empty()) {
    nlohmann::json envelope;
    envelope["command"] = "eval";
    envelope["config_hash"] = hash;
    envelope["model"] = a.bundle;
    envelope["model_kind"] = kind;
    envelope["dataset"] = a.data;
    envelope["grid"] = std::move(grid_json);
    write_text_file(a.out + ".json", envelope.dump(2) + "\n");
    write_text_file(a.out + ".txt", text);
    std::cout << "wrote " << a.out << ".json and " << a.out << ".txt\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string bundle;
  std::string text;
  std::string file;
  std::string mode = "routed";
  bool json_out = false;
};

int cmd_predict(const PredictArgs& a, const std::string& hash) {
  if (a.bundle.empty()) throw ConfigError("predict needs --bundle");
  if (!a.text.empty() && !a.file.empty()) {
    throw ConfigError("pass --text or --file, not both");
  }

  std::string input = a.text;
  if (!a.file.empty()) {
    if (a.file == "-") {
      std::ostringstream buffer;
      buffer << std::cin.rdbuf();
      input = buffer.str();
    } else {
      std::ifstream in(a.file, std::ios::binary);
      if (!in) throw DataError("cannot read " + a.file);
      std::ostringstream buffer;
      buffer << in.rdbuf();
      input = buffer.str();
    }
  }
  if (token_length(input) == 0) {
    throw ConfigError("input text is empty: pass --text or --file with content");
  }
  if (a.mode != "routed" && a.mode != "ensemble") {
    throw ConfigError("--mode must be routed or ensemble");
  }

  const std::string kind = saved_model_kind(a.bundle);
  Taxonomy taxonomy;
  std::vector<double> fine;
  if (kind == "experts") {
    ExpertBundle bundle = load_bundle(a.bundle);
    taxonomy = bundle.taxonomy;
    fine = predict(bundle, input,
                   a.mode == "routed" ? PredictMode::routed : PredictMode::ensemble);
  } else {
    StagedModel staged = load_staged(a.bundle);
    taxonomy = staged.taxonomy;
    fine = naive_coarse_to_fine_predict(staged, input);
  }
  std::vector<double> coarse = aggregate_coarse(taxonomy, fine);
  std::vector<std::string> coarse_names = taxonomy.coarse_classes();

  if (a.json_out) {
    nlohmann::json j;
    j["config_hash"] = hash;
    j["model_kind"] = kind;
    j["mode"] = kind == "staged" ? "staged" : a.mode;
    nlohmann::json fine_obj = nlohmann::json::object();
    for (size_t i = 0; i < fine.size(); ++i) fine_obj[taxonomy.fine_classes[i]] = fine[i];
    nlohmann::json coarse_obj = nlohmann::json::object();
    for (size_t i = 0; i < coarse.size(); ++i) coarse_obj[coarse_names[i]] = coarse[i];
    j["fine_probs"] = std::move(fine_obj);
    j["coarse_scores"] = std::move(coarse_obj);
    std::cout << j.dump(2) << "\n";
  } else {
    char buf[96];
    std::cout << "fine probabilities:\n";
    for (size_t i = 0; i < fine.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "  %-14s %.6f\n", taxonomy.fine_classes[i].c_str(), fine[i]);
      std::cout << buf;
    }
    std::cout << "coarse scores:\n";
    for (size_t i = 0; i < coarse.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "  %-14s %.6f\n", coarse_names[i].c_str(), coarse[i]);
      std::cout << buf;
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"fine-grained detection of machine-generated text"};
  app.name("fgmgt");
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand("generate", "Write a corpus JSONL, synthetic or endpoint-built");
  GenArgs g;
  CommandConfig gen_cfg(gen);
  gen_cfg.option("out", g.out, "output JSONL path");
  gen_cfg.flag("synthetic", g.synthetic, "build the seeded offline corpus instead of calling an endpoint");
  gen_cfg.option("seed", g.seed, "generation seed");
  gen_cfg.option("per-class", g.per_class, "documents per fine class (synthetic)");
  gen_cfg.option("min-sentences", g.min_sentences, "minimum sentences per document (synthetic)");
  gen_cfg.option("max-sentences", g.max_sentences, "maximum sentences per document (synthetic)");
  gen_cfg.option("vocab-size", g.vocab_size, "vocabulary size per class profile (synthetic)");
  gen_cfg.option("confusability", g.confusability, "blend of guidance-group profiles toward a shared base (synthetic)");
  gen_cfg.option("languages", g.languages, "translated classes to emit (codes: zh,es,fr,ru)")->delimiter(',');
  gen_cfg.option("human-seed", g.human_seed, "JSONL of human documents to expand (endpoint)");
  gen_cfg.option("base-url", g.base_url, "chat endpoint base URL");
  gen_cfg.option("model", g.model, "generator model name");
  gen_cfg.option("temperature", g.temperature, "sampling temperature");
  gen_cfg.option("max-retries", g.max_retries, "retries per request on transient failures");
  gen_cfg.option("timeout", g.timeout, "request timeout in seconds");
  gen_cfg.option("api-key-env", g.api_key_env, "environment variable holding the bearer token; empty disables auth");
  gen_cfg.option("retry-backoff", g.retry_backoff, "base retry backoff in seconds");
  gen_cfg.option("failure-budget", g.failure_budget, "abort when more than this fraction of documents fail");
  gen_cfg.option("concurrency", g.concurrency, "concurrent endpoint requests");
  gen_cfg.option("paraphrase-extent", g.paraphrase_extent, "fraction of sentences the paraphrase step rewrites");
  gen_cfg.option("log", g.log, "transcript path (default: <out>.log)");

  CLI::App* train = app.add_subcommand("train", "Train a model bundle from a corpus JSONL");
  TrainArgs t;
  CommandConfig train_cfg(train);
  train_cfg.option("data", t.data, "training corpus JSONL");
  train_cfg.option("out", t.out, "bundle output directory");
  train_cfg.option("seed", t.seed, "training seed");
  train_cfg.option("epochs", t.epochs, "epochs per expert");
  train_cfg.option("batch-size", t.batch_size, "minibatch size");
  train_cfg.option("lr", t.lr, "adam learning rate");
  train_cfg.option("hidden", t.hidden, "hidden width; 0 trains a linear head");
  train_cfg.option("encoder-dim", t.encoder_dim, "hashed feature dimension");
  train_cfg.option("lambda", t.lambda, "guidance loss weight");
  train_cfg.flag("no-guidance", t.no_guidance, "train with lambda = 0");
  train_cfg.option("p-crop", t.p_crop, "probability of cropping a training sample");
  train_cfg.option("crop-lengths", t.crop_lengths, "crop lengths sampled during training")->delimiter(',');
  train_cfg.flag("no-crop", t.no_crop, "disable crop augmentation");
  train_cfg.option("experts", t.experts, "expert context lengths")->delimiter(',');
  train_cfg.option("single-expert", t.single_expert, "train one expert at this length instead of --experts");
  train_cfg.flag("naive-coarse-to-fine", t.staged, "train the staged coarse-then-sub baseline");
  train_cfg.flag("round-up-routing", t.round_up_routing, "route to the first expert at or above the input length");
  train_cfg.flag("ensemble-logits", t.ensemble_logits, "ensemble averages logits instead of probabilities");
  train_cfg.option("max-concurrency", t.max_concurrency, "experts trained in parallel");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a bundle over a length grid");
  EvalArgs e;
  CommandConfig eval_cfg(eval);
  eval_cfg.option("bundle", e.bundle, "bundle directory");
  eval_cfg.option("data", e.data, "evaluation corpus JSONL");
  eval_cfg.option("lengths", e.lengths, "token lengths to evaluate at")->delimiter(',');
  eval_cfg.option("mode", e.mode, "routed, ensemble, or both");
  eval_cfg.flag("coarse", e.coarse, "add four-class aggregation reports");
  eval_cfg.flag("by-generator", e.by_generator, "print per-generator mAP lines");
  eval_cfg.flag("bleu-bins", e.bleu_bins, "print round-trip BLEU tercile mAP lines");
  eval_cfg.option("fpr", e.fpr, "false positive budget for the detection rate");
  eval_cfg.option("split", e.split, "train, val, test, or all");
  eval_cfg.option("out", e.out, "report path prefix; writes <out>.json and <out>.txt");

  CLI::App* pred = app.add_subcommand("predict", "Score one text with a saved bundle");
  PredictArgs p;
  CommandConfig pred_cfg(pred);
  pred_cfg.option("bundle", p.bundle, "bundle directory");
  pred_cfg.option("text", p.text, "text to score");
  pred_cfg.option("file", p.file, "file to score; - reads stdin");
  pred_cfg.option("mode", p.mode, "routed or ensemble (expert bundles)");
  pred_cfg.flag("json", p.json_out, "machine-readable output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(g, config_hash(gen_cfg.resolve("generate")));
    if (train->parsed()) return cmd_train(t, config_hash(train_cfg.resolve("train")));
    if (eval->parsed()) return cmd_eval(e, config_hash(eval_cfg.resolve("eval")));
    if (pred->parsed()) return cmd_predict(p, config_hash(pred_cfg.resolve("predict")));
  } catch (const ConfigError& err) {
    std::cerr << "fgmgt: config error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "fgmgt: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "fgmgt: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fgmgt
