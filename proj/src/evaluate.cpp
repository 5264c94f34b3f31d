#include "fgmgt/evaluate.hpp"

#include <algorithm>
#include <cstdio>

#include "fgmgt/errors.hpp"

namespace fgmgt {

namespace {

ScoredExample scored_skeleton(const Document& doc, const Taxonomy& taxonomy,
                              const std::string& text) {
  if (taxonomy.fine_index(to_string(doc.label)) < 0) {
    throw DataError("document \"" + doc.id + "\" has label " +
                    std::string(to_string(doc.label)) + " absent from the model taxonomy");
  }
  ScoredExample ex;
  ex.doc_id = doc.id;
  ex.true_label = doc.label;
  ex.generator_id = doc.generator_id;
  ex.token_len = token_length(text);
  if (doc.meta.is_object() && doc.meta.contains("bleu_roundtrip") &&
      doc.meta.at("bleu_roundtrip").is_number()) {
    ex.bleu_roundtrip = doc.meta.at("bleu_roundtrip").get<double>();
  }
  return ex;
}

}  // namespace

std::vector<ScoredExample> score_documents(const ExpertBundle& bundle,
                                           const std::vector<Document>& docs, int max_tokens,
                                           PredictMode mode) {
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  std::vector<ScoredExample> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    std::string text = truncate_to_tokens(doc.text, static_cast<size_t>(max_tokens));
    ScoredExample ex = scored_skeleton(doc, bundle.taxonomy, text);
    ex.fine_probs = predict(bundle, text, mode);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ScoredExample> score_documents(const StagedModel& staged,
                                           const std::vector<Document>& docs, int max_tokens) {
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  StagedModel at_length = staged;
  at_length.max_tokens = max_tokens;
  std::vector<ScoredExample> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    std::string text = truncate_to_tokens(doc.text, static_cast<size_t>(max_tokens));
    ScoredExample ex = scored_skeleton(doc, staged.taxonomy, text);
    ex.fine_probs = naive_coarse_to_fine_predict(at_length, text);
    out.push_back(std::move(ex));
  }
  return out;
}

CoarseReport coarse_report(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy) {
  if (examples.empty()) throw DataError("no examples to evaluate");
  std::vector<std::string> coarse_names = taxonomy.coarse_classes();

  std::vector<std::vector<double>> scores;
  std::vector<int> labels;
  scores.reserve(examples.size());
  labels.reserve(examples.size());
  for (const auto& ex : examples) {
    ex.validate(taxonomy.num_fine());
    scores.push_back(aggregate_coarse(taxonomy, ex.fine_probs));
    const std::string& cname =
        taxonomy.coarse_map.at(std::string(to_string(ex.true_label)));
    auto it = std::find(coarse_names.begin(), coarse_names.end(), cname);
    labels.push_back(static_cast<int>(it - coarse_names.begin()));
  }

  CoarseReport report;
  report.map = map_score_indexed(scores, labels, coarse_names);
  report.f1 = macro_f1_indexed(scores, labels, coarse_names);
  report.confusion = confusion_indexed(scores, labels, coarse_names);
  return report;
}

nlohmann::json coarse_report_to_json(const CoarseReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [name, ap] : report.map.per_class_ap) per_class[name] = ap;
  nlohmann::json f1 = nlohmann::json::object();
  for (const auto& [name, v] : report.f1.per_class_f1) f1[name] = v;
  return nlohmann::json{
      {"map", report.map.map},
      {"per_class_ap", per_class},
      {"skipped_classes", report.map.skipped_classes},
      {"macro_f1", report.f1.macro_f1},
      {"per_class_f1", f1},
      {"classes", report.confusion.classes},
      {"confusion", report.confusion.counts},
  };
}

void GridEvalOptions::validate() const {
  if (lengths.empty()) throw ConfigError("evaluation length grid is empty");
  for (int len : lengths) {
    if (len < 1) throw ConfigError("evaluation lengths must be >= 1");
  }
  if (!routed && !ensemble) throw ConfigError("at least one prediction mode must be enabled");
  if (!(fpr_budget > 0 && fpr_budget < 1)) throw ConfigError("fpr_budget must be in (0, 1)");
  if (!split.empty() && split != "train" && split != "val" && split != "test") {
    throw ConfigError("split must be train, val, test or empty");
  }
}

GridEvalResult evaluate_grid(const ExpertBundle& bundle, const std::vector<Document>& docs,
                             const GridEvalOptions& options) {
  options.validate();
  bundle.validate();

  std::vector<Document> subset;
  for (const auto& doc : docs) {
    if (options.split.empty() || doc.split == options.split) subset.push_back(doc);
  }
  if (subset.empty()) {
    throw DataError(options.split.empty() ? "dataset is empty"
                                          : "dataset has no \"" + options.split + "\" documents");
  }

  std::vector<int> grid = options.lengths;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  GridEvalResult result;
  for (int len : grid) {
    LengthEval entry;
    entry.max_tokens = len;
    auto eval_mode = [&](PredictMode mode) {
      ModeEval me;
      auto examples = score_documents(bundle, subset, len, mode);
      me.report = evaluate_examples(examples, bundle.taxonomy, options.fpr_budget);
      if (options.coarse) me.coarse = coarse_report(examples, bundle.taxonomy);
      return me;
    };
    if (options.routed) entry.routed = eval_mode(PredictMode::routed);
    if (options.ensemble) entry.ensemble = eval_mode(PredictMode::ensemble);
    result.lengths.push_back(std::move(entry));
  }
  return result;
}

nlohmann::json grid_eval_to_json(const GridEvalResult& result) {
  nlohmann::json lengths = nlohmann::json::array();
  for (const auto& entry : result.lengths) {
    nlohmann::json ej{{"max_tokens", entry.max_tokens}};
    auto put = [&](const char* key, const std::optional<ModeEval>& me) {
      if (!me.has_value()) return;
      nlohmann::json mj{{"report", report_to_json(me->report)}};
      if (me->coarse.has_value()) mj["coarse"] = coarse_report_to_json(*me->coarse);
      ej[key] = std::move(mj);
    };
    put("routed", entry.routed);
    put("ensemble", entry.ensemble);
    lengths.push_back(std::move(ej));
  }
  return nlohmann::json{{"lengths", lengths}};
}

std::string render_grid_eval(const GridEvalResult& result) {
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const auto& entry : result.lengths) {
    if (entry.routed.has_value()) {
      rows.emplace_back("L=" + std::to_string(entry.max_tokens) + " routed",
                        entry.routed->report);
    }
    if (entry.ensemble.has_value()) {
      rows.emplace_back("L=" + std::to_string(entry.max_tokens) + " ensemble",
                        entry.ensemble->report);
    }
  }
  std::string out = render_table(rows);

  // Coarse blocks, when requested, follow the main table.
  for (const auto& entry : result.lengths) {
    auto add = [&](const char* mode, const std::optional<ModeEval>& me) {
      if (!me.has_value() || !me->coarse.has_value()) return;
      const CoarseReport& cr = *me->coarse;
      char line[160];
      std::snprintf(line, sizeof(line), "coarse L=%d %s: mAP %.2f macro-F1 %.2f |",
                    entry.max_tokens, mode, cr.map.map * 100.0, cr.f1.macro_f1 * 100.0);
      out += line;
      for (const auto& name : cr.confusion.classes) {
        auto it = cr.map.per_class_ap.find(name);
        std::snprintf(line, sizeof(line), " %s %.2f", name.c_str(),
                      it == cr.map.per_class_ap.end() ? 0.0 : it->second * 100.0);
        out += line;
      }
      out += "\n";
    };
    add("routed", entry.routed);
    add("ensemble", entry.ensemble);
  }
  return out;
}

}  // namespace fgmgt
