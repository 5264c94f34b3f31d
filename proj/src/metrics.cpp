#include "fgmgt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "fgmgt/errors.hpp"

namespace fgmgt {

namespace {

int argmax_lowest(const std::vector<double>& v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

std::vector<int> fine_labels(const std::vector<ScoredExample>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(static_cast<int>(e.true_label));
  return out;
}

std::vector<std::vector<double>> fine_probs(const std::vector<ScoredExample>& examples) {
  std::vector<std::vector<double>> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.fine_probs);
  return out;
}

}  // namespace

void ScoredExample::validate(size_t num_classes) const {
  if (doc_id.empty()) throw DataError("scored example has empty doc_id");
  if (fine_probs.size() != num_classes) {
    throw DataError("scored example \"" + doc_id + "\": expected " + std::to_string(num_classes) +
                    " probabilities, got " + std::to_string(fine_probs.size()));
  }
  double sum = 0;
  for (double p : fine_probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DataError("scored example \"" + doc_id + "\": probabilities must be finite and >= 0");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw DataError("scored example \"" + doc_id + "\": probabilities sum to " + std::to_string(sum));
  }
}

nlohmann::json ScoredExample::to_json() const {
  nlohmann::json j = {{"doc_id", doc_id},
                      {"true_label", std::string(to_string(true_label))},
                      {"fine_probs", fine_probs},
                      {"generator_id", generator_id},
                      {"token_len", token_len}};
  if (bleu_roundtrip.has_value()) j["bleu_roundtrip"] = *bleu_roundtrip;
  return j;
}

ScoredExample ScoredExample::from_json(const nlohmann::json& j) {
  ScoredExample e;
  e.doc_id = j.at("doc_id").get<std::string>();
  e.true_label = label_from_string(j.at("true_label").get<std::string>());
  e.fine_probs = j.at("fine_probs").get<std::vector<double>>();
  e.generator_id = j.at("generator_id").get<std::string>();
  e.token_len = j.at("token_len").get<int>();
  if (j.contains("bleu_roundtrip")) e.bleu_roundtrip = j.at("bleu_roundtrip").get<double>();
  return e;
}

double average_precision(const std::vector<std::pair<double, bool>>& scores) {
  size_t positives = 0;
  for (const auto& [s, pos] : scores) {
    if (pos) ++positives;
  }
  if (positives == 0) throw DataError("average_precision needs at least one positive");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a].first > scores[b].first; });

  double ap = 0;
  size_t tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (scores[order[rank]].second) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

MapResult map_score_indexed(const std::vector<std::vector<double>>& probs,
                            const std::vector<int>& labels,
                            const std::vector<std::string>& class_names) {
  if (probs.size() != labels.size()) throw DataError("probs/labels size mismatch");
  if (probs.empty()) throw DataError("map_score over empty example list");

  MapResult result;
  double sum = 0;
  size_t counted = 0;
  for (size_t c = 0; c < class_names.size(); ++c) {
    std::vector<std::pair<double, bool>> scores;
    scores.reserve(probs.size());
    bool any_positive = false;
    for (size_t i = 0; i < probs.size(); ++i) {
      bool pos = labels[i] == static_cast<int>(c);
      any_positive = any_positive || pos;
      scores.emplace_back(probs[i][c], pos);
    }
    if (!any_positive) {
      result.skipped_classes.push_back(class_names[c]);
      continue;
    }
    double ap = average_precision(scores);
    result.per_class_ap[class_names[c]] = ap;
    sum += ap;
    ++counted;
  }
  if (counted == 0) throw DataError("map_score: no class has a positive example");
  result.map = sum / static_cast<double>(counted);
  return result;
}

MapResult map_score(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy) {
  for (const auto& e : examples) e.validate(static_cast<size_t>(taxonomy.num_fine()));
  return map_score_indexed(fine_probs(examples), fine_labels(examples), taxonomy.fine_classes);
}

GeneratorMapResult per_generator_map(const std::vector<ScoredExample>& examples,
                                     const Taxonomy& taxonomy) {
  std::vector<ScoredExample> humans;
  std::map<std::string, std::vector<ScoredExample>> by_generator;
  for (const auto& e : examples) {
    if (e.true_label == CategoryLabel::human) humans.push_back(e);
    else by_generator[e.generator_id].push_back(e);
  }
  if (by_generator.empty()) throw DataError("per_generator_map: no machine examples");

  GeneratorMapResult result;
  double sum = 0;
  for (const auto& [gen, machine] : by_generator) {
    std::vector<ScoredExample> subset = machine;
    subset.insert(subset.end(), humans.begin(), humans.end());
    double m = map_score(subset, taxonomy).map;
    result.per_generator[gen] = m;
    sum += m;
  }
  result.avg = sum / static_cast<double>(result.per_generator.size());
  return result;
}

double pd_at_fpr(const std::vector<ScoredExample>& examples, double fpr_budget) {
  if (!(fpr_budget > 0.0) || !(fpr_budget < 1.0)) throw ConfigError("fpr budget must be in (0,1)");
  size_t n_pos = 0, n_neg = 0;
  std::vector<std::pair<double, bool>> scored;  // score = 1 - P(human), positive = machine
  scored.reserve(examples.size());
  for (const auto& e : examples) {
    bool machine = is_machine(e.true_label);
    if (machine) ++n_pos;
    else ++n_neg;
    scored.emplace_back(1.0 - e.fine_probs[0], machine);
  }
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("pd_at_fpr needs at least one human and one machine example");
  }

  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Thresholds can only sit at distinct-score boundaries: a tied block is
  // classified all-positive or all-negative together.
  double best = 0;  // the classify-none operating point (TPR 0, FPR 0)
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < scored.size()) {
    size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) {
      if (scored[j].second) ++tp;
      else ++fp;
      ++j;
    }
    double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    if (fpr <= fpr_budget) best = std::max(best, static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return best;
}

MacroF1Result macro_f1_indexed(const std::vector<std::vector<double>>& probs,
                               const std::vector<int>& labels,
                               const std::vector<std::string>& class_names) {
  if (probs.empty()) throw DataError("macro_f1 over empty example list");
  const size_t C = class_names.size();
  std::vector<int64_t> tp(C, 0), fp(C, 0), fn(C, 0), support(C, 0);
  for (size_t i = 0; i < probs.size(); ++i) {
    int pred = argmax_lowest(probs[i]);
    int truth = labels[i];
    ++support[static_cast<size_t>(truth)];
    if (pred == truth) {
      ++tp[static_cast<size_t>(truth)];
    } else {
      ++fp[static_cast<size_t>(pred)];
      ++fn[static_cast<size_t>(truth)];
    }
  }
  MacroF1Result result;
  double sum = 0;
  for (size_t c = 0; c < C; ++c) {
    double precision = tp[c] + fp[c] > 0 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
    double recall = tp[c] + fn[c] > 0 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
    double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    result.per_class_f1[class_names[c]] = f1;
    sum += f1;
    if (support[c] == 0 && tp[c] + fp[c] == 0) result.flagged_classes.push_back(class_names[c]);
  }
  result.macro_f1 = sum / static_cast<double>(C);
  return result;
}

MacroF1Result macro_f1(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy) {
  return macro_f1_indexed(fine_probs(examples), fine_labels(examples), taxonomy.fine_classes);
}

ConfusionMatrix confusion_indexed(const std::vector<std::vector<double>>& probs,
                                  const std::vector<int>& labels,
                                  const std::vector<std::string>& class_names) {
  const size_t C = class_names.size();
  ConfusionMatrix m;
  m.classes = class_names;
  m.counts.assign(C, std::vector<int64_t>(C, 0));
  for (size_t i = 0; i < probs.size(); ++i) {
    ++m.counts[static_cast<size_t>(labels[i])][static_cast<size_t>(argmax_lowest(probs[i]))];
  }
  m.row_normalized.assign(C, std::vector<double>(C, 0.0));
  for (size_t r = 0; r < C; ++r) {
    int64_t total = std::accumulate(m.counts[r].begin(), m.counts[r].end(), int64_t{0});
    if (total == 0) continue;
    for (size_t c = 0; c < C; ++c) {
      m.row_normalized[r][c] = static_cast<double>(m.counts[r][c]) / static_cast<double>(total);
    }
  }
  return m;
}

ConfusionMatrix confusion(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy) {
  return confusion_indexed(fine_probs(examples), fine_labels(examples), taxonomy.fine_classes);
}

namespace {

std::map<std::vector<std::string>, int64_t> ngram_counts(const std::vector<std::string>& tokens,
                                                         size_t n) {
  std::map<std::vector<std::string>, int64_t> counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                      tokens.begin() + static_cast<long>(i + n))];
  }
  return counts;
}

struct BleuStats {
  int64_t matched[4] = {0, 0, 0, 0};
  int64_t total[4] = {0, 0, 0, 0};
  int64_t cand_len = 0;
  int64_t ref_len = 0;
};

BleuStats bleu_stats(const std::string& candidate, const std::string& reference) {
  std::vector<std::string> cand = tokenize(candidate);
  std::vector<std::string> ref = tokenize(reference);
  if (ref.empty()) throw DataError("bleu reference must be non-empty");
  BleuStats s;
  s.cand_len = static_cast<int64_t>(cand.size());
  s.ref_len = static_cast<int64_t>(ref.size());
  for (size_t n = 1; n <= 4; ++n) {
    auto cand_counts = ngram_counts(cand, n);
    auto ref_counts = ngram_counts(ref, n);
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      int64_t clip = it == ref_counts.end() ? 0 : std::min(count, it->second);
      s.matched[n - 1] += clip;
      s.total[n - 1] += count;
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.cand_len == 0) return 0.0;
  constexpr double kEps = 1e-9;
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    double num = static_cast<double>(s.matched[n]);
    double den = static_cast<double>(s.total[n]);
    if (s.matched[n] == 0 && n > 0) {
      num += kEps;
      den += kEps;
    }
    if (num == 0.0) return 0.0;  // unigram miss: nothing shared at all
    log_sum += 0.25 * std::log(num / den);
  }
  double bp = s.cand_len < s.ref_len
                  ? std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.cand_len))
                  : 1.0;
  return bp * std::exp(log_sum);
}

}  // namespace

double bleu(const std::string& candidate, const std::string& reference) {
  BleuStats s = bleu_stats(candidate, reference);
  if (s.cand_len == 0) return 0.0;
  // Identity must come out exactly 1.0; the closed form already does
  // (all precisions 1, BP 1), so no special-casing is needed.
  return bleu_from_stats(s);
}

double bleu_corpus(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw DataError("bleu_corpus over empty list");
  BleuStats agg;
  for (const auto& [cand, ref] : pairs) {
    BleuStats s = bleu_stats(cand, ref);
    for (int n = 0; n < 4; ++n) {
      agg.matched[n] += s.matched[n];
      agg.total[n] += s.total[n];
    }
    agg.cand_len += s.cand_len;
    agg.ref_len += s.ref_len;
  }
  return bleu_from_stats(agg);
}

std::map<std::string, BinReport> bleu_bins(const std::vector<ScoredExample>& examples,
                                           const Taxonomy& taxonomy) {
  std::vector<const ScoredExample*> translated;
  std::vector<ScoredExample> rest;
  for (const auto& e : examples) {
    if (is_translated(e.true_label) && e.bleu_roundtrip.has_value()) translated.push_back(&e);
    else if (!is_translated(e.true_label)) rest.push_back(e);
  }
  if (translated.size() < 3) {
    throw DataError("bleu_bins needs at least 3 translated examples with round-trip BLEU values");
  }
  std::sort(translated.begin(), translated.end(), [](const ScoredExample* a, const ScoredExample* b) {
    if (*a->bleu_roundtrip != *b->bleu_roundtrip) return *a->bleu_roundtrip < *b->bleu_roundtrip;
    return a->doc_id < b->doc_id;
  });

  const size_t n = translated.size();
  const size_t cut1 = n / 3, cut2 = 2 * n / 3;
  std::map<std::string, BinReport> bins;
  const char* names[3] = {"low", "medium", "high"};
  size_t bounds[4] = {0, cut1, cut2, n};
  for (int b = 0; b < 3; ++b) {
    std::vector<ScoredExample> subset = rest;
    BinReport report;
    for (size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
      report.doc_ids.push_back(translated[i]->doc_id);
      subset.push_back(*translated[i]);
    }
    report.eval = map_score(subset, taxonomy);
    bins[names[b]] = std::move(report);
  }
  return bins;
}

EvalReport evaluate_examples(const std::vector<ScoredExample>& examples, const Taxonomy& taxonomy,
                             double fpr_budget) {
  if (examples.empty()) throw DataError("evaluate_examples over empty example list");
  for (const auto& e : examples) e.validate(static_cast<size_t>(taxonomy.num_fine()));

  EvalReport report;
  report.overall = map_score(examples, taxonomy);
  report.by_generator = per_generator_map(examples, taxonomy);
  report.pd_at_5fpr = pd_at_fpr(examples, fpr_budget);
  report.f1 = macro_f1(examples, taxonomy);
  report.confusion = confusion(examples, taxonomy);

  size_t translated_with_bleu = 0;
  for (const auto& e : examples) {
    if (is_translated(e.true_label) && e.bleu_roundtrip.has_value()) ++translated_with_bleu;
  }
  if (translated_with_bleu >= 3) report.bleu_bins = bleu_bins(examples, taxonomy);
  return report;
}

namespace {

nlohmann::json map_result_to_json(const MapResult& r) {
  return {{"per_class_ap", r.per_class_ap}, {"map", r.map}, {"skipped_classes", r.skipped_classes}};
}

MapResult map_result_from_json(const nlohmann::json& j) {
  MapResult r;
  r.per_class_ap = j.at("per_class_ap").get<std::map<std::string, double>>();
  r.map = j.at("map").get<double>();
  r.skipped_classes = j.at("skipped_classes").get<std::vector<std::string>>();
  return r;
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["overall"] = map_result_to_json(report.overall);
  j["per_generator_map"] = report.by_generator.per_generator;
  j["avg_map"] = report.by_generator.avg;
  j["pd_at_5fpr"] = report.pd_at_5fpr;
  j["pd_framing"] = "machine-vs-human, score = 1 - P(human)";
  j["macro_f1"] = report.f1.macro_f1;
  j["per_class_f1"] = report.f1.per_class_f1;
  j["flagged_classes"] = report.f1.flagged_classes;
  j["confusion"] = {{"classes", report.confusion.classes},
                    {"counts", report.confusion.counts},
                    {"row_normalized", report.confusion.row_normalized}};
  if (report.bleu_bins.has_value()) {
    nlohmann::json bins;
    for (const auto& [name, bin] : *report.bleu_bins) {
      bins[name] = {{"doc_ids", bin.doc_ids}, {"eval", map_result_to_json(bin.eval)}};
    }
    j["bleu_bins"] = bins;
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport report;
  report.overall = map_result_from_json(j.at("overall"));
  report.by_generator.per_generator = j.at("per_generator_map").get<std::map<std::string, double>>();
  report.by_generator.avg = j.at("avg_map").get<double>();
  report.pd_at_5fpr = j.at("pd_at_5fpr").get<double>();
  report.f1.macro_f1 = j.at("macro_f1").get<double>();
  report.f1.per_class_f1 = j.at("per_class_f1").get<std::map<std::string, double>>();
  report.f1.flagged_classes = j.at("flagged_classes").get<std::vector<std::string>>();
  report.confusion.classes = j.at("confusion").at("classes").get<std::vector<std::string>>();
  report.confusion.counts = j.at("confusion").at("counts").get<std::vector<std::vector<int64_t>>>();
  report.confusion.row_normalized =
      j.at("confusion").at("row_normalized").get<std::vector<std::vector<double>>>();
  if (j.contains("bleu_bins")) {
    std::map<std::string, BinReport> bins;
    for (const auto& [name, bj] : j.at("bleu_bins").items()) {
      BinReport bin;
      bin.doc_ids = bj.at("doc_ids").get<std::vector<std::string>>();
      bin.eval = map_result_from_json(bj.at("eval"));
      bins[name] = std::move(bin);
    }
    report.bleu_bins = std::move(bins);
  }
  return report;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

}  // namespace

std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::set<std::string> generators;
  for (const auto& [label, report] : rows) {
    for (const auto& [gen, v] : report.by_generator.per_generator) generators.insert(gen);
  }
  std::vector<std::string> columns(generators.begin(), generators.end());

  size_t label_width = 5;
  for (const auto& [label, report] : rows) label_width = std::max(label_width, label.size());

  std::ostringstream out;
  out << "PD column: machine-vs-human detection rate at 5% FPR (score = 1 - P(human)); "
         "all values are percentages.\n";
  auto pad = [](const std::string& s, size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  out << pad("model", label_width);
  for (const auto& gen : columns) out << "  " << pad("mAP:" + gen, 14);
  out << "  " << pad("avg mAP", 8) << "  " << pad("mAP", 7) << "  " << pad("PD 5%FPR", 8) << "  "
      << pad("macro-F1", 8) << "\n";
  for (const auto& [label, report] : rows) {
    out << pad(label, label_width);
    for (const auto& gen : columns) {
      auto it = report.by_generator.per_generator.find(gen);
      out << "  " << pad(it == report.by_generator.per_generator.end() ? "-" : pct(it->second), 14);
    }
    out << "  " << pad(pct(report.by_generator.avg), 8) << "  " << pad(pct(report.overall.map), 7)
        << "  " << pad(pct(report.pd_at_5fpr), 8) << "  " << pad(pct(report.f1.macro_f1), 8) << "\n";
  }
  return out.str();
}

void render_report(const EvalReport& report, const std::string& format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (format == "json") {
    out << report_to_json(report).dump(2) << '\n';
  } else if (format == "text") {
    out << render_table({{"model", report}});
    out << "\nconfusion (rows true, cols predicted):\n";
    for (size_t r = 0; r < report.confusion.counts.size(); ++r) {
      out << "  " << report.confusion.classes[r] << ":";
      for (int64_t c : report.confusion.counts[r]) out << ' ' << c;
      out << '\n';
    }
  } else {
    throw ConfigError("unknown report format \"" + format + "\"");
  }
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace fgmgt
