#include "fgmgt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fgmgt/errors.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {

namespace {

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Word bytes: ASCII alphanumerics plus everything >= 0x80, so UTF-8
// sequences stay intact and only ASCII punctuation is peeled.
bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string_view trim(std::string_view s) {
  size_t lo = 0, hi = s.size();
  while (lo < hi && is_space_byte(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && is_space_byte(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

const std::vector<std::string> kFineNames = {
    "human",         "generated",     "humanized",     "paraphrased",
    "translated_zh", "translated_es", "translated_fr", "translated_ru",
};

struct LanguagePair {
  CategoryLabel label;
  std::string_view language;
};

constexpr LanguagePair kLanguages[] = {
    {CategoryLabel::translated_zh, "Chinese"},
    {CategoryLabel::translated_es, "Spanish"},
    {CategoryLabel::translated_fr, "French"},
    {CategoryLabel::translated_ru, "Russian"},
};

}  // namespace

const std::vector<std::string>& fine_class_names() { return kFineNames; }

std::string_view to_string(CategoryLabel label) {
  int i = static_cast<int>(label);
  if (i < 0 || i >= kNumFineClasses) throw DataError("invalid label ordinal " + std::to_string(i));
  return kFineNames[static_cast<size_t>(i)];
}

CategoryLabel label_from_string(std::string_view name) {
  for (int i = 0; i < kNumFineClasses; ++i) {
    if (kFineNames[static_cast<size_t>(i)] == name) return static_cast<CategoryLabel>(i);
  }
  throw DataError("unknown class name \"" + std::string(name) + "\"");
}

bool is_translated(CategoryLabel label) {
  return label >= CategoryLabel::translated_zh && label <= CategoryLabel::translated_ru;
}

bool is_machine(CategoryLabel label) { return label != CategoryLabel::human; }

std::string_view source_language_for(CategoryLabel label) {
  for (const auto& p : kLanguages) {
    if (p.label == label) return p.language;
  }
  throw DataError("label " + std::string(to_string(label)) + " is not a translated class");
}

std::optional<CategoryLabel> label_for_language(std::string_view language) {
  for (const auto& p : kLanguages) {
    if (p.language == language) return p.label;
  }
  return std::nullopt;
}

Taxonomy Taxonomy::default_taxonomy() {
  Taxonomy t;
  t.fine_classes = kFineNames;
  t.coarse_map = {
      {"human", "human"},           {"generated", "generated"},
      {"humanized", "generated"},   {"paraphrased", "paraphrased"},
      {"translated_zh", "translated"}, {"translated_es", "translated"},
      {"translated_fr", "translated"}, {"translated_ru", "translated"},
  };
  t.guidance_groups = {
      {"GH", {"generated", "humanized"}},
      {"Trans", {"translated_zh", "translated_es", "translated_fr", "translated_ru"}},
  };
  return t;
}

void Taxonomy::validate() const {
  if (fine_classes.empty()) throw DataError("taxonomy has no fine classes");
  std::set<std::string> seen(fine_classes.begin(), fine_classes.end());
  if (seen.size() != fine_classes.size()) throw DataError("duplicate fine class names");
  for (const auto& name : fine_classes) {
    auto it = coarse_map.find(name);
    if (it == coarse_map.end()) throw DataError("fine class \"" + name + "\" has no coarse mapping");
  }
  for (const auto& [fine, coarse] : coarse_map) {
    if (!seen.count(fine)) throw DataError("coarse_map names unknown fine class \"" + fine + "\"");
    (void)coarse;
  }
  std::set<std::string> grouped;
  for (const auto& [group_name, members] : guidance_groups) {
    if (members.size() < 2) {
      throw DataError("guidance group \"" + group_name + "\" must have at least 2 members");
    }
    for (const auto& m : members) {
      if (!seen.count(m)) throw DataError("guidance group member \"" + m + "\" is not a fine class");
      if (!grouped.insert(m).second) {
        throw DataError("fine class \"" + m + "\" appears in more than one guidance group");
      }
    }
  }
}

int Taxonomy::fine_index(std::string_view name) const {
  for (size_t i = 0; i < fine_classes.size(); ++i) {
    if (fine_classes[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> Taxonomy::coarse_classes() const {
  std::vector<std::string> out;
  for (const auto& fine : fine_classes) {
    const std::string& coarse = coarse_map.at(fine);
    if (std::find(out.begin(), out.end(), coarse) == out.end()) out.push_back(coarse);
  }
  return out;
}

std::vector<int> Taxonomy::group_indices(const std::string& group_name) const {
  for (const auto& [name, members] : guidance_groups) {
    if (name == group_name) {
      std::vector<int> idx;
      idx.reserve(members.size());
      for (const auto& m : members) idx.push_back(fine_index(m));
      std::sort(idx.begin(), idx.end());
      return idx;
    }
  }
  return {};
}

std::optional<size_t> Taxonomy::group_of(int fine_idx) const {
  if (fine_idx < 0 || fine_idx >= num_fine()) return std::nullopt;
  const std::string& name = fine_classes[static_cast<size_t>(fine_idx)];
  for (size_t g = 0; g < guidance_groups.size(); ++g) {
    const auto& members = guidance_groups[g].second;
    if (std::find(members.begin(), members.end(), name) != members.end()) return g;
  }
  return std::nullopt;
}

nlohmann::json Taxonomy::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& [name, members] : guidance_groups) {
    groups.push_back({{"name", name}, {"members", members}});
  }
  return {{"fine_classes", fine_classes}, {"coarse_map", coarse_map}, {"guidance_groups", groups}};
}

Taxonomy Taxonomy::from_json(const nlohmann::json& j) {
  Taxonomy t;
  t.fine_classes = j.at("fine_classes").get<std::vector<std::string>>();
  t.coarse_map = j.at("coarse_map").get<std::map<std::string, std::string>>();
  for (const auto& g : j.at("guidance_groups")) {
    t.guidance_groups.emplace_back(g.at("name").get<std::string>(),
                                   g.at("members").get<std::vector<std::string>>());
  }
  t.validate();
  return t;
}

void Document::validate() const {
  if (id.empty()) throw DataError("document id is empty");
  if (trim(text).empty()) throw DataError("document \"" + id + "\": text is empty");
  if (split != "train" && split != "val" && split != "test") {
    throw DataError("document \"" + id + "\": invalid split \"" + split + "\"");
  }
  if (is_translated(label)) {
    if (!meta.is_object() || !meta.contains("source_language")) {
      throw DataError("document \"" + id + "\": translated label requires meta.source_language");
    }
    const auto& lang = meta.at("source_language");
    if (!lang.is_string() || lang.get<std::string>() != source_language_for(label)) {
      throw DataError("document \"" + id + "\": meta.source_language is inconsistent with label " +
                      std::string(to_string(label)));
    }
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    size_t j = i;
    while (j < n && !is_space_byte(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view run = text.substr(i, j - i);

    size_t a = 0;
    while (a < run.size() && !is_word_byte(static_cast<unsigned char>(run[a]))) ++a;
    if (a == run.size()) {
      out.emplace_back(run);  // punctuation-only run stays whole
    } else {
      size_t b = run.size();
      while (b > a && !is_word_byte(static_cast<unsigned char>(run[b - 1]))) --b;
      if (a > 0) out.emplace_back(run.substr(0, a));
      out.emplace_back(run.substr(a, b - a));
      if (b < run.size()) out.emplace_back(run.substr(b));
    }
    i = j;
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

size_t token_length(std::string_view text) { return tokenize(text).size(); }

std::string truncate_to_tokens(std::string_view text, size_t max_tokens) {
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  std::vector<std::string> tokens = tokenize(text);
  if (tokens.size() > max_tokens) tokens.resize(max_tokens);
  return detokenize(tokens);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::string_view t = trim(text);
  std::vector<std::string> out;
  size_t start = 0, i = 0;
  const size_t n = t.size();
  while (i < n) {
    char c = t[i];
    bool terminator = (c == '.' || c == '!' || c == '?') &&
                      (i + 1 == n || is_space_byte(static_cast<unsigned char>(t[i + 1])));
    if (terminator) {
      out.emplace_back(t.substr(start, i + 1 - start));
      ++i;
      while (i < n && is_space_byte(static_cast<unsigned char>(t[i]))) ++i;
      start = i;
    } else {
      ++i;
    }
  }
  if (start < n) out.emplace_back(t.substr(start));
  return out;
}

std::string strip_first_sentence(const std::string& text) {
  std::vector<std::string> sentences = split_sentences(text);
  if (sentences.size() <= 1) return text;
  return detokenize(std::vector<std::string>(sentences.begin() + 1, sentences.end()));
}

nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json j = {
      {"id", doc.id},
      {"text", doc.text},
      {"label", std::string(to_string(doc.label))},
      {"generator_id", doc.generator_id},
      {"source_dataset", doc.source_dataset},
      {"split", doc.split},
  };
  if (doc.meta.is_object() && !doc.meta.empty()) j["meta"] = doc.meta;
  return j;
}

namespace {

const char* kRequiredFields[] = {"id", "text", "label", "generator_id", "source_dataset", "split"};

}  // namespace

Document document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("document is not a JSON object");
  for (const char* field : kRequiredFields) {
    if (!j.contains(field)) throw DataError(std::string("missing field ") + field);
    if (!j.at(field).is_string()) throw DataError(std::string("field ") + field + " must be a string");
  }
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.text = j.at("text").get<std::string>();
  doc.label = label_from_string(j.at("label").get<std::string>());
  doc.generator_id = j.at("generator_id").get<std::string>();
  doc.source_dataset = j.at("source_dataset").get<std::string>();
  doc.split = j.at("split").get<std::string>();
  if (j.contains("meta")) {
    if (!j.at("meta").is_object()) throw DataError("field meta must be an object");
    doc.meta = j.at("meta");
  }
  // Unknown top-level fields are kept, under meta, so writes never lose them.
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "meta") continue;
    bool known = false;
    for (const char* field : kRequiredFields) {
      if (it.key() == field) { known = true; break; }
    }
    if (!known) doc.meta[it.key()] = it.value();
  }
  doc.validate();
  return doc;
}

std::vector<Document> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path);
  std::vector<Document> docs;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    Document doc;
    try {
      doc = document_from_json(j);
    } catch (const DataError& e) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(doc.id).second) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": duplicate id \"" + doc.id + "\"");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_jsonl(const std::vector<Document>& docs, const std::string& path) {
  std::set<std::string> ids;
  for (const auto& doc : docs) {
    doc.validate();
    if (!ids.insert(doc.id).second) throw DataError("duplicate id \"" + doc.id + "\"");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& doc : docs) {
    out << document_to_json(doc).dump() << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

SplitResult stratified_split(const std::vector<Document>& docs, double f_train, double f_val,
                             double f_test, uint64_t seed) {
  if (docs.empty()) throw DataError("stratified_split: empty input");
  double sum = f_train + f_val + f_test;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (f_train < 0 || f_val < 0 || f_test < 0) throw ConfigError("split fractions must be >= 0");

  // Strata keyed by (label, generator_id); ordered map keeps iteration stable.
  std::map<std::pair<int, std::string>, std::vector<size_t>> strata;
  for (size_t i = 0; i < docs.size(); ++i) {
    strata[{static_cast<int>(docs[i].label), docs[i].generator_id}].push_back(i);
  }

  SplitResult result;
  const double fracs[3] = {f_train, f_val, f_test};
  for (auto& [key, members] : strata) {
    std::string tag = std::to_string(key.first) + "|" + key.second;
    Rng rng(derive_seed(seed, tag));
    rng.shuffle(members);

    // Largest-remainder apportionment keeps each count within +-1 of n*f.
    const size_t n = members.size();
    size_t counts[3];
    double remainders[3];
    size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      double ideal = static_cast<double>(n) * fracs[s];
      counts[s] = static_cast<size_t>(ideal);
      remainders[s] = ideal - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s) {
        if (remainders[s] > remainders[best]) best = s;
      }
      ++counts[best];
      remainders[best] = -1;
      ++assigned;
    }

    size_t pos = 0;
    std::vector<Document>* outs[3] = {&result.train, &result.val, &result.test};
    const char* names[3] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
      for (size_t k = 0; k < counts[s]; ++k, ++pos) {
        Document doc = docs[members[pos]];
        doc.split = names[s];
        outs[s]->push_back(std::move(doc));
      }
    }
  }
  return result;
}

}  // namespace fgmgt
