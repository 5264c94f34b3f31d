#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fgmgt {

// The ordinal order below is the serialization and logit-index contract for
// the whole toolkit: model files, confusion matrices and reports all index
// classes this way.
enum class CategoryLabel : int {
  human = 0,
  generated = 1,
  humanized = 2,
  paraphrased = 3,
  translated_zh = 4,
  translated_es = 5,
  translated_fr = 6,
  translated_ru = 7,
};

inline constexpr int kNumFineClasses = 8;

const std::vector<std::string>& fine_class_names();
std::string_view to_string(CategoryLabel label);
CategoryLabel label_from_string(std::string_view name);  // throws DataError
bool is_translated(CategoryLabel label);
bool is_machine(CategoryLabel label);
// Full language name ("Chinese", ...) for a translated_* label.
std::string_view source_language_for(CategoryLabel label);
std::optional<CategoryLabel> label_for_language(std::string_view language);

// Fine-class list, fine->coarse map and the guidance groups used by the
// subcategory loss. Groups are disjoint and have at least two members each.
struct Taxonomy {
  std::vector<std::string> fine_classes;
  std::map<std::string, std::string> coarse_map;
  std::vector<std::pair<std::string, std::vector<std::string>>> guidance_groups;

  static Taxonomy default_taxonomy();

  void validate() const;  // throws DataError on invariant violations

  int num_fine() const { return static_cast<int>(fine_classes.size()); }
  int fine_index(std::string_view name) const;  // -1 if absent
  // Coarse classes in order of first appearance in fine_classes.
  std::vector<std::string> coarse_classes() const;
  // Fine ordinals of a named group.
  std::vector<int> group_indices(const std::string& group_name) const;
  // Index into guidance_groups of the group containing this fine class, if any.
  std::optional<size_t> group_of(int fine_index) const;

  nlohmann::json to_json() const;
  static Taxonomy from_json(const nlohmann::json& j);
  bool operator==(const Taxonomy&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  CategoryLabel label = CategoryLabel::human;
  std::string generator_id;
  std::string source_dataset;
  std::string split;  // train | val | test
  nlohmann::json meta = nlohmann::json::object();

  void validate() const;  // throws DataError
  bool operator==(const Document&) const = default;
};

// Deterministic, locale-independent tokenization: maximal non-whitespace
// runs, with leading/trailing runs of non-word bytes peeled off as separate
// tokens. Bytes >= 0x80 count as word bytes so multi-byte UTF-8 sequences
// are never split.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(const std::vector<std::string>& tokens);
size_t token_length(std::string_view text);

std::string truncate_to_tokens(std::string_view text, size_t max_tokens);

// Splits after '.', '!' or '?' when followed by whitespace or end-of-text.
// No abbreviation dictionary; the rule is deterministic by construction.
std::vector<std::string> split_sentences(std::string_view text);

// Drops the first sentence (completion preambles never reach the detector);
// text with at most one sentence is returned unchanged.
std::string strip_first_sentence(const std::string& text);

nlohmann::json document_to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

std::vector<Document> read_jsonl(const std::string& path);
void write_jsonl(const std::vector<Document>& docs, const std::string& path);

struct SplitResult {
  std::vector<Document> train, val, test;
};

// Per (label, generator_id) stratum the split counts match the fractions to
// +-1. Deterministic given the seed; partitions are disjoint and exhaustive.
SplitResult stratified_split(const std::vector<Document>& docs, double f_train,
                             double f_val, double f_test, uint64_t seed);

}  // namespace fgmgt
