#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgmgt/corpus.hpp"
#include "fgmgt/experts.hpp"

namespace fgmgt {

inline constexpr int kBundleFormatVersion = 1;

struct BundleProvenance {
  uint64_t seed = 0;
  int epochs = 0;
  std::string dataset_hash;  // 16 hex chars, see dataset_digest
};

// Content digest binding a model to its training data: FNV-1a 64 over the
// canonical JSONL serialization of the documents.
std::string dataset_digest(const std::vector<Document>& docs);

// Writes manifest.json plus one little-endian float32 weights file per expert
// (w1 | b1 | w2 | b2 in declared shape order). lambda is recorded for
// provenance only; guidance plays no role at inference.
void save_bundle(const ExpertBundle& bundle, const std::string& dir, double lambda,
                 const BundleProvenance& provenance);

void save_staged(const StagedModel& staged, const std::string& dir, double lambda,
                 const BundleProvenance& provenance);

// "experts" or "staged"; throws IntegrityError on anything unreadable.
std::string saved_model_kind(const std::string& dir);

// Loading checks format_version and verifies every weights file's byte length
// against the manifest shapes exactly; mismatches raise IntegrityError naming
// the file.
ExpertBundle load_bundle(const std::string& dir);
StagedModel load_staged(const std::string& dir);

}  // namespace fgmgt
