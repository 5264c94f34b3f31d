#include "fgmgt/bundle.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fgmgt/errors.hpp"
#include "fgmgt/rng.hpp"

namespace fs = std::filesystem;

namespace fgmgt {

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

size_t param_floats(const MlpParams& p) {
  return p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size();
}

void append_floats(std::string& out, const std::vector<float>& v) {
  for (float f : v) {
    uint32_t bits = std::bit_cast<uint32_t>(f);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
  }
}

void write_weights(const fs::path& path, const MlpParams& p) {
  std::string blob;
  blob.reserve(param_floats(p) * 4);
  append_floats(blob, p.w1);
  append_floats(blob, p.b1);
  append_floats(blob, p.w2);
  append_floats(blob, p.b2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("short write to " + path.string());
}

size_t take_floats(const std::string& blob, size_t offset, std::vector<float>& dst, size_t count) {
  dst.resize(count);
  for (size_t i = 0; i < count; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(blob.data() + offset + i * 4);
    uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                    (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    dst[i] = std::bit_cast<float>(bits);
  }
  return offset + count * 4;
}

MlpParams read_weights(const fs::path& path, uint32_t dim, uint32_t hidden, uint32_t classes) {
  MlpParams p;
  p.dim = dim;
  p.hidden = hidden;
  p.C = classes;
  const size_t w1 = hidden > 0 ? static_cast<size_t>(dim) * hidden : 0;
  const size_t b1 = hidden;
  const size_t w2 = hidden > 0 ? static_cast<size_t>(hidden) * classes
                               : static_cast<size_t>(dim) * classes;
  const size_t b2 = classes;
  const size_t expected = (w1 + b1 + w2 + b2) * 4;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("missing weights file " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() != expected) {
    throw IntegrityError("weights file " + path.string() + " holds " +
                         std::to_string(blob.size()) + " bytes, manifest shapes require " +
                         std::to_string(expected));
  }
  size_t off = 0;
  off = take_floats(blob, off, p.w1, w1);
  off = take_floats(blob, off, p.b1, b1);
  off = take_floats(blob, off, p.w2, w2);
  take_floats(blob, off, p.b2, b2);
  p.validate();
  return p;
}

nlohmann::json shape_json(const MlpParams& p) {
  return nlohmann::json{{"dim", p.dim}, {"hidden", p.hidden}, {"classes", p.C}};
}

nlohmann::json read_manifest(const std::string& dir) {
  fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IntegrityError("missing manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("unreadable manifest.json in " + dir + ": " + e.what());
  }
  if (!manifest.contains("format_version") || !manifest.at("format_version").is_number_integer()) {
    throw IntegrityError("manifest.json in " + dir + " lacks a format_version");
  }
  int version = manifest.at("format_version").get<int>();
  if (version != kBundleFormatVersion) {
    throw IntegrityError("bundle format_version " + std::to_string(version) +
                         " is not supported; this build reads format_version " +
                         std::to_string(kBundleFormatVersion));
  }
  return manifest;
}

void write_manifest(const std::string& dir, const nlohmann::json& manifest) {
  fs::path path = fs::path(dir) / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest.dump(2) << "\n";
}

nlohmann::json provenance_json(double lambda, const BundleProvenance& prov) {
  return nlohmann::json{{"seed", prov.seed},
                        {"epochs", prov.epochs},
                        {"dataset_hash", prov.dataset_hash},
                        {"lambda", lambda}};
}

BundleProvenance provenance_from_json(const nlohmann::json& j) {
  BundleProvenance prov;
  prov.seed = j.value("seed", uint64_t{0});
  prov.epochs = j.value("epochs", 0);
  prov.dataset_hash = j.value("dataset_hash", std::string());
  return prov;
}

}  // namespace

std::string dataset_digest(const std::vector<Document>& docs) {
  uint64_t h = 14695981039346656037ULL;
  for (const auto& doc : docs) {
    std::string line = document_to_json(doc).dump();
    line.push_back('\n');
    h = fnv1a64(line, h);
  }
  return hex64(h);
}

void save_bundle(const ExpertBundle& bundle, const std::string& dir, double lambda,
                 const BundleProvenance& provenance) {
  bundle.validate();
  fs::create_directories(dir);

  nlohmann::json experts = nlohmann::json::array();
  for (const auto& [spec, params] : bundle.experts) {
    std::string file = "expert_" + std::to_string(spec.max_tokens) + ".bin";
    write_weights(fs::path(dir) / file, params);
    nlohmann::json entry = shape_json(params);
    entry["max_tokens"] = spec.max_tokens;
    entry["weights"] = file;
    experts.push_back(entry);
  }

  nlohmann::json manifest{
      {"format_version", kBundleFormatVersion},
      {"kind", "experts"},
      {"taxonomy", bundle.taxonomy.to_json()},
      {"encoder", bundle.encoder_cfg.to_json()},
      {"routing", {{"round_up_between", bundle.routing.round_up_between}}},
      {"ensemble_average_logits", bundle.ensemble_average_logits},
      {"experts", experts},
      {"provenance", provenance_json(lambda, provenance)},
  };
  write_manifest(dir, manifest);
}

void save_staged(const StagedModel& staged, const std::string& dir, double lambda,
                 const BundleProvenance& provenance) {
  staged.encoder_cfg.validate();
  staged.taxonomy.validate();
  staged.coarse.validate();
  fs::create_directories(dir);

  write_weights(fs::path(dir) / "coarse.bin", staged.coarse);
  nlohmann::json coarse = shape_json(staged.coarse);
  coarse["weights"] = "coarse.bin";

  nlohmann::json heads = nlohmann::json::array();
  for (const auto& [cname, params] : staged.heads) {
    params.validate();
    std::string file = "head_" + cname + ".bin";
    write_weights(fs::path(dir) / file, params);
    nlohmann::json entry = shape_json(params);
    entry["coarse_class"] = cname;
    entry["weights"] = file;
    heads.push_back(entry);
  }

  nlohmann::json manifest{
      {"format_version", kBundleFormatVersion},
      {"kind", "staged"},
      {"taxonomy", staged.taxonomy.to_json()},
      {"encoder", staged.encoder_cfg.to_json()},
      {"staged", {{"max_tokens", staged.max_tokens}, {"coarse", coarse}, {"heads", heads}}},
      {"provenance", provenance_json(lambda, provenance)},
  };
  write_manifest(dir, manifest);
}

std::string saved_model_kind(const std::string& dir) {
  nlohmann::json manifest = read_manifest(dir);
  std::string kind = manifest.value("kind", std::string());
  if (kind != "experts" && kind != "staged") {
    throw IntegrityError("manifest.json in " + dir + " declares unknown kind \"" + kind + "\"");
  }
  return kind;
}

ExpertBundle load_bundle(const std::string& dir) {
  nlohmann::json manifest = read_manifest(dir);
  if (manifest.value("kind", std::string()) != "experts") {
    throw IntegrityError(dir + " does not hold an expert bundle");
  }
  ExpertBundle bundle;
  try {
    bundle.taxonomy = Taxonomy::from_json(manifest.at("taxonomy"));
    bundle.encoder_cfg = EncoderConfig::from_json(manifest.at("encoder"));
    bundle.routing.round_up_between =
        manifest.at("routing").value("round_up_between", false);
    bundle.ensemble_average_logits = manifest.value("ensemble_average_logits", false);
    for (const auto& entry : manifest.at("experts")) {
      ExpertSpec spec{entry.at("max_tokens").get<int>()};
      MlpParams params = read_weights(fs::path(dir) / entry.at("weights").get<std::string>(),
                                      entry.at("dim").get<uint32_t>(),
                                      entry.at("hidden").get<uint32_t>(),
                                      entry.at("classes").get<uint32_t>());
      bundle.experts.emplace_back(spec, std::move(params));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed manifest.json in " + dir + ": " + e.what());
  }
  bundle.validate();
  return bundle;
}

StagedModel load_staged(const std::string& dir) {
  nlohmann::json manifest = read_manifest(dir);
  if (manifest.value("kind", std::string()) != "staged") {
    throw IntegrityError(dir + " does not hold a staged model");
  }
  StagedModel staged;
  try {
    staged.taxonomy = Taxonomy::from_json(manifest.at("taxonomy"));
    staged.encoder_cfg = EncoderConfig::from_json(manifest.at("encoder"));
    const auto& sj = manifest.at("staged");
    staged.max_tokens = sj.at("max_tokens").get<int>();
    const auto& cj = sj.at("coarse");
    staged.coarse = read_weights(fs::path(dir) / cj.at("weights").get<std::string>(),
                                 cj.at("dim").get<uint32_t>(), cj.at("hidden").get<uint32_t>(),
                                 cj.at("classes").get<uint32_t>());
    for (const auto& entry : sj.at("heads")) {
      staged.heads.emplace_back(
          entry.at("coarse_class").get<std::string>(),
          read_weights(fs::path(dir) / entry.at("weights").get<std::string>(),
                       entry.at("dim").get<uint32_t>(), entry.at("hidden").get<uint32_t>(),
                       entry.at("classes").get<uint32_t>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed manifest.json in " + dir + ": " + e.what());
  }
  return staged;
}

}  // namespace fgmgt
