#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fgmgt/bundle.hpp"
#include "fgmgt/corpus.hpp"
#include "fgmgt/datagen.hpp"
#include "fgmgt/encoder.hpp"
#include "fgmgt/errors.hpp"
#include "fgmgt/evaluate.hpp"
#include "fgmgt/experts.hpp"
#include "fgmgt/metrics.hpp"
#include "fgmgt/model.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace fgmgt;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

PredictMode parse_mode(const std::string& mode) {
  if (mode == "routed") return PredictMode::routed;
  if (mode == "ensemble") return PredictMode::ensemble;
  throw ConfigError("mode must be \"routed\" or \"ensemble\", got \"" + mode + "\"");
}

py::dict probs_dict(const std::vector<std::string>& names, const std::vector<double>& values) {
  py::dict out;
  for (size_t i = 0; i < names.size(); ++i) out[py::str(names[i])] = values[i];
  return out;
}

// ExpertBundle plus the manifest fields save_bundle needs, so a bundle
// trained or loaded in python can be written back without extra arguments.
struct PyBundle {
  ExpertBundle bundle;
  double lambda = 0.01;
  BundleProvenance provenance;

  std::vector<int> lengths() const {
    std::vector<int> out;
    for (const auto& [spec, params] : bundle.experts) out.push_back(spec.max_tokens);
    return out;
  }

  py::dict predict_fine(const std::string& text, const std::string& mode) const {
    return probs_dict(bundle.taxonomy.fine_classes, predict(bundle, text, parse_mode(mode)));
  }

  py::dict predict_coarse(const std::string& text, const std::string& mode) const {
    std::vector<double> fine = predict(bundle, text, parse_mode(mode));
    return probs_dict(bundle.taxonomy.coarse_classes(),
                      aggregate_coarse(bundle.taxonomy, fine));
  }

  void save(const std::string& dir) const { save_bundle(bundle, dir, lambda, provenance); }
};

PyBundle train_py(const std::vector<Document>& docs, const std::vector<int>& expert_lengths,
                  uint64_t seed, int epochs, int batch_size, double lr, int hidden,
                  double p_crop, uint32_t encoder_dim, double guidance_lambda,
                  bool round_up_routing, bool ensemble_average_logits, int max_concurrency) {
  EncoderConfig enc;
  enc.dim = encoder_dim;

  TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr = lr;
  cfg.hidden = hidden;
  cfg.p_crop = p_crop;
  cfg.max_concurrency = max_concurrency;

  LossConfig loss_cfg;
  loss_cfg.lambda = guidance_lambda;

  std::vector<ExpertSpec> specs;
  for (int len : expert_lengths) specs.push_back(ExpertSpec{len});

  PyBundle out;
  out.bundle = train_bundle(docs, enc, specs, cfg, loss_cfg);
  out.bundle.routing.round_up_between = round_up_routing;
  out.bundle.ensemble_average_logits = ensemble_average_logits;
  out.lambda = guidance_lambda;
  out.provenance.seed = seed;
  out.provenance.epochs = epochs;
  out.provenance.dataset_hash = dataset_digest(docs);
  return out;
}

PyBundle load_py(const std::string& dir) {
  PyBundle out;
  out.bundle = load_bundle(dir);

  std::ifstream in(dir + "/manifest.json", std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json manifest = nlohmann::json::parse(buf.str());
  const auto& prov = manifest.at("provenance");
  out.lambda = prov.at("lambda").get<double>();
  out.provenance.seed = prov.at("seed").get<uint64_t>();
  out.provenance.epochs = prov.at("epochs").get<int>();
  out.provenance.dataset_hash = prov.at("dataset_hash").get<std::string>();
  return out;
}

py::object evaluate_py(const PyBundle& pb, const std::vector<Document>& docs,
                       const std::vector<int>& lengths, bool routed, bool ensemble, bool coarse,
                       double fpr_budget, const std::string& split) {
  GridEvalOptions options;
  options.lengths = lengths;
  options.routed = routed;
  options.ensemble = ensemble;
  options.coarse = coarse;
  options.fpr_budget = fpr_budget;
  options.split = split == "all" ? "" : split;
  return json_to_py(grid_eval_to_json(evaluate_grid(pb.bundle, docs, options)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fine-grained machine-generated-text detection";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_RuntimeError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_RuntimeError);
  py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);

  m.def("fine_classes", [] { return Taxonomy::default_taxonomy().fine_classes; },
        "Fine class names in logit order.");
  m.def("coarse_classes", [] { return Taxonomy::default_taxonomy().coarse_classes(); },
        "Coarse class names in order of first appearance.");
  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));
  m.def("token_length", [](const std::string& text) { return token_length(text); },
        py::arg("text"));
  m.def("bleu", &bleu, py::arg("candidate"), py::arg("reference"),
        "Sentence BLEU with up-to-4-gram precision and brevity penalty.");

  py::class_<Document>(m, "Document")
      .def_readonly("id", &Document::id)
      .def_readonly("text", &Document::text)
      .def_property_readonly(
          "label", [](const Document& d) { return std::string(to_string(d.label)); })
      .def_readonly("generator_id", &Document::generator_id)
      .def_readonly("source_dataset", &Document::source_dataset)
      .def_readonly("split", &Document::split)
      .def_property_readonly("meta", [](const Document& d) { return json_to_py(d.meta); })
      .def("__repr__", [](const Document& d) {
        return "Document(id=" + d.id + ", label=" + std::string(to_string(d.label)) +
               ", split=" + d.split + ")";
      });

  m.def(
      "synth_corpus",
      [](uint64_t seed, int docs_per_class, int min_sentences, int max_sentences, int vocab_size,
         double confusability) {
        SyntheticConfig cfg;
        cfg.seed = seed;
        cfg.docs_per_class = docs_per_class;
        cfg.min_sentences = min_sentences;
        cfg.max_sentences = max_sentences;
        cfg.vocab_size = vocab_size;
        cfg.confusability = confusability;
        return synth_corpus(cfg);
      },
      py::arg("seed") = 42, py::arg("docs_per_class") = 100, py::arg("min_sentences") = 4,
      py::arg("max_sentences") = 12, py::arg("vocab_size") = 500,
      py::arg("confusability") = 0.1,
      "Deterministic offline corpus with one seeded word profile per class.");

  m.def("read_jsonl", &read_jsonl, py::arg("path"));
  m.def("write_jsonl", &write_jsonl, py::arg("docs"), py::arg("path"));

  py::class_<PyBundle>(m, "Bundle")
      .def_property_readonly("lengths", &PyBundle::lengths,
                             "max_tokens of each expert, ascending.")
      .def("predict", &PyBundle::predict_fine, py::arg("text"), py::arg("mode") = "routed",
           "Fine-class probabilities keyed by class name.")
      .def("predict_coarse", &PyBundle::predict_coarse, py::arg("text"),
           py::arg("mode") = "routed",
           "Coarse scores: max over each coarse class's fine members.")
      .def("save", &PyBundle::save, py::arg("dir"))
      .def("__repr__", [](const PyBundle& pb) {
        std::string out = "Bundle(lengths=[";
        for (size_t i = 0; i < pb.bundle.experts.size(); ++i) {
          if (i) out += ", ";
          out += std::to_string(pb.bundle.experts[i].first.max_tokens);
        }
        return out + "])";
      });

  m.def("train", &train_py, py::arg("docs"), py::kw_only(),
        py::arg("expert_lengths") = std::vector<int>{128, 256, 512}, py::arg("seed") = 0,
        py::arg("epochs") = 3, py::arg("batch_size") = 32, py::arg("lr") = 1e-3,
        py::arg("hidden") = 256, py::arg("p_crop") = 0.3, py::arg("encoder_dim") = 65536,
        py::arg("guidance_lambda") = 0.01, py::arg("round_up_routing") = false,
        py::arg("ensemble_average_logits") = false, py::arg("max_concurrency") = 1,
        "Train one expert per length on the train split of docs.");

  m.def("load", &load_py, py::arg("dir"), "Load a saved expert bundle.");

  m.def("evaluate", &evaluate_py, py::arg("bundle"), py::arg("docs"), py::kw_only(),
        py::arg("lengths") = std::vector<int>{32, 50, 128, 256, 500, 512},
        py::arg("routed") = true, py::arg("ensemble") = true, py::arg("coarse") = false,
        py::arg("fpr_budget") = 0.05, py::arg("split") = "test",
        "Truncated-length evaluation grid; returns the report as nested dicts.");
}
