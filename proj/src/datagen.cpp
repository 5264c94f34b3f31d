#include "fgmgt/datagen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"

#include "fgmgt/errors.hpp"
#include "fgmgt/metrics.hpp"
#include "fgmgt/rng.hpp"

namespace fgmgt {

void ChatEndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("chat endpoint base_url is empty");
  if (model_name.empty()) throw ConfigError("chat endpoint model_name is empty");
  if (!(temperature >= 0.0) || temperature > 2.0) throw ConfigError("temperature must be in [0, 2]");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout_seconds must be > 0");
  if (retry_backoff_seconds < 0.0) throw ConfigError("retry_backoff_seconds must be >= 0");
}

nlohmann::json ChatEndpointConfig::to_json() const {
  return {{"base_url", base_url},
          {"model_name", model_name},
          {"temperature", temperature},
          {"max_retries", max_retries},
          {"timeout_seconds", timeout_seconds},
          {"api_key_env", api_key_env},
          {"retry_backoff_seconds", retry_backoff_seconds}};
}

ChatEndpointConfig ChatEndpointConfig::from_json(const nlohmann::json& j) {
  ChatEndpointConfig cfg;
  cfg.base_url = j.at("base_url").get<std::string>();
  cfg.model_name = j.at("model_name").get<std::string>();
  if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
  if (j.contains("max_retries")) cfg.max_retries = j.at("max_retries").get<int>();
  if (j.contains("timeout_seconds")) cfg.timeout_seconds = j.at("timeout_seconds").get<double>();
  if (j.contains("api_key_env")) cfg.api_key_env = j.at("api_key_env").get<std::string>();
  if (j.contains("retry_backoff_seconds")) {
    cfg.retry_backoff_seconds = j.at("retry_backoff_seconds").get<double>();
  }
  cfg.validate();
  return cfg;
}

HttpResponse default_http_post(const HttpRequest& request) {
  auto scheme_end = request.url.find("://");
  if (scheme_end == std::string::npos) {
    return {0, "url has no scheme: " + request.url};
  }
  auto path_start = request.url.find('/', scheme_end + 3);
  std::string origin = path_start == std::string::npos ? request.url : request.url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

  httplib::Client client(origin);
  auto seconds = static_cast<time_t>(request.timeout_seconds);
  auto usec = static_cast<time_t>((request.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, usec);
  client.set_read_timeout(seconds, usec);
  client.set_write_timeout(seconds, usec);

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  auto res = client.Post(path, headers, request.body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

namespace {

bool transient(const HttpResponse& r) {
  return r.status == 0 || r.status == 429 || (r.status >= 500 && r.status < 600);
}

}  // namespace

std::string chat_complete(const ChatEndpointConfig& cfg, const std::string& prompt,
                          const HttpPostFn& post) {
  cfg.validate();

  HttpRequest request;
  request.url = cfg.base_url + "/v1/chat/completions";
  request.timeout_seconds = cfg.timeout_seconds;
  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key || !*key) {
      throw ConfigError("environment variable " + cfg.api_key_env + " is not set");
    }
    request.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  request.body = nlohmann::json{{"model", cfg.model_name},
                                {"temperature", cfg.temperature},
                                {"messages", nlohmann::json::array({nlohmann::json{
                                                 {"role", "user"}, {"content", prompt}}})}}
                     .dump();

  HttpResponse response;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0 && cfg.retry_backoff_seconds > 0) {
      double delay = cfg.retry_backoff_seconds * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    response = post(request);
    if (!transient(response)) break;
    if (attempt == cfg.max_retries) {
      throw TransportError("chat endpoint failed after " + std::to_string(attempt + 1) +
                           " attempts: status " + std::to_string(response.status) +
                           (response.body.empty() ? "" : " " + response.body.substr(0, 200)));
    }
  }
  if (response.status != 200) {
    throw TransportError("chat endpoint returned status " + std::to_string(response.status) +
                         (response.body.empty() ? "" : ": " + response.body.substr(0, 200)));
  }

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(response.body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("chat endpoint returned malformed JSON: ") + e.what());
  }
  std::string content;
  try {
    content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError("chat response is missing choices[0].message.content");
  }
  if (tokenize(content).empty()) throw GenerationError("chat endpoint returned an empty completion");
  return content;
}

std::string generate_article(const ChatEndpointConfig& cfg, const std::string& title, int z,
                             const HttpPostFn& post) {
  if (title.empty()) throw ConfigError("generate_article requires a non-empty title");
  if (z < 1) throw ConfigError("sentence count must be >= 1");
  std::string prompt = "Write an article on the following title, ensuring that the article "
                       "consists of approximately " +
                       std::to_string(z) + " sentences: " + title;
  return strip_first_sentence(chat_complete(cfg, prompt, post));
}

std::string paraphrase_article(const ChatEndpointConfig& cfg, const std::string& text,
                               double extent, uint64_t seed, const HttpPostFn& post) {
  if (text.empty()) throw ConfigError("paraphrase_article requires non-empty text");
  if (!(extent > 0.0) || extent > 1.0) throw ConfigError("paraphrase extent must be in (0, 1]");

  if (extent == 1.0) {
    return strip_first_sentence(chat_complete(cfg, "Paraphrase the following article: " + text, post));
  }

  std::vector<std::string> sentences = split_sentences(text);
  const size_t S = sentences.size();
  const size_t k = static_cast<size_t>(std::ceil(extent * static_cast<double>(S)));

  std::vector<size_t> indices(S);
  for (size_t i = 0; i < S; ++i) indices[i] = i;
  Rng rng(derive_seed(seed, "paraphrase_extent"));
  rng.shuffle(indices);
  std::set<size_t> chosen(indices.begin(), indices.begin() + static_cast<long>(k));

  // One prompt per contiguous run of chosen sentences; everything else is
  // kept verbatim.
  std::vector<std::string> out(sentences);
  size_t i = 0;
  while (i < S) {
    if (!chosen.count(i)) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < S && chosen.count(j)) ++j;
    std::string run;
    for (size_t s = i; s < j; ++s) {
      if (s > i) run += ' ';
      run += sentences[s];
    }
    std::string rewritten =
        strip_first_sentence(chat_complete(cfg, "Paraphrase the following article: " + run, post));
    out[i] = rewritten;
    for (size_t s = i + 1; s < j; ++s) out[s].clear();
    i = j;
  }
  std::string result;
  for (const auto& s : out) {
    if (s.empty()) continue;
    if (!result.empty()) result += ' ';
    result += s;
  }
  return result;
}

std::string round_trip_translate(const ChatEndpointConfig& cfg, const std::string& text,
                                 const std::string& language, const HttpPostFn& post) {
  if (text.empty()) throw ConfigError("round_trip_translate requires non-empty text");
  if (!label_for_language(language).has_value()) {
    throw ConfigError("unsupported pivot language \"" + language + "\"");
  }
  std::string intermediate =
      chat_complete(cfg, "Translate the following article into " + language + ": " + text, post);
  // The intermediate is machine-consumed; only the final hop is leak-stripped.
  return strip_first_sentence(
      chat_complete(cfg, "Translate the following article into English: " + intermediate, post));
}

std::string humanize_article(const ChatEndpointConfig& cfg, const std::string& generated_text,
                             const HttpPostFn& post) {
  if (generated_text.empty()) throw ConfigError("humanize_article requires non-empty text");
  return strip_first_sentence(chat_complete(
      cfg, "Rewrite this text to make it sound more natural and human-written: " + generated_text,
      post));
}

namespace {

const std::vector<std::string> kAllLanguages = {"Chinese", "Spanish", "French", "Russian"};

struct ChildTask {
  size_t parent_index;
  CategoryLabel category;
};

std::string doc_title(const Document& doc) {
  if (doc.meta.is_object() && doc.meta.contains("title") && doc.meta.at("title").is_string()) {
    return doc.meta.at("title").get<std::string>();
  }
  auto sentences = split_sentences(doc.text);
  return sentences.empty() ? doc.text : sentences.front();
}

Document child_skeleton(const Document& parent, CategoryLabel category,
                        const std::string& generator_id) {
  Document child;
  child.id = parent.id + ":" + std::string(to_string(category));
  child.label = category;
  child.generator_id = generator_id;
  child.source_dataset = parent.source_dataset;
  child.split = parent.split;
  if (is_translated(category)) {
    child.meta["source_language"] = std::string(source_language_for(category));
  }
  return child;
}

}  // namespace

BuildResult build_corpus(const ChatEndpointConfig& cfg, const std::vector<Document>& human_docs,
                         const std::vector<std::string>& languages, uint64_t seed,
                         const BuildOptions& options, const HttpPostFn& post) {
  cfg.validate();
  if (options.failure_budget < 0 || options.failure_budget > 1) {
    throw ConfigError("failure_budget must be in [0, 1]");
  }
  if (options.max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  for (const auto& doc : human_docs) {
    doc.validate();
    if (doc.label != CategoryLabel::human) {
      throw DataError("build_corpus input \"" + doc.id + "\" is not labeled human");
    }
  }
  std::set<std::string> requested(languages.begin(), languages.end());
  for (const auto& lang : requested) {
    if (!label_for_language(lang).has_value()) {
      throw ConfigError("unsupported pivot language \"" + lang + "\"");
    }
  }
  std::vector<std::string> ordered_languages;
  for (const auto& lang : kAllLanguages) {
    if (requested.count(lang)) ordered_languages.push_back(lang);
  }

  BuildResult result;
  result.documents = human_docs;
  result.requests_attempted = human_docs.size() * (3 + ordered_languages.size());

  std::mutex merge_mutex;
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= human_docs.size()) return;
      const Document& parent = human_docs[i];
      std::vector<Document> children;
      std::vector<BuildFailure> failures;

      // generated, then humanized chained from it
      std::string generated_text;
      try {
        int z = static_cast<int>(split_sentences(parent.text).size());
        generated_text = generate_article(cfg, doc_title(parent), z, post);
        Document child = child_skeleton(parent, CategoryLabel::generated, cfg.model_name);
        child.text = generated_text;
        children.push_back(std::move(child));
      } catch (const Error& e) {
        failures.push_back({parent.id, "generated", e.what()});
      }
      if (!generated_text.empty()) {
        try {
          Document child = child_skeleton(parent, CategoryLabel::humanized, cfg.model_name);
          child.text = humanize_article(cfg, generated_text, post);
          children.push_back(std::move(child));
        } catch (const Error& e) {
          failures.push_back({parent.id, "humanized", e.what()});
        }
      } else {
        failures.push_back({parent.id, "humanized", "generated step failed upstream"});
      }

      try {
        Document child = child_skeleton(parent, CategoryLabel::paraphrased, cfg.model_name);
        child.text = paraphrase_article(cfg, parent.text, options.paraphrase_extent,
                                        derive_seed(seed, parent.id + ":paraphrase"), post);
        children.push_back(std::move(child));
      } catch (const Error& e) {
        failures.push_back({parent.id, "paraphrased", e.what()});
      }

      for (const auto& lang : ordered_languages) {
        CategoryLabel category = *label_for_language(lang);
        try {
          Document child = child_skeleton(parent, category, cfg.model_name);
          child.text = round_trip_translate(cfg, parent.text, lang, post);
          child.meta["bleu_roundtrip"] = bleu(child.text, parent.text);
          children.push_back(std::move(child));
        } catch (const Error& e) {
          failures.push_back({parent.id, std::string(to_string(category)), e.what()});
        }
      }

      std::lock_guard<std::mutex> lock(merge_mutex);
      for (auto& c : children) result.documents.push_back(std::move(c));
      for (auto& f : failures) result.failures.push_back(std::move(f));
    }
  };

  size_t n_threads = std::min<size_t>(static_cast<size_t>(options.max_concurrency), human_docs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  double failure_rate = result.requests_attempted == 0
                            ? 0.0
                            : static_cast<double>(result.failures.size()) /
                                  static_cast<double>(result.requests_attempted);
  if (failure_rate > options.failure_budget) {
    throw DataError("corpus build exceeded failure budget: " + std::to_string(result.failures.size()) +
                    " of " + std::to_string(result.requests_attempted) + " requests failed");
  }

  std::sort(result.documents.begin(), result.documents.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  std::sort(result.failures.begin(), result.failures.end(), [](const BuildFailure& a, const BuildFailure& b) {
    return std::tie(a.doc_id, a.category) < std::tie(b.doc_id, b.category);
  });
  return result;
}

}  // namespace fgmgt
