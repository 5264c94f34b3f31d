#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fgmgt/corpus.hpp"
#include "json.hpp"

namespace fgmgt {

struct ChatEndpointConfig {
  std::string base_url;
  std::string model_name;
  double temperature = 0.6;
  int max_retries = 3;
  double timeout_seconds = 30.0;
  std::string api_key_env = "FGMGT_API_KEY";  // empty disables auth
  double retry_backoff_seconds = 0.25;

  void validate() const;
  nlohmann::json to_json() const;
  static ChatEndpointConfig from_json(const nlohmann::json& j);
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeout_seconds = 30.0;
};

struct HttpResponse {
  int status = 0;  // 0 means the request never completed (network failure)
  std::string body;
};

using HttpPostFn = std::function<HttpResponse(const HttpRequest&)>;

HttpResponse default_http_post(const HttpRequest& request);

// One round trip against {base_url}/v1/chat/completions. Retries transient
// failures (network, 5xx, 429) with exponential backoff.
std::string chat_complete(const ChatEndpointConfig& cfg, const std::string& prompt,
                          const HttpPostFn& post = default_http_post);

std::string generate_article(const ChatEndpointConfig& cfg, const std::string& title, int z,
                             const HttpPostFn& post = default_http_post);

std::string paraphrase_article(const ChatEndpointConfig& cfg, const std::string& text,
                               double extent, uint64_t seed = 0,
                               const HttpPostFn& post = default_http_post);

std::string round_trip_translate(const ChatEndpointConfig& cfg, const std::string& text,
                                 const std::string& language,
                                 const HttpPostFn& post = default_http_post);

std::string humanize_article(const ChatEndpointConfig& cfg, const std::string& generated_text,
                             const HttpPostFn& post = default_http_post);

struct BuildOptions {
  double failure_budget = 0.10;
  int max_concurrency = 1;
  double paraphrase_extent = 1.0;
};

struct BuildFailure {
  std::string doc_id;
  std::string category;
  std::string error;
};

struct BuildResult {
  std::vector<Document> documents;  // originals plus children, sorted by id
  std::vector<BuildFailure> failures;
  size_t requests_attempted = 0;
};

BuildResult build_corpus(const ChatEndpointConfig& cfg, const std::vector<Document>& human_docs,
                         const std::vector<std::string>& languages, uint64_t seed,
                         const BuildOptions& options = {},
                         const HttpPostFn& post = default_http_post);

struct SyntheticConfig {
  uint64_t seed = 42;
  int docs_per_class = 100;
  int min_sentences = 4;
  int max_sentences = 12;
  int vocab_size = 500;
  double confusability = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticConfig from_json(const nlohmann::json& j);
};

// Deterministic offline corpus: one seeded word-frequency profile per class,
// guidance-group members blended toward a shared base by `confusability`.
std::vector<Document> synth_corpus(const SyntheticConfig& cfg);

}  // namespace fgmgt
