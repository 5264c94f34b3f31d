#include "doctest.h"

#include <cstdlib>
#include <map>
#include <set>

#include "fgmgt/corpus.hpp"
#include "fgmgt/datagen.hpp"
#include "fgmgt/errors.hpp"
#include "mock_chat_server.hpp"

using namespace fgmgt;
using fgmgt::testing::MockChatServer;
using fgmgt::testing::prompt_payload;

namespace {

ChatEndpointConfig test_cfg(const MockChatServer& server) {
  ChatEndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_name = "mock-llm";
  cfg.temperature = 0.6;
  cfg.max_retries = 2;
  cfg.timeout_seconds = 5.0;
  cfg.api_key_env = "FGMGT_TEST_KEY";
  cfg.retry_backoff_seconds = 0.0;
  return cfg;
}

struct KeyGuard {
  KeyGuard() { setenv("FGMGT_TEST_KEY", "secret-token", 1); }
  ~KeyGuard() { unsetenv("FGMGT_TEST_KEY"); }
};

Document human_doc(const std::string& id, const std::string& text) {
  Document d;
  d.id = id;
  d.text = text;
  d.label = CategoryLabel::human;
  d.generator_id = "human";
  d.source_dataset = "unit";
  d.split = "train";
  return d;
}

}  // namespace

TEST_CASE("chat_complete round trip and wire shape") {
  KeyGuard key;
  MockChatServer server([](const std::string&) { return "OK"; });
  ChatEndpointConfig cfg = test_cfg(server);

  CHECK(chat_complete(cfg, "ping") == "OK");

  auto reqs = server.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].at("model") == "mock-llm");
  CHECK(reqs[0].at("temperature").get<double>() == doctest::Approx(0.6));
  CHECK(reqs[0].at("messages").size() == 1);
  CHECK(reqs[0].at("messages").at(0).at("role") == "user");
  CHECK(reqs[0].at("messages").at(0).at("content") == "ping");
  CHECK(server.auth_headers().at(0) == "Bearer secret-token");
}

TEST_CASE("chat_complete retry and error contracts") {
  KeyGuard key;
  MockChatServer server([](const std::string&) { return "recovered"; });
  ChatEndpointConfig cfg = test_cfg(server);

  SUBCASE("exhausted retries raise a transport error after max_retries+1 attempts") {
    server.fail_first(100);
    CHECK_THROWS_AS(chat_complete(cfg, "x"), TransportError);
    CHECK(server.hits() == 3);  // max_retries=2 -> 3 attempts
  }
  SUBCASE("a transient failure then success recovers") {
    server.fail_first(2);
    CHECK(chat_complete(cfg, "x") == "recovered");
    CHECK(server.hits() == 3);
  }
  SUBCASE("missing api key env var") {
    ChatEndpointConfig broken = cfg;
    broken.api_key_env = "FGMGT_SURELY_UNSET_KEY_VAR";
    unsetenv("FGMGT_SURELY_UNSET_KEY_VAR");
    CHECK_THROWS_AS(chat_complete(broken, "x"), ConfigError);
    CHECK(server.hits() == 0);
  }
  SUBCASE("empty api_key_env disables auth") {
    ChatEndpointConfig open = cfg;
    open.api_key_env = "";
    CHECK(chat_complete(open, "x") == "recovered");
    CHECK(server.auth_headers().at(0).empty());
  }
  SUBCASE("unreachable endpoint") {
    ChatEndpointConfig dead = cfg;
    dead.base_url = "http://127.0.0.1:9";
    dead.max_retries = 0;
    dead.timeout_seconds = 0.5;
    CHECK_THROWS_AS(chat_complete(dead, "x"), TransportError);
  }
}

TEST_CASE("empty completion is a generation error") {
  KeyGuard key;
  MockChatServer server([](const std::string&) { return "   "; });
  CHECK_THROWS_AS(chat_complete(test_cfg(server), "x"), GenerationError);
}

TEST_CASE("config validation") {
  ChatEndpointConfig cfg;
  cfg.base_url = "http://x";
  cfg.model_name = "m";
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 2.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.temperature = 0.6;
  cfg.base_url = "";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  ChatEndpointConfig full;
  full.base_url = "http://h:1";
  full.model_name = "m";
  full.max_retries = 5;
  full.api_key_env = "OTHER_KEY";
  full.retry_backoff_seconds = 0.5;
  ChatEndpointConfig back = ChatEndpointConfig::from_json(full.to_json());
  CHECK(back.base_url == "http://h:1");
  CHECK(back.max_retries == 5);
  CHECK(back.api_key_env == "OTHER_KEY");
  CHECK(back.retry_backoff_seconds == 0.5);
}

TEST_CASE("generate_article prompt bytes and leak strip") {
  KeyGuard key;
  MockChatServer server(
      [](const std::string&) { return "Sure, here you go. Body A. Body B."; });
  ChatEndpointConfig cfg = test_cfg(server);

  std::string out = generate_article(cfg, "Local Elections Heat Up", 12);
  CHECK(out == "Body A. Body B.");
  CHECK(server.prompts().at(0) ==
        "Write an article on the following title, ensuring that the article consists of "
        "approximately 12 sentences: Local Elections Heat Up");
  CHECK_THROWS_AS(generate_article(cfg, "", 5), ConfigError);
  CHECK_THROWS_AS(generate_article(cfg, "t", 0), ConfigError);
}

TEST_CASE("paraphrase_article whole-article mode") {
  KeyGuard key;
  MockChatServer server(
      [](const std::string& p) { return "Paraphrasing for you. NEW " + prompt_payload(p); });
  ChatEndpointConfig cfg = test_cfg(server);

  std::string out = paraphrase_article(cfg, "One here. Two there.", 1.0);
  CHECK(out == "NEW One here. Two there.");
  REQUIRE(server.prompts().size() == 1);
  CHECK(server.prompts().at(0) == "Paraphrase the following article: One here. Two there.");

  CHECK_THROWS_AS(paraphrase_article(cfg, "x.", 0.0), ConfigError);
  CHECK_THROWS_AS(paraphrase_article(cfg, "x.", 1.2), ConfigError);
  CHECK_THROWS_AS(paraphrase_article(cfg, "", 1.0), ConfigError);
}

TEST_CASE("paraphrase_article partial extent replaces exactly ceil(extent*S) sentences") {
  KeyGuard key;
  // Single-sentence replies keep leak-strip a no-op, so replaced runs are
  // exactly the marker text.
  MockChatServer server([](const std::string&) { return "REWRITTEN..."; });
  ChatEndpointConfig cfg = test_cfg(server);

  std::string text = "S0 a. S1 b. S2 c. S3 d. S4 e. S5 f. S6 g. S7 h. S8 i. S9 j.";
  std::string out = paraphrase_article(cfg, text, 0.2, 7);

  // 8 of 10 sentences must appear verbatim, and the total replaced is 2.
  int kept = 0;
  for (int i = 0; i < 10; ++i) {
    std::string sentence = "S" + std::to_string(i);
    if (out.find(sentence) != std::string::npos) ++kept;
  }
  CHECK(kept == 8);
  CHECK(out.find("REWRITTEN") != std::string::npos);

  // Deterministic in the seed.
  CHECK(paraphrase_article(cfg, text, 0.2, 7) == out);
  CHECK(paraphrase_article(cfg, text, 0.2, 8) != out);

  // Every prompt targets a contiguous run, not the whole article.
  for (const auto& p : server.prompts()) {
    CHECK(p.rfind("Paraphrase the following article: ", 0) == 0);
    CHECK(p.size() < std::string("Paraphrase the following article: ").size() + text.size());
  }
}

TEST_CASE("round_trip_translate chains two hops") {
  KeyGuard key;

  SUBCASE("identity translator on a single sentence returns the original") {
    MockChatServer server([](const std::string& p) { return prompt_payload(p); });
    ChatEndpointConfig cfg = test_cfg(server);
    CHECK(round_trip_translate(cfg, "Only one sentence here.", "Chinese") ==
          "Only one sentence here.");
    auto prompts = server.prompts();
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[0] == "Translate the following article into Chinese: Only one sentence here.");
    CHECK(prompts[1] == "Translate the following article into English: Only one sentence here.");
  }
  SUBCASE("only the final hop is leak-stripped") {
    MockChatServer server([](const std::string& p) -> std::string {
      if (p.rfind("Translate the following article into English:", 0) == 0) {
        return "Final preamble to drop. BACK " + prompt_payload(p);
      }
      return "Hop-one preamble kept. PIVOT TEXT.";
    });
    ChatEndpointConfig cfg = test_cfg(server);
    std::string out = round_trip_translate(cfg, "Original body. More body.", "French");
    // The intermediate still carries its preamble when fed to hop two.
    CHECK(server.prompts().at(1) ==
          "Translate the following article into English: Hop-one preamble kept. PIVOT TEXT.");
    CHECK(out == "BACK Hop-one preamble kept. PIVOT TEXT.");
  }
  SUBCASE("unsupported language") {
    MockChatServer server([](const std::string& p) { return prompt_payload(p); });
    CHECK_THROWS_AS(round_trip_translate(test_cfg(server), "x.", "German"), ConfigError);
  }
}

TEST_CASE("humanize_article") {
  KeyGuard key;
  MockChatServer server(
      [](const std::string& p) { return "Rewrite incoming. HUMAN " + prompt_payload(p); });
  ChatEndpointConfig cfg = test_cfg(server);
  CHECK(humanize_article(cfg, "Robotic text.") == "HUMAN Robotic text.");
  CHECK(server.prompts().at(0) ==
        "Rewrite this text to make it sound more natural and human-written: Robotic text.");
  CHECK_THROWS_AS(humanize_article(cfg, ""), ConfigError);
}

TEST_CASE("build_corpus emits one child per enabled category") {
  KeyGuard key;
  // Fixed reply: an echoing responder would re-inject the unstripped hop-one
  // intermediate into the final translation output and defeat the leak check.
  MockChatServer server([](const std::string&) {
    return "LEAKMARK preamble sentence. BODY text for everyone.";
  });
  ChatEndpointConfig cfg = test_cfg(server);

  std::vector<Document> humans = {human_doc("news-1", "Alpha starts here. Beta follows after."),
                                  human_doc("news-2", "Gamma leads off. Delta closes it.")};
  auto result = build_corpus(cfg, humans, {"Chinese", "Spanish", "French", "Russian"}, 99);

  CHECK(result.documents.size() == 16);  // 2 originals + 2*7 children
  CHECK(result.failures.empty());

  std::map<CategoryLabel, int> counts;
  for (const auto& d : result.documents) ++counts[d.label];
  CHECK(counts[CategoryLabel::human] == 2);
  for (int c = 1; c < 8; ++c) CHECK(counts[static_cast<CategoryLabel>(c)] == 2);

  for (const auto& d : result.documents) {
    if (d.label == CategoryLabel::human) continue;
    // id lineage, generator, label consistency
    auto colon = d.id.find(':');
    REQUIRE(colon != std::string::npos);
    CHECK(d.id.substr(colon + 1) == std::string(to_string(d.label)));
    CHECK(d.generator_id == "mock-llm");
    // leak-strip ran exactly once: the preamble is gone, the body survives
    CHECK(d.text.find("LEAKMARK") == std::string::npos);
    CHECK(d.text.find("BODY") != std::string::npos);
    if (is_translated(d.label)) {
      CHECK(d.meta.at("source_language") == std::string(source_language_for(d.label)));
      CHECK(d.meta.at("bleu_roundtrip").is_number());
    }
  }

  // Sorted by id.
  for (size_t i = 1; i < result.documents.size(); ++i) {
    CHECK(result.documents[i - 1].id < result.documents[i].id);
  }
}

TEST_CASE("build_corpus golden transcript") {
  KeyGuard key;
  MockChatServer server([](const std::string& p) {
    return "Preamble goes away. CONTENT " + prompt_payload(p);
  });
  ChatEndpointConfig cfg = test_cfg(server);

  std::vector<Document> humans = {human_doc("a1", "Title sentence one. Second sentence two.")};
  auto result = build_corpus(cfg, humans, {"Chinese"}, 5);
  CHECK(result.documents.size() == 5);

  auto prompts = server.prompts();
  REQUIRE(prompts.size() == 5);
  CHECK(prompts[0] ==
        "Write an article on the following title, ensuring that the article consists of "
        "approximately 2 sentences: Title sentence one.");
  // The mock echoes the payload after the first ": ", so the generated text is
  // "CONTENT Title sentence one." once its preamble sentence is stripped.
  CHECK(prompts[1] ==
        "Rewrite this text to make it sound more natural and human-written: "
        "CONTENT Title sentence one.");
  CHECK(prompts[2] ==
        "Paraphrase the following article: Title sentence one. Second sentence two.");
  CHECK(prompts[3] ==
        "Translate the following article into Chinese: Title sentence one. Second sentence two.");
  // Hop two sees the hop-one completion verbatim, preamble included.
  CHECK(prompts[4] ==
        "Translate the following article into English: Preamble goes away. CONTENT Title "
        "sentence one. Second sentence two.");

  // Byte-stability: a rerun produces the identical transcript.
  MockChatServer server2([](const std::string& p) {
    return "Preamble goes away. CONTENT " + prompt_payload(p);
  });
  ChatEndpointConfig cfg2 = test_cfg(server2);
  build_corpus(cfg2, humans, {"Chinese"}, 5);
  CHECK(server2.prompts() == prompts);
}

TEST_CASE("build_corpus respects the language filter and title metadata") {
  KeyGuard key;
  MockChatServer server([](const std::string& p) { return "Drop me. KEEP " + prompt_payload(p); });
  ChatEndpointConfig cfg = test_cfg(server);

  Document h = human_doc("m1", "Body text here. And more body.");
  h.meta["title"] = "Provided Headline";
  auto result = build_corpus(cfg, {h}, {"Russian"}, 1);

  std::set<std::string> labels;
  for (const auto& d : result.documents) labels.insert(std::string(to_string(d.label)));
  CHECK(labels ==
        std::set<std::string>{"human", "generated", "humanized", "paraphrased", "translated_ru"});
  CHECK(server.prompts().at(0).find("Provided Headline") != std::string::npos);

  CHECK_THROWS_AS(build_corpus(cfg, {h}, {"Klingon"}, 1), ConfigError);

  Document not_human = h;
  not_human.label = CategoryLabel::generated;
  CHECK_THROWS_AS(build_corpus(cfg, {not_human}, {"Russian"}, 1), DataError);
}

TEST_CASE("build_corpus failure budget") {
  KeyGuard key;
  MockChatServer server([](const std::string& p) { return "Skip intro. OK " + prompt_payload(p); });
  ChatEndpointConfig cfg = test_cfg(server);
  cfg.max_retries = 0;

  SUBCASE("failures within budget are reported, not fatal") {
    std::vector<Document> humans;
    for (int i = 0; i < 10; ++i) {
      humans.push_back(human_doc("doc-" + std::to_string(i),
                                 i == 0 ? "FAILME poisoned text. Extra sentence."
                                        : "Fine text " + std::to_string(i) + ". More."));
    }
    auto result = build_corpus(cfg, humans, {"Chinese", "Spanish", "French", "Russian"}, 3);
    CHECK(result.requests_attempted == 70);
    CHECK(result.failures.size() == 7);  // all children of doc-0, humanized via upstream
    for (const auto& f : result.failures) CHECK(f.doc_id == "doc-0");
    CHECK(result.documents.size() == 10 + 63);
  }
  SUBCASE("exceeding the budget aborts") {
    std::vector<Document> humans;
    for (int i = 0; i < 5; ++i) {
      humans.push_back(human_doc("doc-" + std::to_string(i),
                                 i == 0 ? "FAILME poisoned text. Extra sentence."
                                        : "Fine text " + std::to_string(i) + ". More."));
    }
    CHECK_THROWS_AS(build_corpus(cfg, humans, {"Chinese", "Spanish", "French", "Russian"}, 3),
                    DataError);
  }
}

TEST_CASE("build_corpus with concurrency produces the same sorted corpus") {
  KeyGuard key;
  MockChatServer server([](const std::string& p) { return "Intro out. SAME " + prompt_payload(p); });
  ChatEndpointConfig cfg = test_cfg(server);

  std::vector<Document> humans;
  for (int i = 0; i < 6; ++i) {
    humans.push_back(human_doc("c" + std::to_string(i), "Seed text " + std::to_string(i) + ". Tail."));
  }
  BuildOptions serial;
  BuildOptions parallel;
  parallel.max_concurrency = 4;
  auto a = build_corpus(cfg, humans, {"Chinese", "French"}, 11, serial);
  auto b = build_corpus(cfg, humans, {"Chinese", "French"}, 11, parallel);
  REQUIRE(a.documents.size() == b.documents.size());
  for (size_t i = 0; i < a.documents.size(); ++i) {
    CHECK(a.documents[i].id == b.documents[i].id);
    CHECK(a.documents[i].text == b.documents[i].text);
  }
}

TEST_CASE("synth corpus determinism and shape") {
  SyntheticConfig cfg;
  cfg.seed = 42;
  cfg.docs_per_class = 25;

  auto a = synth_corpus(cfg);
  auto b = synth_corpus(cfg);
  CHECK(a.size() == 200);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].text == b[i].text);
    CHECK(a[i].split == b[i].split);
  }

  std::map<CategoryLabel, int> counts;
  std::map<std::string, int> splits;
  for (const auto& d : a) {
    d.validate();
    ++counts[d.label];
    ++splits[d.split];
  }
  for (int c = 0; c < 8; ++c) CHECK(counts[static_cast<CategoryLabel>(c)] == 25);
  // Per 25-doc stratum: 20 train, and the leftover seat goes to val (earlier
  // in the apportionment order), giving 3 val / 2 test.
  CHECK(splits["train"] == 160);
  CHECK(splits["val"] == 24);
  CHECK(splits["test"] == 16);

  SyntheticConfig other = cfg;
  other.seed = 43;
  auto c = synth_corpus(other);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) differs = differs || a[i].text != c[i].text;
  CHECK(differs);
}

TEST_CASE("synth corpus marker vocabularies are disjoint at confusability 0") {
  SyntheticConfig cfg;
  cfg.seed = 7;
  cfg.docs_per_class = 10;
  cfg.confusability = 0.0;
  auto docs = synth_corpus(cfg);

  std::map<CategoryLabel, std::set<std::string>> markers;
  for (const auto& d : docs) {
    for (const auto& tok : tokenize(d.text)) {
      if (tok.rfind("m", 0) == 0 && tok.size() > 1 && !isdigit(tok[1]) && tok[1] != '.') {
        markers[d.label].insert(tok);
      }
    }
  }
  auto gen = markers[CategoryLabel::generated];
  auto hum = markers[CategoryLabel::humanized];
  for (const auto& m : gen) {
    CHECK(hum.count(m) == 0);
    CHECK(m.rfind("mgenerated", 0) == 0);
  }
  for (const auto& m : hum) CHECK(m.rfind("mhumanized", 0) == 0);
}

TEST_CASE("synth corpus class unigram distributions differ pairwise") {
  SyntheticConfig cfg;
  cfg.seed = 42;
  cfg.docs_per_class = 40;
  cfg.confusability = 0.7;
  auto docs = synth_corpus(cfg);

  std::map<CategoryLabel, std::map<std::string, double>> dist;
  std::map<CategoryLabel, double> totals;
  for (const auto& d : docs) {
    for (const auto& tok : tokenize(d.text)) {
      if (tok == ".") continue;
      dist[d.label][tok] += 1;
      totals[d.label] += 1;
    }
  }

  auto chi2_per_dof = [&](CategoryLabel x, CategoryLabel y) {
    std::set<std::string> words;
    for (const auto& [w, c] : dist[x]) words.insert(w);
    for (const auto& [w, c] : dist[y]) words.insert(w);
    double stat = 0;
    int dof = 0;
    double nx = totals[x], ny = totals[y];
    for (const auto& w : words) {
      double ox = dist[x].count(w) ? dist[x][w] : 0;
      double oy = dist[y].count(w) ? dist[y][w] : 0;
      if (ox + oy < 5) continue;
      double ex = (ox + oy) * nx / (nx + ny);
      double ey = (ox + oy) * ny / (nx + ny);
      stat += (ox - ex) * (ox - ex) / ex + (oy - ey) * (oy - ey) / ey;
      ++dof;
    }
    return stat / std::max(dof, 1);
  };

  for (int x = 0; x < 8; ++x) {
    for (int y = x + 1; y < 8; ++y) {
      CHECK(chi2_per_dof(static_cast<CategoryLabel>(x), static_cast<CategoryLabel>(y)) > 2.0);
    }
  }

  // At confusability 1 the grouped siblings collapse onto the shared profile.
  SyntheticConfig merged = cfg;
  merged.confusability = 1.0;
  auto merged_docs = synth_corpus(merged);
  dist.clear();
  totals.clear();
  for (const auto& d : merged_docs) {
    for (const auto& tok : tokenize(d.text)) {
      if (tok == ".") continue;
      dist[d.label][tok] += 1;
      totals[d.label] += 1;
    }
  }
  CHECK(chi2_per_dof(CategoryLabel::generated, CategoryLabel::humanized) < 1.5);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.confusability = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.confusability = 0.1;
  cfg.docs_per_class = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.docs_per_class = 5;
  cfg.max_sentences = 2;
  cfg.min_sentences = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  SyntheticConfig round = SyntheticConfig::from_json(SyntheticConfig{}.to_json());
  CHECK(round.docs_per_class == 100);
  CHECK(round.confusability == 0.1);
}
