#include "mocoll/backends.hpp"

#include <atomic>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "mocoll/error.hpp"
#include "mocoll/io.hpp"

using namespace mocoll;
using mocoll::testing::TempDir;
using mocoll::testing::write_text;

TEST_CASE("scripted backend replays in order and errors when exhausted") {
  ScriptedBackend backend({"A", "B"});
  std::vector<ChatMessage> msg{ChatMessage::text(Role::user, "hi")};
  GenerationParams params;
  CHECK(backend.chat(msg, params) == "A");
  CHECK(backend.chat(msg, params) == "B");
  CHECK_THROWS_WITH_AS(backend.chat(msg, params), doctest::Contains("script exhausted"), Error);
}

TEST_CASE("scripted text-only backend rejects images") {
  ScriptedBackend backend({"A"});
  ChatMessage msg;
  msg.role = Role::user;
  msg.parts.push_back(ImageRefPart{"x.png"});
  msg.parts.push_back(TextPart{"what is this"});
  CHECK_THROWS_AS(backend.chat({msg}, {}), Error);
  ScriptedBackend vision({"A"}, true);
  CHECK(vision.chat({msg}, {}) == "A");
}

TEST_CASE("recording backend captures request and response") {
  auto inner = std::make_shared<ScriptedBackend>(std::vector<std::string>{"pong"});
  RecordingBackend rec(inner);
  CHECK(rec.chat({ChatMessage::text(Role::user, "ping")}, {}) == "pong");
  auto log = rec.exchanges();
  REQUIRE(log.size() == 1);
  CHECK(log[0].request[0].joined_text() == "ping");
  CHECK(log[0].response == "pong");
}

TEST_CASE("cosine similarity identities") {
  CHECK(cosine_similarity({1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({1, 1}, {2, 2}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({0, 0}, {1, 1}) == 0.0);  // zero norm convention
  CHECK(cosine_similarity({1, 2}, {2, 1}) == doctest::Approx(cosine_similarity({2, 1}, {1, 2})));
  CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 0, 0}), Error);
}

TEST_CASE("embedding index loads JSONL and infers dimension") {
  TempDir tmp;
  auto path = write_text(tmp.file("emb.jsonl"),
                         R"({"case_id": "a", "vector": [1, 0, 0, 0]}
{"case_id": "b", "vector": [0, 1, 0, 0]}
)");
  EmbeddingIndex index = load_embedding_index(path);
  CHECK(index.dimension == 4);
  CHECK(index.entries.size() == 2);
  REQUIRE(index.find("a") != nullptr);
  CHECK((*index.find("a"))[0] == 1.0);
}

TEST_CASE("embedding index rejects mixed dimensions naming the case") {
  TempDir tmp;
  auto path = write_text(tmp.file("emb.jsonl"),
                         R"({"case_id": "a", "vector": [1, 0, 0, 0]}
{"case_id": "bad", "vector": [0, 1, 0]}
)");
  CHECK_THROWS_WITH_AS(load_embedding_index(path), doctest::Contains("bad"), Error);
}

TEST_CASE("embedding index rejects empty and malformed files") {
  TempDir tmp;
  CHECK_THROWS_AS(load_embedding_index(write_text(tmp.file("e.jsonl"), "")), Error);
  CHECK_THROWS_AS(load_embedding_index(write_text(tmp.file("m.jsonl"), "not json\n")), Error);
}

TEST_CASE("embedding index save/load round trip") {
  TempDir tmp;
  EmbeddingIndex index;
  index.dimension = 2;
  index.entries["x"] = {0.25, -1.5};
  index.entries["y"] = {1.0, 2.0};
  save_embedding_index(index, tmp.file("out.jsonl"));
  EmbeddingIndex back = load_embedding_index(tmp.file("out.jsonl"));
  CHECK(back.dimension == 2);
  CHECK(back.entries == index.entries);
}

TEST_CASE("chat request body follows the wire protocol") {
  std::vector<ChatMessage> messages{ChatMessage::text(Role::system, "be brief"),
                                    ChatMessage::text(Role::user, "hello")};
  GenerationParams params{0.1, 256};
  auto body = nlohmann::json::parse(RemoteBackend::build_request_body("m1", messages, params));
  CHECK(body["model"] == "m1");
  CHECK(body["temperature"] == doctest::Approx(0.1));
  CHECK(body["max_tokens"] == 256);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "hello");
}

TEST_CASE("image parts become base64 data URLs; data/http refs pass through") {
  TempDir tmp;
  auto img = write_text(tmp.file("pix.png"), "PNGDATA");
  ChatMessage msg;
  msg.role = Role::user;
  msg.parts.push_back(ImageRefPart{img.string()});
  msg.parts.push_back(ImageRefPart{"data:image/png;base64,QUJD"});
  msg.parts.push_back(TextPart{"what?"});
  auto body = nlohmann::json::parse(RemoteBackend::build_request_body("m", {msg}, {}));
  const auto& parts = body["messages"][0]["content"];
  REQUIRE(parts.size() == 3);
  CHECK(parts[0]["type"] == "image_url");
  const std::string url = parts[0]["image_url"]["url"].get<std::string>();
  CHECK(url == "data:image/png;base64," + base64_encode("PNGDATA"));
  CHECK(parts[1]["image_url"]["url"] == "data:image/png;base64,QUJD");
  CHECK(parts[2]["text"] == "what?");
}

TEST_CASE("response parsing extracts assistant content and rejects garbage") {
  CHECK(RemoteBackend::parse_response_body(
            R"({"choices": [{"message": {"content": "hi there"}}]})") == "hi there");
  CHECK(RemoteBackend::parse_response_body(
            R"({"choices": [{"message": {"content": [{"type":"text","text":"multi"}]}}]})") ==
        "multi");
  CHECK_THROWS_AS(RemoteBackend::parse_response_body("{}"), Error);
  CHECK_THROWS_AS(RemoteBackend::parse_response_body("not json"), Error);
  CHECK_THROWS_AS(RemoteBackend::parse_response_body(R"({"choices": []})"), Error);
}

TEST_CASE("remote backend round-trips against a local mock server and retries 5xx") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    if (n == 1) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json reply{
        {"choices",
         {{{"message",
            {{"content", "echo: " + body["messages"].back()["content"].get<std::string>()}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.model = "mock";
  config.retry.max_attempts = 3;
  config.retry.initial_backoff = std::chrono::milliseconds(1);
  RemoteBackend backend(config);
  const std::string reply =
      backend.chat({ChatMessage::text(Role::user, "canned request")}, eval_params());
  CHECK(reply == "echo: canned request");
  CHECK(hits.load() == 2);  // one 500, one success

  server.stop();
  server_thread.join();
}

TEST_CASE("remote backend gives up after max attempts") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.model = "mock";
  config.retry.max_attempts = 3;
  config.retry.initial_backoff = std::chrono::milliseconds(1);
  RemoteBackend backend(config);
  CHECK_THROWS_WITH_AS(backend.chat({ChatMessage::text(Role::user, "x")}, eval_params()),
                       doctest::Contains("3 attempts"), Error);
  CHECK(hits.load() == 3);

  server.stop();
  server_thread.join();
}

TEST_CASE("remote backend refuses images unless vision is declared") {
  RemoteConfig config;
  config.base_url = "http://127.0.0.1:9";  // never contacted
  config.model = "text-only";
  config.vision = false;
  RemoteBackend backend(config);
  ChatMessage msg;
  msg.role = Role::user;
  msg.parts.push_back(ImageRefPart{"x.png"});
  CHECK_THROWS_WITH_AS(backend.chat({msg}, {}), doctest::Contains("text-only"), Error);
}
