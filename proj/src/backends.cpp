#include "mocoll/backends.hpp"

#include <cmath>
#include <cstdio>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mocoll/error.hpp"
#include "mocoll/io.hpp"
#include "mocoll/text.hpp"

namespace mocoll {

std::string role_name(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

ChatMessage ChatMessage::text(Role role, std::string body) {
  ChatMessage m;
  m.role = role;
  m.parts.push_back(TextPart{std::move(body)});
  return m;
}

bool ChatMessage::has_images() const {
  for (const auto& p : parts)
    if (std::holds_alternative<ImageRefPart>(p)) return true;
  return false;
}

std::string ChatMessage::joined_text() const {
  std::string out;
  for (const auto& p : parts)
    if (const auto* t = std::get_if<TextPart>(&p)) {
      if (!out.empty()) out += '\n';
      out += t->text;
    }
  return out;
}

GenerationParams eval_params() { return GenerationParams{0.0, 4096}; }
GenerationParams curation_params() { return GenerationParams{0.1, 4096}; }

std::string ScriptedBackend::chat(const std::vector<ChatMessage>& messages,
                                  const GenerationParams&) {
  if (messages.empty()) raise("scripted backend: empty message list");
  if (!vision_)
    for (const auto& m : messages)
      if (m.has_images()) raise("image sent to text-only scripted backend");
  std::lock_guard<std::mutex> lock(mu_);
  if (next_ >= script_.size()) raise("script exhausted after ", script_.size(), " replies");
  return script_[next_++];
}

size_t ScriptedBackend::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return next_;
}

std::string RecordingBackend::chat(const std::vector<ChatMessage>& messages,
                                   const GenerationParams& params) {
  std::string reply = inner_->chat(messages, params);
  std::lock_guard<std::mutex> lock(mu_);
  log_.push_back({messages, reply});
  return reply;
}

std::vector<RecordingBackend::Exchange> RecordingBackend::exchanges() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

namespace {

std::string guess_mime(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : to_lower(path.substr(dot + 1));
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  return "image/png";
}

std::string image_ref_to_url(const std::string& ref) {
  if (ref.rfind("data:", 0) == 0 || ref.rfind("http://", 0) == 0 ||
      ref.rfind("https://", 0) == 0)
    return ref;
  return "data:" + guess_mime(ref) + ";base64," + base64_encode(read_file(ref));
}

// base_url -> (host part, path prefix); httplib wants them split.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  std::string rest = base_url;
  size_t scheme = rest.find("://");
  size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  size_t slash = rest.find('/', host_start);
  if (slash == std::string::npos) return {rest, ""};
  std::string prefix = rest.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {rest.substr(0, slash), prefix};
}

}  // namespace

std::string RemoteBackend::build_request_body(const std::string& model,
                                              const std::vector<ChatMessage>& messages,
                                              const GenerationParams& params) {
  nlohmann::json body;
  body["model"] = model;
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    nlohmann::json jm;
    jm["role"] = role_name(m.role);
    if (!m.has_images()) {
      jm["content"] = m.joined_text();
    } else {
      nlohmann::json parts = nlohmann::json::array();
      for (const auto& p : m.parts) {
        if (const auto* t = std::get_if<TextPart>(&p)) {
          parts.push_back({{"type", "text"}, {"text", t->text}});
        } else {
          const auto& img = std::get<ImageRefPart>(p);
          parts.push_back(
              {{"type", "image_url"}, {"image_url", {{"url", image_ref_to_url(img.ref)}}}});
        }
      }
      jm["content"] = parts;
    }
    msgs.push_back(jm);
  }
  body["messages"] = msgs;
  return body.dump();
}

std::string RemoteBackend::parse_response_body(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) raise("remote backend: response is not JSON");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    raise("remote backend: response has no choices");
  const auto& msg = j["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content"))
    raise("remote backend: response missing assistant content");
  const auto& content = msg["message"]["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content)
      if (part.is_object() && part.value("type", "") == "text")
        out += part.value("text", "");
    if (!out.empty()) return out;
  }
  raise("remote backend: response missing assistant content");
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) raise("remote backend: base_url is required");
}

std::string RemoteBackend::chat(const std::vector<ChatMessage>& messages,
                                const GenerationParams& params) {
  if (messages.empty()) raise("remote backend: empty message list");
  if (!config_.vision)
    for (const auto& m : messages)
      if (m.has_images()) raise("image sent to text-only backend ", config_.model);

  const std::string body = build_request_body(config_.model, messages, params);
  auto [host, prefix] = split_base_url(config_.base_url);
  const std::string path = prefix + "/v1/chat/completions";

  httplib::Client client(host);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  if (config_.trace)
    std::fprintf(stderr, "[trace] POST %s%s body=%s\n", host.c_str(), path.c_str(), body.c_str());

  std::string last_error;
  auto backoff = config_.retry.initial_backoff;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    auto res = client.Post(path, headers, body, "application/json");
    if (res) {
      if (config_.trace)
        std::fprintf(stderr, "[trace] status=%d body=%s\n", res->status, res->body.c_str());
      if (res->status >= 200 && res->status < 300) return trim(parse_response_body(res->body));
      bool retryable = res->status == 429 || res->status >= 500;
      last_error = "HTTP status " + std::to_string(res->status);
      if (!retryable) raise("remote backend ", config_.model, ": ", last_error);
    } else {
      last_error = "transport error: " + httplib::to_string(res.error());
      if (config_.trace) std::fprintf(stderr, "[trace] %s\n", last_error.c_str());
    }
    if (attempt < config_.retry.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  raise("remote backend ", config_.model, ": giving up after ", config_.retry.max_attempts,
        " attempts (", last_error, ")");
}

const std::vector<double>* EmbeddingIndex::find(const std::string& id) const {
  auto it = entries.find(id);
  return it == entries.end() ? nullptr : &it->second;
}

EmbeddingIndex load_embedding_index(const std::filesystem::path& path) {
  EmbeddingIndex index;
  for_each_jsonl(path, [&](size_t line_no, const nlohmann::json& rec) {
    if (!rec.contains("case_id") || !rec["case_id"].is_string() || !rec.contains("vector") ||
        !rec["vector"].is_array())
      raise(path.string(), ":", line_no, ": expected {\"case_id\", \"vector\"}");
    std::string id = rec["case_id"].get<std::string>();
    std::vector<double> vec;
    for (const auto& v : rec["vector"]) {
      if (!v.is_number()) raise(path.string(), ":", line_no, ": non-numeric vector entry");
      vec.push_back(v.get<double>());
      if (!std::isfinite(vec.back()))
        raise(path.string(), ":", line_no, ": non-finite vector entry for ", id);
    }
    if (index.entries.empty()) {
      index.dimension = vec.size();
    } else if (vec.size() != index.dimension) {
      raise("embedding index: dimension mismatch for case_id ", id, " (", vec.size(), " vs ",
            index.dimension, ")");
    }
    if (!index.entries.emplace(std::move(id), std::move(vec)).second)
      raise(path.string(), ":", line_no, ": duplicate case_id");
  });
  if (index.entries.empty()) raise("embedding index is empty: ", path.string());
  return index;
}

void save_embedding_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  for (const auto& [id, vec] : index.entries)
    records.push_back({{"case_id", id}, {"vector", vec}});
  write_jsonl(path, records);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    raise("cosine_similarity: dimension mismatch (", a.size(), " vs ", b.size(), ")");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace mocoll
