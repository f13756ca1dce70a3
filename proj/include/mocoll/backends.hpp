#ifndef MOCOLL_BACKENDS_HPP
#define MOCOLL_BACKENDS_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

namespace mocoll {

enum class Role { system, user, assistant };

std::string role_name(Role r);

struct TextPart {
  std::string text;
};
struct ImageRefPart {
  std::string ref;  // file path, URI, or data: URL
};
using ContentPart = std::variant<TextPart, ImageRefPart>;

struct ChatMessage {
  Role role = Role::user;
  std::vector<ContentPart> parts;

  static ChatMessage text(Role role, std::string body);
  bool has_images() const;
  std::string joined_text() const;  // text parts concatenated
};

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 4096;
};

// Chat parameter defaults: evaluation runs at temperature 0, curation
// inference at 0.1, the selection agent back at 0.
GenerationParams eval_params();
GenerationParams curation_params();

/// Uniform client for the agent roles and the VQA tool. Implementations
/// must tolerate concurrent chat() calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string chat(const std::vector<ChatMessage>& messages,
                           const GenerationParams& params) = 0;
  virtual bool supports_vision() const { return false; }
  virtual std::string name() const { return "backend"; }
};

/// Replays a fixed list of replies in order; errors once exhausted.
/// Calls are serialized so replay stays deterministic.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> script, bool vision = false)
      : script_(std::move(script)), vision_(vision) {}
  std::string chat(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override;
  bool supports_vision() const override { return vision_; }
  std::string name() const override { return "scripted"; }
  size_t calls() const;

 private:
  std::vector<std::string> script_;
  bool vision_ = false;
  size_t next_ = 0;
  mutable std::mutex mu_;
};

/// Wraps an arbitrary reply function; used for content-keyed test doubles.
class CallbackBackend : public ChatBackend {
 public:
  using Fn = std::function<std::string(const std::vector<ChatMessage>&, const GenerationParams&)>;
  explicit CallbackBackend(Fn fn, bool vision = false) : fn_(std::move(fn)), vision_(vision) {}
  std::string chat(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override {
    return fn_(messages, params);
  }
  bool supports_vision() const override { return vision_; }
  std::string name() const override { return "callback"; }

 private:
  Fn fn_;
  bool vision_ = false;
};

/// Decorator that records every request/response for prompt inspection.
class RecordingBackend : public ChatBackend {
 public:
  struct Exchange {
    std::vector<ChatMessage> request;
    std::string response;
  };
  explicit RecordingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  std::string chat(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override;
  bool supports_vision() const override { return inner_->supports_vision(); }
  std::string name() const override { return inner_->name(); }
  std::vector<Exchange> exchanges() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mu_;
  std::vector<Exchange> log_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};  // doubles per retry: 1s/2s/4s
};

struct RemoteConfig {
  std::string base_url;  // e.g. http://localhost:8000
  std::string model;
  std::string api_key;  // empty -> no Authorization header
  bool vision = false;
  RetryPolicy retry;
  bool trace = false;
  int timeout_seconds = 120;
};

// Client for the /v1/chat/completions wire protocol. Image parts are sent
// as base64 data-URLs; data:/http(s) refs pass through untouched. Retries
// transport failures and 429/5xx with exponential backoff.
class RemoteBackend : public ChatBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  std::string chat(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override;
  bool supports_vision() const override { return config_.vision; }
  std::string name() const override { return "remote:" + config_.model; }

  /// Request body for a message list; exposed for tests and --trace.
  static std::string build_request_body(const std::string& model,
                                        const std::vector<ChatMessage>& messages,
                                        const GenerationParams& params);
  static std::string parse_response_body(const std::string& body);

 private:
  RemoteConfig config_;
};

struct EmbeddingIndex {
  size_t dimension = 0;
  std::map<std::string, std::vector<double>> entries;  // case_id (or image ref) -> vector

  bool contains(const std::string& id) const { return entries.count(id) != 0; }
  const std::vector<double>* find(const std::string& id) const;
};

/// JSONL loader: {"case_id": str, "vector": [float...]} per line.
/// Dimension inferred from the first record; mismatches rejected.
EmbeddingIndex load_embedding_index(const std::filesystem::path& path);
void save_embedding_index(const EmbeddingIndex& index, const std::filesystem::path& path);

/// a.b / (|a||b|); 0 by convention when either norm is zero.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mocoll

#endif  // MOCOLL_BACKENDS_HPP
