#ifndef MOCOLL_ORCHESTRATOR_HPP
#define MOCOLL_ORCHESTRATOR_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mocoll/backends.hpp"
#include "mocoll/corpus.hpp"
#include "mocoll/prompts.hpp"
#include "mocoll/retrieval.hpp"

namespace mocoll {

enum class StopReason { agent_stop, max_questions, error };

std::string stop_reason_name(StopReason r);

struct Conversation {
  std::string case_id;
  std::vector<ConversationTurn> turns;
  std::optional<std::string> caption;  // present iff the captioning step ran
  StopReason stop_reason = StopReason::error;
  std::string error_message;

  nlohmann::json to_json(const nlohmann::json& model_meta = {}) const;
  static Conversation from_json(const nlohmann::json& j);
};

struct AgentDecision {
  enum class Kind { ask, stop };
  Kind kind = Kind::stop;
  std::string question;

  static AgentDecision ask(std::string q) { return {Kind::ask, std::move(q)}; }
  static AgentDecision stop() { return {Kind::stop, {}}; }
};

struct OrchestratorConfig {
  // Maximum questions per conversation. Defaults to 6 (within-dataset
  // evaluation); cross-dataset runs typically use 3.
  int max_questions = 6;
  FewShotConfig few_shot;
  GenerationParams agent_params = eval_params();
  GenerationParams vqa_params = eval_params();
  PromptSet prompts = PromptSet::defaults();
  bool with_caption = true;  // curation runs the questioning loop only
};

struct BackendSet {
  std::shared_ptr<ChatBackend> agent;     // questioning + captioning roles
  std::shared_ptr<ChatBackend> vqa;       // vision tool
  std::shared_ptr<ChatBackend> selector;  // curation only
};

// One questioning step: prompts the agent with the transcript and few-shot
// examples, expects {"action":"ask","question":...} or {"action":"stop"}.
// One corrective re-prompt on parse failure, then an error.
AgentDecision next_question(ChatBackend& agent, const std::string& case_id,
                            const std::vector<ConversationTurn>& transcript,
                            const ExampleSet& examples, const PromptSet& prompts,
                            const GenerationParams& params);

/// One VQA step: sends the image refs plus the question, returns the
/// trimmed answer.
std::string answer_question(ChatBackend& vqa, const std::string& question,
                            const std::vector<std::string>& image_refs,
                            const GenerationParams& params);

/// Captioning step over the recorded transcript. Empty transcripts are
/// rendered as "no findings gathered". Errors on an empty reply.
std::string compose_caption(ChatBackend& agent, const std::string& case_id,
                            const std::vector<ConversationTurn>& transcript,
                            const ExampleSet& examples, const PromptSet& prompts,
                            const GenerationParams& params);

// The full collaboration loop for one case: up to max_questions rounds of
// next_question/answer_question, then compose_caption (unless disabled).
// Backend failures yield stop_reason = error with the partial transcript.
Conversation run_conversation(const CaptionedCase& item, const OrchestratorConfig& config,
                              const BackendSet& backends,
                              const std::vector<const CaptionedCase*>& few_shot_pool,
                              const EmbeddingIndex* index);

using ProgressFn = std::function<void(size_t done, size_t total)>;

/// Batch driver: output order matches input order, per-case failures are
/// isolated, results are independent of the parallelism level as long as
/// backends are content-keyed.
std::vector<Conversation> run_batch(const std::vector<CaptionedCase>& cases,
                                    const OrchestratorConfig& config, const BackendSet& backends,
                                    const std::vector<const CaptionedCase*>& few_shot_pool,
                                    const EmbeddingIndex* index, int parallelism,
                                    const ProgressFn& progress = {});

}  // namespace mocoll

#endif  // MOCOLL_ORCHESTRATOR_HPP
