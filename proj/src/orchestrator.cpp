#include "mocoll/orchestrator.hpp"

#include <atomic>
#include <thread>

#include "mocoll/error.hpp"
#include "mocoll/text.hpp"

namespace mocoll {

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::agent_stop: return "agent_stop";
    case StopReason::max_questions: return "max_questions";
    case StopReason::error: return "error";
  }
  return "error";
}

nlohmann::json Conversation::to_json(const nlohmann::json& model_meta) const {
  nlohmann::json turns_json = nlohmann::json::array();
  for (const auto& t : turns)
    turns_json.push_back({{"i", t.index}, {"q", t.question}, {"a", t.answer}});
  nlohmann::json j{{"case_id", case_id},
                   {"turns", turns_json},
                   {"caption", caption ? nlohmann::json(*caption) : nlohmann::json(nullptr)},
                   {"stop_reason", stop_reason_name(stop_reason)}};
  if (stop_reason == StopReason::error) j["error"] = error_message;
  if (!model_meta.is_null() && !model_meta.empty()) j["model_meta"] = model_meta;
  return j;
}

Conversation Conversation::from_json(const nlohmann::json& j) {
  Conversation c;
  c.case_id = j.at("case_id").get<std::string>();
  for (const auto& t : j.at("turns"))
    c.turns.push_back({t.at("i").get<int>(), t.at("q").get<std::string>(),
                       t.at("a").get<std::string>()});
  if (j.contains("caption") && j["caption"].is_string())
    c.caption = j["caption"].get<std::string>();
  const std::string reason = j.at("stop_reason").get<std::string>();
  if (reason == "agent_stop") c.stop_reason = StopReason::agent_stop;
  else if (reason == "max_questions") c.stop_reason = StopReason::max_questions;
  else c.stop_reason = StopReason::error;
  c.error_message = j.value("error", "");
  return c;
}

namespace {

std::optional<AgentDecision> parse_decision(const std::string& reply) {
  auto j = extract_json_object(reply);
  if (!j) return std::nullopt;
  const std::string action = j->value("action", "");
  if (action == "stop") return AgentDecision::stop();
  if (action == "ask") {
    if (!j->contains("question") || !(*j)["question"].is_string()) return std::nullopt;
    std::string q = trim((*j)["question"].get<std::string>());
    if (q.empty()) return std::nullopt;
    return AgentDecision::ask(std::move(q));
  }
  return std::nullopt;
}

}  // namespace

AgentDecision next_question(ChatBackend& agent, const std::string& case_id,
                            const std::vector<ConversationTurn>& transcript,
                            const ExampleSet& examples, const PromptSet& prompts,
                            const GenerationParams& params) {
  const std::string system = render_template(
      prompts.question_system, {{"examples", render_examples_block(examples)}});
  const std::string user = render_template(
      prompts.question_user,
      {{"case_id", case_id}, {"transcript", render_transcript(transcript, kNoQuestionsText)}});
  std::vector<ChatMessage> messages{ChatMessage::text(Role::system, system),
                                    ChatMessage::text(Role::user, user)};
  std::string reply = agent.chat(messages, params);
  if (auto decision = parse_decision(reply)) return *decision;

  // one corrective re-prompt before giving up
  messages.push_back(ChatMessage::text(Role::assistant, reply));
  messages.push_back(ChatMessage::text(
      Role::user,
      "That reply was not valid. Respond with exactly one JSON object: "
      "{\"action\": \"ask\", \"question\": \"...\"} or {\"action\": \"stop\"}."));
  reply = agent.chat(messages, params);
  if (auto decision = parse_decision(reply)) return *decision;
  raise("agent reply unparseable after re-prompt: ", reply);
}

std::string answer_question(ChatBackend& vqa, const std::string& question,
                            const std::vector<std::string>& image_refs,
                            const GenerationParams& params) {
  if (trim(question).empty()) raise("answer_question: empty question");
  if (image_refs.empty() || image_refs.size() > 4)
    raise("answer_question: need 1-4 image refs, got ", image_refs.size());
  ChatMessage msg;
  msg.role = Role::user;
  for (const auto& ref : image_refs) msg.parts.push_back(ImageRefPart{ref});
  msg.parts.push_back(TextPart{question});
  return trim(vqa.chat({msg}, params));
}

std::string compose_caption(ChatBackend& agent, const std::string& case_id,
                            const std::vector<ConversationTurn>& transcript,
                            const ExampleSet& examples, const PromptSet& prompts,
                            const GenerationParams& params) {
  const std::string system = render_template(
      prompts.caption_system,
      {{"examples", render_examples_block(examples)}, {"instruction", prompts.instruction}});
  const std::string user = render_template(
      prompts.caption_user,
      {{"case_id", case_id}, {"transcript", render_transcript(transcript, kNoFindingsText)}});
  std::string caption = trim(agent.chat(
      {ChatMessage::text(Role::system, system), ChatMessage::text(Role::user, user)}, params));
  if (caption.empty()) raise("caption agent returned an empty reply for case ", case_id);
  return caption;
}

Conversation run_conversation(const CaptionedCase& item, const OrchestratorConfig& config,
                              const BackendSet& backends,
                              const std::vector<const CaptionedCase*>& few_shot_pool,
                              const EmbeddingIndex* index) {
  if (config.max_questions < 1) raise("max_questions must be >= 1");
  if (!backends.agent || !backends.vqa) raise("run_conversation: agent and vqa backends required");

  Conversation conv;
  conv.case_id = item.case_id;
  ExampleSet examples;
  try {
    examples = select_examples(item, few_shot_pool, config.few_shot, index);
  } catch (const std::exception& e) {
    conv.stop_reason = StopReason::error;
    conv.error_message = e.what();
    return conv;
  }

  bool questioning_ok = true;
  for (int j = 1; j <= config.max_questions; ++j) {
    AgentDecision decision;
    try {
      decision = next_question(*backends.agent, item.case_id, conv.turns, examples,
                               config.prompts, config.agent_params);
    } catch (const std::exception& e) {
      conv.stop_reason = StopReason::error;
      conv.error_message = e.what();
      questioning_ok = false;
      break;
    }
    if (decision.kind == AgentDecision::Kind::stop) {
      conv.stop_reason = StopReason::agent_stop;
      break;
    }
    std::string answer;
    try {
      answer = answer_question(*backends.vqa, decision.question, item.image_refs,
                               config.vqa_params);
    } catch (const std::exception& e) {
      conv.stop_reason = StopReason::error;
      conv.error_message = e.what();
      questioning_ok = false;
      break;
    }
    conv.turns.push_back({j, decision.question, answer});
    if (j == config.max_questions) conv.stop_reason = StopReason::max_questions;
  }

  if (questioning_ok && config.with_caption) {
    try {
      conv.caption = compose_caption(*backends.agent, item.case_id, conv.turns, examples,
                                     config.prompts, config.agent_params);
    } catch (const std::exception& e) {
      conv.caption.reset();
      conv.stop_reason = StopReason::error;
      conv.error_message = e.what();
    }
  }
  return conv;
}

std::vector<Conversation> run_batch(const std::vector<CaptionedCase>& cases,
                                    const OrchestratorConfig& config, const BackendSet& backends,
                                    const std::vector<const CaptionedCase*>& few_shot_pool,
                                    const EmbeddingIndex* index, int parallelism,
                                    const ProgressFn& progress) {
  if (parallelism < 1) raise("parallelism must be >= 1");
  std::vector<Conversation> results(cases.size());
  if (cases.empty()) return results;

  std::atomic<size_t> next_index{0};
  std::atomic<size_t> done{0};
  std::mutex progress_mu;
  auto worker = [&] {
    while (true) {
      const size_t i = next_index.fetch_add(1);
      if (i >= cases.size()) return;
      try {
        results[i] = run_conversation(cases[i], config, backends, few_shot_pool, index);
      } catch (const std::exception& e) {
        results[i].case_id = cases[i].case_id;
        results[i].stop_reason = StopReason::error;
        results[i].error_message = e.what();
      }
      const size_t d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mu);
        progress(d, cases.size());
      }
    }
  };

  const auto n_workers = std::min(static_cast<size_t>(parallelism), cases.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  size_t failed = 0;
  for (const auto& c : results)
    if (c.stop_reason == StopReason::error) ++failed;
  if (failed == results.size()) raise("all ", failed, " cases failed; first error: ",
                                      results.front().error_message);
  return results;
}

}  // namespace mocoll
