#include "mocoll/prompts.hpp"

#include "mocoll/error.hpp"

namespace mocoll {

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.question_system =
      "You are a medical reporting agent collaborating with a visual question answering "
      "tool. You cannot see the images; the tool can. Ask one short, specific question at "
      "a time to uncover the findings needed for a complete report.\n"
      "{examples}"
      "Respond with a single JSON object and nothing else:\n"
      "  {\"action\": \"ask\", \"question\": \"<next question for the tool>\"}\n"
      "  {\"action\": \"stop\"}  when you have enough information to write the report\n";
  p.question_user =
      "Case: {case_id}\n"
      "Conversation so far:\n"
      "{transcript}\n"
      "Decide your next action.";
  p.caption_system =
      "You are a medical reporting agent. {instruction} Base the report only on the "
      "question-answer findings below.\n"
      "{examples}"
      "Write the report text and nothing else.\n";
  p.caption_user =
      "Case: {case_id}\n"
      "Findings gathered:\n"
      "{transcript}";
  p.select_system =
      "You review one question-answer pair produced by a visual question answering tool. "
      "Decide whether the answer is consistent with the ground-truth report. Respond with "
      "a single JSON object and nothing else: {\"keep\": true} or {\"keep\": false}.";
  p.select_user =
      "Question: {question}\n"
      "Answer: {answer}\n"
      "Ground-truth report: {ground_truth}";
  return p;
}

namespace {
void require_placeholder(const std::string& tmpl, const char* tmpl_name, const char* ph) {
  if (tmpl.find(ph) == std::string::npos)
    raise("prompt template ", tmpl_name, " is missing required placeholder ", ph);
}
}  // namespace

void PromptSet::validate() const {
  require_placeholder(question_system, "question_system", "{examples}");
  require_placeholder(question_user, "question_user", "{case_id}");
  require_placeholder(question_user, "question_user", "{transcript}");
  require_placeholder(caption_system, "caption_system", "{examples}");
  require_placeholder(caption_system, "caption_system", "{instruction}");
  require_placeholder(caption_user, "caption_user", "{case_id}");
  require_placeholder(caption_user, "caption_user", "{transcript}");
  require_placeholder(select_user, "select_user", "{question}");
  require_placeholder(select_user, "select_user", "{answer}");
  require_placeholder(select_user, "select_user", "{ground_truth}");
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string render_examples_block(const ExampleSet& examples) {
  if (examples.examples.empty()) return "";
  std::string out(kExamplesHeader);
  out += '\n';
  for (size_t i = 0; i < examples.examples.size(); ++i) {
    out += std::to_string(i + 1);
    out += ". ";
    out += examples.examples[i].caption;
    out += '\n';
  }
  out += '\n';
  return out;
}

std::string render_transcript(const std::vector<ConversationTurn>& turns,
                              std::string_view empty_text) {
  if (turns.empty()) return std::string(empty_text);
  std::string out;
  for (const auto& t : turns) {
    out += std::to_string(t.index);
    out += ". Q: ";
    out += t.question;
    out += "\n   A: ";
    out += t.answer;
    out += '\n';
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::optional<nlohmann::json> extract_json_object(const std::string& reply) {
  size_t start = reply.find('{');
  while (start != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < reply.size(); ++i) {
      char c = reply[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          auto j = nlohmann::json::parse(reply.substr(start, i - start + 1), nullptr, false);
          if (!j.is_discarded() && j.is_object()) return j;
          break;
        }
      }
    }
    start = reply.find('{', start + 1);
  }
  return std::nullopt;
}

}  // namespace mocoll
