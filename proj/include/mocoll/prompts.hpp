#ifndef MOCOLL_PROMPTS_HPP
#define MOCOLL_PROMPTS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mocoll/retrieval.hpp"

namespace mocoll {

struct ConversationTurn {
  int index = 0;  // 1-based
  std::string question;
  std::string answer;
};

// Prompt templates for the three agent roles. Placeholders are written
// {name}; validate() checks the required ones are present.
struct PromptSet {
  std::string question_system;  // {examples}
  std::string question_user;    // {case_id}, {transcript}
  std::string caption_system;   // {examples}, {instruction}
  std::string caption_user;     // {case_id}, {transcript}
  std::string select_system;
  std::string select_user;      // {question}, {answer}, {ground_truth}
  std::string instruction = "Provide a diagnostic report based on the given image(s).";

  static PromptSet defaults();
  void validate() const;
};

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& vars);

/// "" when the set is empty (no example block), otherwise a numbered
/// "Example reports" block terminated by a blank line.
std::string render_examples_block(const ExampleSet& examples);

// Numbered transcript:
//   1. Q: <question>
//      A: <answer>
// Empty transcripts render as the given placeholder text.
std::string render_transcript(const std::vector<ConversationTurn>& turns,
                              std::string_view empty_text);

constexpr std::string_view kNoQuestionsText = "(no questions asked yet)";
constexpr std::string_view kNoFindingsText = "no findings gathered";
constexpr std::string_view kExamplesHeader = "Example reports from similar studies:";

/// First balanced {...} object in a model reply, tolerant of surrounding
/// prose and markdown fences. nullopt when nothing parses.
std::optional<nlohmann::json> extract_json_object(const std::string& reply);

}  // namespace mocoll

#endif  // MOCOLL_PROMPTS_HPP
