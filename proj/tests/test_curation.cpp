#include "mocoll/curation.hpp"

#include "doctest.h"
#include "helpers.hpp"
#include "mocoll/error.hpp"
#include "mocoll/io.hpp"

using namespace mocoll;
using mocoll::testing::TempDir;

namespace {

CaptionedCase train_case(const std::string& id, const std::string& report) {
  return {id, {"img://" + id}, report, Split::train};
}

// agent asks `turns` questions then stops; VQA echoes the question
BackendSet counting_backends(int turns) {
  std::vector<std::string> agent_script;
  for (int i = 0; i < turns; ++i)
    agent_script.push_back(R"({"action":"ask","question":"question )" + std::to_string(i + 1) +
                           R"(?"})");
  agent_script.push_back(R"({"action":"stop"})");
  BackendSet set;
  set.agent = std::make_shared<ScriptedBackend>(agent_script);
  set.vqa = std::make_shared<CallbackBackend>(
      [](const std::vector<ChatMessage>& messages, const GenerationParams&) {
        return "answer to: " + messages.back().joined_text();
      },
      true);
  return set;
}

OrchestratorConfig no_examples_config(int m) {
  OrchestratorConfig config;
  config.max_questions = m;
  config.few_shot.k = 0;
  return config;
}

MemoryEntry entry(const std::string& id, const std::string& q, const std::string& a,
                  const std::string& gt) {
  return {id, {"img://" + id}, q, a, gt};
}

}  // namespace

TEST_CASE("strategy parsing") {
  CHECK(SelectionStrategy::parse("none").kind == SelectionKind::none);
  CHECK(SelectionStrategy::parse("agent").kind == SelectionKind::agent_based);
  auto top = SelectionStrategy::parse("top-r=0.5");
  CHECK(top.kind == SelectionKind::top_r_rouge);
  CHECK(top.r == doctest::Approx(0.5));
  CHECK(top.to_string() == "top-r=0.5");
  CHECK_THROWS_AS(SelectionStrategy::parse("top-r=0"), Error);
  CHECK_THROWS_AS(SelectionStrategy::parse("top-r=1.5"), Error);
  CHECK_THROWS_AS(SelectionStrategy::parse("bogus"), Error);
}

TEST_CASE("two cases with a scripted 3-turn loop yield six memories") {
  std::vector<CaptionedCase> cases{train_case("c1", "report one"),
                                   train_case("c2", "report two")};
  // scripted agent is shared; 3 asks + stop per case, serial execution
  std::vector<std::string> agent_script;
  for (int rep = 0; rep < 2; ++rep) {
    for (int i = 0; i < 3; ++i)
      agent_script.push_back(R"({"action":"ask","question":"q)" + std::to_string(i) + R"(?"})");
    agent_script.push_back(R"({"action":"stop"})");
  }
  BackendSet backends;
  backends.agent = std::make_shared<ScriptedBackend>(agent_script);
  backends.vqa = std::make_shared<CallbackBackend>(
      [](const std::vector<ChatMessage>& messages, const GenerationParams&) {
        return "ans " + messages.back().joined_text();
      },
      true);

  auto convs = generate_memory_conversations(cases, no_examples_config(5), backends, {}, nullptr,
                                             /*parallelism=*/1, /*with_caption=*/false);
  std::vector<MemoryEntry> memories;
  for (size_t i = 0; i < cases.size(); ++i)
    for (auto& m : memories_from_conversation(cases[i], convs[i])) memories.push_back(m);
  CHECK(memories.size() == 6);
  CHECK(memories[0].case_id == "c1");
  CHECK(memories[0].ground_truth == "report one");
  CHECK(memories[5].case_id == "c2");
  CHECK(!convs[0].caption.has_value());  // questioning loop only
}

TEST_CASE("a case where the agent stops immediately contributes zero memories, noted in report") {
  std::vector<CaptionedCase> cases{train_case("c1", "report one"),
                                   train_case("c2", "report two")};
  // c1: immediate stop; c2: one question then stop
  BackendSet backends;
  backends.agent = std::make_shared<ScriptedBackend>(std::vector<std::string>{
      R"({"action":"stop"})", R"({"action":"ask","question":"q?"})", R"({"action":"stop"})"});
  backends.vqa = std::make_shared<ScriptedBackend>(std::vector<std::string>{"a."}, true);
  auto result = curate(cases, no_examples_config(3), SelectionStrategy::parse("none"), backends,
                       {}, nullptr, 1);
  CHECK(result.report.n_memories == 1);
  CHECK(result.report.empty_cases == 1);
  REQUIRE(result.report.per_case.size() == 2);
  CHECK(result.report.per_case[0].case_id == "c1");
  CHECK(result.report.per_case[0].n_memories == 0);
  CHECK(result.report.per_case[1].n_memories == 1);
}

TEST_CASE("curate with strategy none keeps everything: selection_ratio = 1.0") {
  std::vector<CaptionedCase> cases{train_case("c1", "report one")};
  BackendSet backends = counting_backends(2);
  auto result = curate(cases, no_examples_config(4), SelectionStrategy::parse("none"), backends,
                       {}, nullptr, 1);
  CHECK(result.report.n_memories == 2);
  CHECK(result.report.n_selected == 2);
  CHECK(result.report.selection_ratio == 1.0);
  // selected examples mirror memories verbatim
  REQUIRE(result.selected.size() == result.memories.size());
  for (size_t i = 0; i < result.selected.size(); ++i) {
    CHECK(result.selected[i].question == result.memories[i].question);
    CHECK(result.selected[i].answer == result.memories[i].answer);
    CHECK(result.selected[i].case_id == result.memories[i].case_id);
  }
}

TEST_CASE("curate errors when zero memories are generated") {
  std::vector<CaptionedCase> cases{train_case("c1", "report one")};
  BackendSet backends = counting_backends(0);  // immediate stop
  CHECK_THROWS_WITH_AS(curate(cases, no_examples_config(3), SelectionStrategy::parse("none"),
                              backends, {}, nullptr, 1),
                       doctest::Contains("zero memories"), Error);
}

TEST_CASE("select_agent_based parses keep verdicts with one re-prompt") {
  PromptSet prompts = PromptSet::defaults();
  CurationReport report;
  MemoryEntry m = entry("c1", "is the heart enlarged?", "the heart is enlarged",
                        "the heart is enlarged. lungs clear.");

  ScriptedBackend yes({R"({"keep": true})"});
  CHECK(select_agent_based(yes, m, prompts, {}, report));

  ScriptedBackend no({R"({"keep": false})"});
  CHECK(!select_agent_based(no, m, prompts, {}, report));
  CHECK(report.parse_drops == 0);

  ScriptedBackend recovered({"hmm", R"({"keep": true})"});
  CHECK(select_agent_based(recovered, m, prompts, {}, report));
  CHECK(report.parse_drops == 0);

  ScriptedBackend hopeless({"hmm", "still not json"});
  CHECK(!select_agent_based(hopeless, m, prompts, {}, report));
  CHECK(report.parse_drops == 1);

  ScriptedBackend dead({});  // script exhausted = backend failure
  CHECK(!select_agent_based(dead, m, prompts, {}, report));
  CHECK(report.backend_drops == 1);
}

TEST_CASE("select_top_r_rouge keeps all memories of the best-scoring cases") {
  // four cases, captions engineered to rank c1 > c2 > c3 > c4
  std::vector<MemoryEntry> memories;
  std::map<std::string, std::string> captions;
  const std::string gt = "alpha beta gamma delta";
  for (const auto& [id, caption] : std::map<std::string, std::string>{
           {"c1", "alpha beta gamma delta"},   // rouge 1.0
           {"c2", "alpha beta gamma x"},       // ~0.75
           {"c3", "alpha beta x y"},           // ~0.5
           {"c4", "alpha x y z"}}) {           // ~0.25
    captions[id] = caption;
    memories.push_back(entry(id, "q1", "a1", gt));
    memories.push_back(entry(id, "q2", "a2", gt));
  }
  auto kept = select_top_r_rouge(memories, captions, 0.5);
  REQUIRE(kept.size() == 4);  // 2 cases x 2 memories
  for (const auto& m : kept) CHECK((m.case_id == "c1" || m.case_id == "c2"));

  // r = 1.0 keeps everything
  CHECK(select_top_r_rouge(memories, captions, 1.0).size() == memories.size());

  // missing caption errors naming the case
  captions.erase("c3");
  CHECK_THROWS_WITH_AS(select_top_r_rouge(memories, captions, 0.5), doctest::Contains("c3"),
                       Error);
}

TEST_CASE("agent_based with an always-true selector equals none; always-false selects nothing") {
  std::vector<CaptionedCase> cases{train_case("c1", "report one")};
  auto always = [](const std::string& verdict) {
    BackendSet backends = counting_backends(3);
    backends.selector = std::make_shared<CallbackBackend>(
        [verdict](const std::vector<ChatMessage>&, const GenerationParams&) { return verdict; });
    return backends;
  };

  auto all = curate(cases, no_examples_config(5), SelectionStrategy::parse("agent"),
                    always(R"({"keep": true})"), {}, nullptr, 1);
  CHECK(all.report.selection_ratio == 1.0);
  CHECK(all.report.n_selected == 3);

  auto none = curate(cases, no_examples_config(5), SelectionStrategy::parse("agent"),
                     always(R"({"keep": false})"), {}, nullptr, 1);
  CHECK(none.report.n_selected == 0);
  CHECK(none.selected.empty());
  // the zero-output error path surfaces at emission
  TempDir tmp;
  CHECK_THROWS_AS(emit_dataset(none.selected, tmp.file("d.jsonl"), DatasetFormat::vqa_jsonl,
                               SelectionStrategy::parse("agent"), "instr"),
                  Error);
}

TEST_CASE("selection ratio is monotone non-increasing in stricter r") {
  std::vector<MemoryEntry> memories;
  std::map<std::string, std::string> captions;
  const std::string gt = "alpha beta gamma delta";
  for (int i = 0; i < 8; ++i) {
    std::string id = "c" + std::to_string(i);
    captions[id] = i % 2 ? "alpha beta" : "alpha beta gamma delta";
    for (int j = 0; j <= i % 3; ++j) memories.push_back(entry(id, "q", "a", gt));
  }
  size_t prev = memories.size() + 1;
  for (double r : {1.0, 0.5, 0.25, 0.125}) {
    auto kept = select_top_r_rouge(memories, captions, r);
    CHECK(kept.size() <= prev);
    prev = kept.size();
  }
}

TEST_CASE("emit_dataset vqa_jsonl round trips and manifest hash matches content") {
  TempDir tmp;
  std::vector<VqaExample> examples{
      {"c1", {"img://c1"}, "is there effusion?", "no effusion."},
      {"c2", {"img://c2", "img2://c2"}, "heart size?", "the heart is enlarged."}};
  auto manifest = emit_dataset(examples, tmp.file("d.jsonl"), DatasetFormat::vqa_jsonl,
                               SelectionStrategy::parse("agent"), "instr");
  CHECK(manifest.n_examples == 2);
  CHECK(manifest.strategy == "agent");
  CHECK(manifest.content_sha256 == sha256_file(tmp.file("d.jsonl")));
  CHECK(manifest.advisory_hparams["learning_rate"] == doctest::Approx(3e-7));
  CHECK(manifest.advisory_hparams["warmup_ratio"] == doctest::Approx(0.03));
  CHECK(manifest.advisory_hparams["epochs_within_dataset"] == 5);
  CHECK(manifest.advisory_hparams["epochs_cross_dataset"] == 1);

  auto back = read_vqa_dataset(tmp.file("d.jsonl"));
  CHECK(back == examples);
}

TEST_CASE("emit_dataset chat_sft_jsonl records validate against the schema") {
  TempDir tmp;
  std::vector<VqaExample> examples{{"c1", {"img://c1"}, "what is seen?", "clear lungs."}};
  emit_dataset(examples, tmp.file("sft.jsonl"), DatasetFormat::chat_sft_jsonl,
               SelectionStrategy::parse("none"), "Provide a diagnostic report.");
  auto records = read_jsonl(tmp.file("sft.jsonl"));
  REQUIRE(records.size() == 1);
  const auto& rec = records[0];
  CHECK(rec["case_id"] == "c1");
  CHECK(rec["images"].size() == 1);
  REQUIRE(rec["messages"].size() == 3);
  CHECK(rec["messages"][0]["role"] == "system");
  CHECK(rec["messages"][0]["content"] == "Provide a diagnostic report.");
  CHECK(rec["messages"][1]["role"] == "user");
  CHECK(rec["messages"][1]["content"] == "<image>\nwhat is seen?");
  CHECK(rec["messages"][2]["role"] == "assistant");
  CHECK(rec["messages"][2]["content"] == "clear lungs.");
}

TEST_CASE("memory file round trip") {
  TempDir tmp;
  std::vector<MemoryEntry> memories{entry("c1", "q?", "a.", "gt report"),
                                    entry("c2", "q2?", "a2.", "gt 2")};
  write_memories(memories, tmp.file("mem.jsonl"));
  auto back = read_memories(tmp.file("mem.jsonl"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].question == "q?");
  CHECK(back[1].ground_truth == "gt 2");
  // documented field names
  auto records = read_jsonl(tmp.file("mem.jsonl"));
  CHECK(records[0].contains("q"));
  CHECK(records[0].contains("a"));
  CHECK(records[0].contains("images"));
  CHECK(records[0].contains("ground_truth"));
}
