#include "mocoll/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "mocoll/error.hpp"
#include "mocoll/io.hpp"
#include "mocoll/rng.hpp"
#include "mocoll/text.hpp"

namespace mocoll {

FindingWorld FindingWorld::defaults() {
  FindingWorld w;
  w.vocabulary = {"pleural effusion", "cardiomegaly",    "pneumothorax",
                  "consolidation",    "pulmonary edema", "rib fracture",
                  "hyperinflation",   "atelectasis",     "aortic tortuosity",
                  "spinal osteophytes"};
  return w;
}

void FindingWorld::validate() const {
  if (vocabulary.size() < 8)
    raise("finding world needs a vocabulary of >= 8 templates, got ", vocabulary.size());
  for (size_t i = 0; i < vocabulary.size(); ++i) {
    if (trim(vocabulary[i]).empty()) raise("finding world: empty vocabulary entry");
    for (size_t j = 0; j < vocabulary.size(); ++j) {
      if (i != j && contains_ci(vocabulary[j], vocabulary[i]))
        raise("finding world: vocabulary entry \"", vocabulary[i],
              "\" is a substring of \"", vocabulary[j],
              "\" (names must be containment-free so answers verify exactly)");
    }
  }
  if (min_findings < 1 || max_findings < min_findings ||
      static_cast<size_t>(max_findings) > vocabulary.size())
    raise("finding world: need 1 <= min_findings <= max_findings <= |vocabulary|");
  if (max_images < 1 || max_images > 4) raise("finding world: max_images must be in 1..4");
}

bool SimCase::has_finding(const std::string& name) const {
  for (const auto& f : findings)
    if (f.name == name) return true;
  return false;
}

std::string finding_sentence(const std::string& name, bool present) {
  return present ? "there is " + name + "." : "there is no " + name + ".";
}

std::string render_report(const SimCase& sim) {
  std::string out;
  for (const auto& f : sim.findings) {
    if (!out.empty()) out += ' ';
    out += finding_sentence(f.name, f.present);
  }
  return out;
}

const SimCase* SimWorld::find(const std::string& case_id) const {
  for (const auto& c : cases)
    if (c.base.case_id == case_id) return &c;
  return nullptr;
}

std::vector<CaptionedCase> SimWorld::captioned_cases() const {
  std::vector<CaptionedCase> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.base);
  return out;
}

std::vector<const CaptionedCase*> SimWorld::case_pointers() const {
  std::vector<const CaptionedCase*> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(&c.base);
  return out;
}

std::shared_ptr<SimWorld> generate_world(const FindingWorld& world, int n_cases) {
  world.validate();
  if (n_cases < 1) raise("generate_world: n_cases must be >= 1, got ", n_cases);

  auto out = std::make_shared<SimWorld>();
  out->vocabulary = world.vocabulary;
  out->index.dimension = 2 * world.vocabulary.size();
  Rng rng(world.seed);
  const int span = world.max_findings - world.min_findings + 1;

  for (int i = 0; i < n_cases; ++i) {
    SimCase sim;
    char id[32];
    std::snprintf(id, sizeof(id), "sim-%05d", i);
    sim.base.case_id = id;

    const int n_f = world.min_findings + static_cast<int>(rng.below(static_cast<uint64_t>(span)));
    auto picks = rng.sample_indices(world.vocabulary.size(), static_cast<size_t>(n_f));
    std::sort(picks.begin(), picks.end());  // report follows vocabulary order
    std::vector<double> onehot(out->index.dimension, 0.0);
    for (size_t idx : picks) {
      bool present = rng.below(2) == 1;
      sim.findings.push_back({world.vocabulary[idx], present});
      onehot[2 * idx + (present ? 0 : 1)] = 1.0;
    }

    const auto n_img = static_cast<size_t>(1 + rng.below(static_cast<uint64_t>(world.max_images)));
    for (size_t k = 0; k < n_img; ++k)
      sim.base.image_refs.push_back("sim://" + sim.base.case_id + "/" + std::to_string(k));
    sim.base.report_text = render_report(sim);
    sim.base.split = Split::train;

    out->index.entries[sim.base.case_id] = std::move(onehot);
    out->cases.push_back(std::move(sim));
  }
  return out;
}

std::string scripted_vqa(const SimCase& sim, const std::string& question, double epsilon,
                         uint64_t seed) {
  const SimFinding* best = nullptr;
  for (const auto& f : sim.findings) {
    if (contains_ci(question, f.name) && (!best || f.name.size() > best->name.size())) best = &f;
  }
  if (!best) return std::string(kCannotAnswer);
  const bool flip = hash_real01(seed, sim.base.case_id, question) < epsilon;
  return finding_sentence(best->name, flip ? !best->present : best->present);
}

bool scripted_selector(const MemoryEntry& entry) {
  if (entry.answer == kCannotAnswer) return false;
  if (entry.answer.empty()) return false;
  return entry.ground_truth.find(entry.answer) != std::string::npos;
}

bool answer_is_correct(const SimWorld& world, const MemoryEntry& entry) {
  const SimCase* sim = world.find(entry.case_id);
  if (!sim) return false;
  for (const auto& f : sim->findings)
    if (entry.answer == finding_sentence(f.name, f.present)) return true;
  return false;
}

double finding_recall(const SimCase& sim, const Conversation& conv) {
  if (sim.findings.empty()) return 1.0;
  size_t hit = 0;
  for (const auto& f : sim.findings) {
    const std::string truth = finding_sentence(f.name, f.present);
    for (const auto& t : conv.turns) {
      if (t.answer.find(truth) != std::string::npos) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(sim.findings.size());
}

// ---------------------------------------------------------------------------
// Sim chat backends. These parse the default PromptSet renderings (the
// "Case:" header, numbered "N. Q:" transcript lines), which keeps them pure
// functions of message content: replies do not depend on call order.
// ---------------------------------------------------------------------------

namespace {

std::string parse_case_id(const std::string& user_text) {
  std::istringstream in(user_text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Case: ", 0) == 0) return trim(line.substr(6));
  }
  raise("sim backend: no \"Case:\" header in prompt");
}

std::vector<std::string> parse_transcript_questions(const std::string& user_text) {
  std::vector<std::string> questions;
  std::istringstream in(user_text);
  std::string line;
  while (std::getline(in, line)) {
    size_t p = line.find_first_not_of(' ');
    if (p == std::string::npos) continue;
    size_t q = line.find(". Q: ", p);
    if (q == std::string::npos) continue;
    bool numbered = true;
    for (size_t i = p; i < q; ++i)
      if (!std::isdigit(static_cast<unsigned char>(line[i]))) numbered = false;
    if (numbered) questions.push_back(line.substr(q + 5));
  }
  return questions;
}

std::vector<std::string> parse_transcript_answers(const std::string& user_text) {
  std::vector<std::string> answers;
  std::istringstream in(user_text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.rfind("A: ", 0) == 0) answers.push_back(t.substr(3));
  }
  return answers;
}

std::string last_user_text(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == Role::user) return it->joined_text();
  raise("sim backend: no user message");
}

std::string system_text(const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages)
    if (m.role == Role::system) return m.joined_text();
  return "";
}

class SimAgentBackend : public ChatBackend {
 public:
  SimAgentBackend(std::shared_ptr<const SimWorld> world, SimConfig config)
      : world_(std::move(world)), config_(config) {}

  std::string chat(const std::vector<ChatMessage>& messages, const GenerationParams&) override {
    const std::string user = last_user_text(messages);
    const SimCase* sim = world_->find(parse_case_id(user));
    if (!sim) raise("sim agent: unknown case in prompt");
    const bool question_mode = system_text(messages).find("\"action\"") != std::string::npos;
    return question_mode ? next_action(*sim, user) : caption(*sim, user);
  }

  std::string name() const override { return "sim-agent"; }

 private:
  std::string ask(const std::string& finding) const {
    nlohmann::json j{{"action", "ask"},
                     {"question", "Is there evidence of " + finding + "?"}};
    return j.dump();
  }

  std::string next_action(const SimCase& sim, const std::string& user) const {
    const auto asked = parse_transcript_questions(user);
    if (config_.policy == AgentPolicy::stop_after &&
        asked.size() >= static_cast<size_t>(std::max(0, config_.stop_after)))
      return "{\"action\": \"stop\"}";
    if (config_.policy == AgentPolicy::random) {
      const double r = hash_real01(config_.seed, sim.base.case_id,
                                   "turn-" + std::to_string(asked.size()));
      const auto& vocab = world_->vocabulary;
      return ask(vocab[static_cast<size_t>(r * static_cast<double>(vocab.size()))]);
    }
    // coverage: ask the first case finding not named by a previous question
    for (const auto& f : sim.findings) {
      bool already = false;
      for (const auto& q : asked)
        if (contains_ci(q, f.name)) already = true;
      if (!already) return ask(f.name);
    }
    return "{\"action\": \"stop\"}";
  }

  std::string caption(const SimCase& sim, const std::string& user) const {
    // reconstruct the report from transcript answers, last value wins
    std::map<std::string, bool> seen;
    for (const auto& a : parse_transcript_answers(user)) {
      for (const auto& f : sim.findings) {
        if (a.find(finding_sentence(f.name, false)) != std::string::npos)
          seen[f.name] = false;
        else if (a.find(finding_sentence(f.name, true)) != std::string::npos)
          seen[f.name] = true;
      }
    }
    std::string out;
    for (const auto& f : sim.findings) {
      auto it = seen.find(f.name);
      if (it == seen.end()) continue;
      if (!out.empty()) out += ' ';
      out += finding_sentence(f.name, it->second);
    }
    return out.empty() ? "no findings." : out;
  }

  std::shared_ptr<const SimWorld> world_;
  SimConfig config_;
};

class SimVqaBackend : public ChatBackend {
 public:
  SimVqaBackend(std::shared_ptr<const SimWorld> world, SimConfig config)
      : world_(std::move(world)), config_(config) {}

  std::string chat(const std::vector<ChatMessage>& messages, const GenerationParams&) override {
    const ChatMessage* user = nullptr;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
      if (it->role == Role::user) {
        user = &*it;
        break;
      }
    if (!user) raise("sim vqa: no user message");
    std::string case_id;
    for (const auto& part : user->parts) {
      if (const auto* img = std::get_if<ImageRefPart>(&part)) {
        // refs look like sim://<case_id>/<k>
        const std::string& ref = img->ref;
        if (ref.rfind("sim://", 0) == 0) {
          size_t slash = ref.find('/', 6);
          case_id = ref.substr(6, slash == std::string::npos ? slash : slash - 6);
        }
      }
    }
    if (case_id.empty()) raise("sim vqa: no sim:// image ref in message");
    const SimCase* sim = world_->find(case_id);
    if (!sim) raise("sim vqa: unknown case ", case_id);
    return scripted_vqa(*sim, user->joined_text(), config_.vqa_error_rate, config_.seed);
  }

  bool supports_vision() const override { return true; }
  std::string name() const override { return "sim-vqa"; }

 private:
  std::shared_ptr<const SimWorld> world_;
  SimConfig config_;
};

class SimSelectorBackend : public ChatBackend {
 public:
  SimSelectorBackend(std::shared_ptr<const SimWorld> world, SimConfig config)
      : world_(std::move(world)), config_(config) {}

  std::string chat(const std::vector<ChatMessage>& messages, const GenerationParams&) override {
    const std::string user = last_user_text(messages);
    MemoryEntry entry;
    std::istringstream in(user);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("Question: ", 0) == 0) entry.question = line.substr(10);
      else if (line.rfind("Answer: ", 0) == 0) entry.answer = line.substr(8);
      else if (line.rfind("Ground-truth report: ", 0) == 0) entry.ground_truth = line.substr(21);
    }
    if (entry.ground_truth.empty()) raise("sim selector: prompt missing ground truth");
    bool keep = scripted_selector(entry);
    if (config_.selector_fidelity < 1.0) {
      const double r = hash_real01(config_.seed ^ 0x5e1ec70a11ull, entry.question, entry.answer);
      if (r < 1.0 - config_.selector_fidelity) keep = !keep;
    }
    return keep ? "{\"keep\": true}" : "{\"keep\": false}";
  }

  std::string name() const override { return "sim-selector"; }

 private:
  std::shared_ptr<const SimWorld> world_;
  SimConfig config_;
};

}  // namespace

std::shared_ptr<ChatBackend> make_sim_agent(std::shared_ptr<const SimWorld> world,
                                            const SimConfig& config) {
  return std::make_shared<SimAgentBackend>(std::move(world), config);
}

std::shared_ptr<ChatBackend> make_sim_vqa(std::shared_ptr<const SimWorld> world,
                                          const SimConfig& config) {
  return std::make_shared<SimVqaBackend>(std::move(world), config);
}

std::shared_ptr<ChatBackend> make_sim_selector(std::shared_ptr<const SimWorld> world,
                                               const SimConfig& config) {
  return std::make_shared<SimSelectorBackend>(std::move(world), config);
}

BackendSet make_sim_backends(std::shared_ptr<const SimWorld> world, const SimConfig& config) {
  BackendSet set;
  set.agent = make_sim_agent(world, config);
  set.vqa = make_sim_vqa(world, config);
  set.selector = make_sim_selector(world, config);
  return set;
}

AgentPolicy agent_policy_from_name(const std::string& name) {
  if (name == "coverage") return AgentPolicy::coverage;
  if (name == "random") return AgentPolicy::random;
  if (name == "stop_after") return AgentPolicy::stop_after;
  raise("unknown agent policy: ", name);
}

std::string agent_policy_name(AgentPolicy p) {
  switch (p) {
    case AgentPolicy::coverage: return "coverage";
    case AgentPolicy::random: return "random";
    case AgentPolicy::stop_after: return "stop_after";
  }
  return "coverage";
}

AblationKind ablation_kind_from_name(const std::string& name) {
  if (name == "icl_count") return AblationKind::icl_count;
  if (name == "conversation_length") return AblationKind::conversation_length;
  if (name == "selection_strategy") return AblationKind::selection_strategy;
  if (name == "data_size") return AblationKind::data_size;
  raise("unknown ablation kind: ", name);
}

std::string ablation_kind_name(AblationKind k) {
  switch (k) {
    case AblationKind::icl_count: return "icl_count";
    case AblationKind::conversation_length: return "conversation_length";
    case AblationKind::selection_strategy: return "selection_strategy";
    case AblationKind::data_size: return "data_size";
  }
  return "conversation_length";
}

std::string AblationTable::to_csv() const {
  std::string out = "grid";
  for (const auto& col : columns) out += "," + col;
  out += '\n';
  for (const auto& row : rows) {
    out += csv_escape(row.grid_point);
    for (const auto& [name, value] : row.values) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), ",%.10g", value);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r{{"grid", row.grid_point}};
    for (const auto& [name, value] : row.values) r[name] = value;
    rows_json.push_back(r);
  }
  return {{"kind", ablation_kind_name(kind)}, {"columns", columns}, {"rows", rows_json}};
}

namespace {

int parse_grid_int(const std::string& s) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    raise("ablation grid point is not an integer: ", s);
  }
}

double mean_recall(const SimWorld& world, const std::vector<Conversation>& convs) {
  double sum = 0.0;
  for (const auto& conv : convs) {
    const SimCase* sim = world.find(conv.case_id);
    sum += sim ? finding_recall(*sim, conv) : 0.0;
  }
  return convs.empty() ? 0.0 : sum / static_cast<double>(convs.size());
}

double selected_precision(const SimWorld& world, const std::vector<VqaExample>& selected) {
  if (selected.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& e : selected) {
    MemoryEntry m{e.case_id, e.image_refs, e.question, e.answer, ""};
    if (answer_is_correct(world, m)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(selected.size());
}

}  // namespace

AblationTable run_ablation(AblationKind kind, const std::vector<std::string>& grid,
                           const AblationSetup& setup) {
  if (grid.empty()) raise("run_ablation: empty grid");
  AblationTable table;
  table.kind = kind;

  switch (kind) {
    case AblationKind::conversation_length: {
      table.columns = {"m", "finding_recall"};
      auto world = generate_world(setup.world, setup.n_cases);
      auto backends = make_sim_backends(world, setup.sim);
      auto cases = world->captioned_cases();
      auto pool = world->case_pointers();
      for (const auto& point : grid) {
        OrchestratorConfig config = setup.orchestrator;
        config.max_questions = parse_grid_int(point);
        config.with_caption = false;
        auto convs = run_batch(cases, config, backends, pool, &world->index, setup.parallelism);
        table.rows.push_back({point,
                              {{"m", static_cast<double>(config.max_questions)},
                               {"finding_recall", mean_recall(*world, convs)}}});
      }
      break;
    }
    case AblationKind::icl_count: {
      table.columns = {"k", "examples_injected", "finding_recall"};
      auto world = generate_world(setup.world, setup.n_cases);
      auto backends = make_sim_backends(world, setup.sim);
      auto cases = world->captioned_cases();
      auto pool = world->case_pointers();
      for (const auto& point : grid) {
        OrchestratorConfig config = setup.orchestrator;
        config.few_shot.k = parse_grid_int(point);
        config.with_caption = false;
        double injected = 0.0;
        for (const auto& c : cases) {
          auto ex = select_examples(c, pool, config.few_shot, &world->index);
          std::set<std::string> distinct;
          for (const auto& e : ex.examples) distinct.insert(e.case_id);
          injected += static_cast<double>(distinct.size());
        }
        injected /= static_cast<double>(cases.size());
        auto convs = run_batch(cases, config, backends, pool, &world->index, setup.parallelism);
        table.rows.push_back({point,
                              {{"k", static_cast<double>(config.few_shot.k)},
                               {"examples_injected", injected},
                               {"finding_recall", mean_recall(*world, convs)}}});
      }
      break;
    }
    case AblationKind::selection_strategy: {
      table.columns = {"precision", "selection_ratio", "n_memories", "n_selected"};
      auto world = generate_world(setup.world, setup.n_cases);
      auto backends = make_sim_backends(world, setup.sim);
      auto cases = world->captioned_cases();
      auto pool = world->case_pointers();
      for (const auto& point : grid) {
        SelectionStrategy strategy = SelectionStrategy::parse(point);
        auto result = curate(cases, setup.orchestrator, strategy, backends, pool, &world->index,
                             setup.parallelism);
        table.rows.push_back(
            {point,
             {{"precision", selected_precision(*world, result.selected)},
              {"selection_ratio", result.report.selection_ratio},
              {"n_memories", static_cast<double>(result.report.n_memories)},
              {"n_selected", static_cast<double>(result.report.n_selected)}}});
      }
      break;
    }
    case AblationKind::data_size: {
      table.columns = {"n_cases", "n_memories", "n_selected", "precision"};
      for (const auto& point : grid) {
        const int n = parse_grid_int(point);
        auto world = generate_world(setup.world, n);
        auto backends = make_sim_backends(world, setup.sim);
        auto cases = world->captioned_cases();
        auto pool = world->case_pointers();
        auto result = curate(cases, setup.orchestrator, SelectionStrategy::parse("agent"),
                             backends, pool, &world->index, setup.parallelism);
        table.rows.push_back(
            {point,
             {{"n_cases", static_cast<double>(n)},
              {"n_memories", static_cast<double>(result.report.n_memories)},
              {"n_selected", static_cast<double>(result.report.n_selected)},
              {"precision", selected_precision(*world, result.selected)}}});
      }
      break;
    }
  }
  return table;
}

}  // namespace mocoll
