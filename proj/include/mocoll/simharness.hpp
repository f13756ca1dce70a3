#ifndef MOCOLL_SIMHARNESS_HPP
#define MOCOLL_SIMHARNESS_HPP

#include <memory>
#include <string>
#include <vector>

#include "mocoll/curation.hpp"
#include "mocoll/orchestrator.hpp"

namespace mocoll {

// Synthetic world: ground truth is a set of discrete findings rendered into
// a report, so coverage, selection precision, and recall claims can be
// checked exactly.
struct FindingWorld {
  std::vector<std::string> vocabulary;  // finding names; >= 8, none a substring of another
  int min_findings = 3;
  int max_findings = 5;
  int max_images = 2;  // images per case drawn from 1..max_images
  uint64_t seed = 0;

  static FindingWorld defaults();
  void validate() const;
};

struct SimFinding {
  std::string name;
  bool present = false;
};

struct SimCase {
  CaptionedCase base;
  std::vector<SimFinding> findings;  // vocabulary order

  bool has_finding(const std::string& name) const;
};

enum class AgentPolicy { coverage, random, stop_after };

AgentPolicy agent_policy_from_name(const std::string& name);
std::string agent_policy_name(AgentPolicy p);

struct SimConfig {
  double vqa_error_rate = 0.0;  // epsilon: probability an answer is negated
  AgentPolicy policy = AgentPolicy::coverage;
  int stop_after = 0;  // stop_after policy only
  double selector_fidelity = 1.0;
  uint64_t seed = 0;
};

/// "there is <name>." / "there is no <name>."
std::string finding_sentence(const std::string& name, bool present);
std::string render_report(const SimCase& sim);

constexpr std::string_view kCannotAnswer = "cannot answer";

class SimWorld {
 public:
  std::vector<std::string> vocabulary;
  std::vector<SimCase> cases;
  EmbeddingIndex index;  // one-hot over finding values, keyed by case_id

  const SimCase* find(const std::string& case_id) const;
  std::vector<CaptionedCase> captioned_cases() const;
  std::vector<const CaptionedCase*> case_pointers() const;
};

/// Deterministic under world.seed; emits the embedding index alongside.
std::shared_ptr<SimWorld> generate_world(const FindingWorld& world, int n_cases);

// Scripted VQA oracle: answers the named finding truthfully with
// probability 1 - epsilon, negated otherwise; the flip depends only on
// (seed, case_id, question) so replays match regardless of call order.
// Questions naming no finding of the case get the "cannot answer" sentinel.
std::string scripted_vqa(const SimCase& sim, const std::string& question, double epsilon,
                         uint64_t seed);

/// Exact selection oracle: true iff the answer sentence appears verbatim in
/// the ground-truth report; "cannot answer" is always dropped.
bool scripted_selector(const MemoryEntry& entry);

/// Hidden-state check used for precision metrics: the answer must equal the
/// true sentence of one of the case's findings.
bool answer_is_correct(const SimWorld& world, const MemoryEntry& entry);

/// Fraction of the case's findings whose true sentence appears in some
/// recorded answer.
double finding_recall(const SimCase& sim, const Conversation& conv);

// Chat backends bridging the sim oracles into the orchestrator. They parse
// the default PromptSet renderings (case header, numbered transcript), so
// they are content-keyed and safe under any parallelism.
std::shared_ptr<ChatBackend> make_sim_agent(std::shared_ptr<const SimWorld> world,
                                            const SimConfig& config);
std::shared_ptr<ChatBackend> make_sim_vqa(std::shared_ptr<const SimWorld> world,
                                          const SimConfig& config);
std::shared_ptr<ChatBackend> make_sim_selector(std::shared_ptr<const SimWorld> world,
                                               const SimConfig& config);
BackendSet make_sim_backends(std::shared_ptr<const SimWorld> world, const SimConfig& config);

enum class AblationKind { icl_count, conversation_length, selection_strategy, data_size };

AblationKind ablation_kind_from_name(const std::string& name);
std::string ablation_kind_name(AblationKind k);

struct AblationRow {
  std::string grid_point;
  std::vector<std::pair<std::string, double>> values;
};

struct AblationTable {
  AblationKind kind = AblationKind::conversation_length;
  std::vector<std::string> columns;
  std::vector<AblationRow> rows;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

struct AblationSetup {
  FindingWorld world = FindingWorld::defaults();
  int n_cases = 50;
  SimConfig sim;
  OrchestratorConfig orchestrator;
  int parallelism = 1;
};

/// One row per grid point. Grids: integers for icl_count /
/// conversation_length / data_size, strategy names for selection_strategy.
AblationTable run_ablation(AblationKind kind, const std::vector<std::string>& grid,
                           const AblationSetup& setup);

}  // namespace mocoll

#endif  // MOCOLL_SIMHARNESS_HPP
