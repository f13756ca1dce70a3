#ifndef MOCOLL_CLI_HPP
#define MOCOLL_CLI_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mocoll/curation.hpp"
#include "mocoll/orchestrator.hpp"
#include "mocoll/simharness.hpp"

namespace mocoll {

struct CorpusConfig {
  enum class Kind { manifest, sim_world };
  Kind kind = Kind::manifest;
  std::filesystem::path manifest;
  ManifestFormat format = ManifestFormat::jsonl;
  std::string eval_split = "auto";  // auto | test | train | all
  // sim_world
  FindingWorld world;
  int n_cases = 50;
};

struct RemoteRoleConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env;
  bool vision = false;
};

struct BackendsConfig {
  enum class Kind { sim, scripted, remote };
  Kind kind = Kind::scripted;
  SimConfig sim;
  std::vector<std::string> agent_script, vqa_script, selector_script;
  RemoteRoleConfig agent, vqa, selector;
  bool has_selector = false;
};

// Parsed run configuration; strict about unknown keys. Orchestrator knobs
// stay optional here so each command can apply its own defaults (evaluation
// temperature 0, curation temperature 0.1).
struct RunConfig {
  CorpusConfig corpus;
  std::optional<std::filesystem::path> embedding_index;
  BackendsConfig backends;
  std::optional<int> max_questions;
  std::optional<double> agent_temperature, vqa_temperature;
  std::optional<int> max_tokens;
  std::optional<std::string> instruction;
  FewShotConfig few_shot;
  SelectionStrategy selection;
  std::filesystem::path output_dir = "runs/out";
  int parallelism = 1;
  uint64_t seed = 0;
  bool trace = false;
  nlohmann::json snapshot;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

struct GlobalOptions {
  std::optional<uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<std::string> out_dir;
  bool trace = false;
  bool resume = false;
  bool quiet = false;
};

struct IngestOptions {
  std::filesystem::path manifest;
  std::string format = "jsonl";
  std::string out_dir;
  std::optional<double> split_ratio;
  uint64_t seed = 0;
  int min_frequency = 0;
};

struct InferOptions {
  std::filesystem::path config_path;
  std::optional<int> max_questions;
  GlobalOptions global;
};

struct CurateOptions {
  std::filesystem::path config_path;
  std::optional<std::string> strategy;  // overrides config "selection"
  std::string format = "vqa_jsonl";
  GlobalOptions global;
};

struct EmitOptions {
  std::filesystem::path examples;
  std::string format = "vqa_jsonl";
  std::string out_dir;
  std::string strategy_label = "none";
  std::string instruction;
};

struct EvaluateOptions {
  std::filesystem::path candidates;
  std::filesystem::path references;
  std::string out_dir;
};

struct SimulateOptions {
  std::optional<std::filesystem::path> world_config;
  std::string ablation = "conversation_length";
  std::vector<std::string> grid;
  std::string out_dir;
  GlobalOptions global;
};

int cmd_ingest(const IngestOptions& opts);
int cmd_infer(const InferOptions& opts);
int cmd_curate(const CurateOptions& opts);
int cmd_emit(const EmitOptions& opts);
int cmd_evaluate(const EvaluateOptions& opts);
int cmd_simulate(const SimulateOptions& opts);

/// Parses the flat key = value world/sim config used by `simulate`.
AblationSetup parse_world_config(const std::filesystem::path& path);

}  // namespace mocoll

#endif  // MOCOLL_CLI_HPP
