#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "mocoll/cli.hpp"

namespace {

void add_global(CLI::App* cmd, mocoll::GlobalOptions& g) {
  cmd->add_option("--seed", g.seed, "Override the config seed");
  cmd->add_option("--parallelism", g.parallelism, "Concurrent conversations");
  cmd->add_option("--out", g.out_dir, "Override the output directory");
  cmd->add_flag("--trace", g.trace, "Log backend requests/responses");
  cmd->add_flag("--resume", g.resume, "Resume from an existing conversation log");
  cmd->add_flag("--quiet", g.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mocoll: agent/VQA collaboration pipeline (inference, curation, evaluation)"};
  app.require_subcommand(1);

  mocoll::IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load, validate and preprocess a corpus manifest");
  ingest_cmd->add_option("--manifest", ingest.manifest, "Manifest path (JSONL or CSV)")->required();
  ingest_cmd->add_option("--format", ingest.format, "jsonl|csv")->default_val("jsonl");
  ingest_cmd->add_option("--out", ingest.out_dir, "Output directory")->required();
  ingest_cmd->add_option("--split-ratio", ingest.split_ratio, "Assign train/test split (e.g. 0.8)");
  ingest_cmd->add_option("--seed", ingest.seed, "Split seed");
  ingest_cmd->add_option("--min-frequency", ingest.min_frequency,
                         "Vocabulary cut-off (3 fits IU-Xray-sized corpora, 10 MIMIC-CXR-sized)");

  mocoll::InferOptions infer;
  auto* infer_cmd = app.add_subcommand("infer", "Run the question/answer captioning loop");
  infer_cmd->add_option("--config", infer.config_path, "Run config JSON")->required();
  infer_cmd->add_option("--max-questions", infer.max_questions, "Override max questions (M)");
  add_global(infer_cmd, infer.global);

  mocoll::CurateOptions curate;
  auto* curate_cmd = app.add_subcommand("curate", "Generate and select synthetic VQA data");
  curate_cmd->add_option("--config", curate.config_path, "Run config JSON")->required();
  curate_cmd->add_option("--strategy", curate.strategy, "none | top-r=<frac> | agent");
  curate_cmd->add_option("--format", curate.format, "vqa_jsonl|chat_sft_jsonl")
      ->default_val("vqa_jsonl");
  add_global(curate_cmd, curate.global);

  mocoll::EmitOptions emit;
  auto* emit_cmd = app.add_subcommand("emit", "Re-emit a VQA example file as a fine-tune dataset");
  emit_cmd->add_option("--examples", emit.examples, "VQA examples JSONL")->required();
  emit_cmd->add_option("--format", emit.format, "vqa_jsonl|chat_sft_jsonl")
      ->default_val("vqa_jsonl");
  emit_cmd->add_option("--out", emit.out_dir, "Output directory")->required();
  emit_cmd->add_option("--strategy-label", emit.strategy_label,
                       "Selection strategy recorded in the manifest");
  emit_cmd->add_option("--instruction", emit.instruction, "System instruction for chat_sft records");

  mocoll::EvaluateOptions evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score candidate captions against references");
  eval_cmd->add_option("--candidates", evaluate.candidates, "Candidates JSONL/CSV")->required();
  eval_cmd->add_option("--references", evaluate.references, "References JSONL/CSV or corpus manifest")
      ->required();
  eval_cmd->add_option("--out", evaluate.out_dir, "Output directory")->required();

  mocoll::SimulateOptions simulate;
  auto* sim_cmd = app.add_subcommand("simulate", "Run desk-scale ablations on the synthetic world");
  sim_cmd->add_option("--world", simulate.world_config, "World config file (key = value lines)");
  sim_cmd->add_option("--ablation", simulate.ablation,
                      "icl_count|conversation_length|selection_strategy|data_size")
      ->required();
  sim_cmd->add_option("--grid", simulate.grid, "Grid points")->required()->delimiter(',');
  sim_cmd->add_option("--out", simulate.out_dir, "Output directory")->required();
  add_global(sim_cmd, simulate.global);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest_cmd->parsed()) return mocoll::cmd_ingest(ingest);
    if (infer_cmd->parsed()) return mocoll::cmd_infer(infer);
    if (curate_cmd->parsed()) return mocoll::cmd_curate(curate);
    if (emit_cmd->parsed()) return mocoll::cmd_emit(emit);
    if (eval_cmd->parsed()) return mocoll::cmd_evaluate(evaluate);
    if (sim_cmd->parsed()) return mocoll::cmd_simulate(simulate);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
