#include "mocoll/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <unordered_set>

#include "mocoll/error.hpp"
#include "mocoll/io.hpp"
#include "mocoll/metrics.hpp"
#include "mocoll/text.hpp"

namespace mocoll {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const char* where) {
  if (!obj.is_object()) raise("config: ", where, " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) raise("config: unknown key \"", key, "\" in ", where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

FindingWorld world_from_json(const json& j, const char* where) {
  FindingWorld w = FindingWorld::defaults();
  check_keys(j, {"kind", "n_cases", "seed", "vocabulary", "min_findings", "max_findings",
                 "max_images", "manifest", "format", "eval_split"},
             where);
  if (j.contains("vocabulary")) w.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
  w.min_findings = j.value("min_findings", w.min_findings);
  w.max_findings = j.value("max_findings", w.max_findings);
  w.max_images = j.value("max_images", w.max_images);
  w.seed = j.value("seed", w.seed);
  return w;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig cfg;
  cfg.snapshot = j;
  check_keys(j, {"corpus", "embedding_index", "backends", "orchestrator", "few_shot", "selection",
                 "output_dir", "parallelism", "seed", "trace"},
             "config root");

  if (!j.contains("corpus")) raise("config: missing corpus section");
  const json& cj = j["corpus"];
  const std::string corpus_kind = cj.value("kind", "manifest");
  if (corpus_kind == "manifest") {
    check_keys(cj, {"kind", "manifest", "format", "eval_split"}, "corpus");
    cfg.corpus.kind = CorpusConfig::Kind::manifest;
    if (!cj.contains("manifest")) raise("config: corpus.manifest is required");
    cfg.corpus.manifest = resolve(base_dir, cj["manifest"].get<std::string>());
    const std::string fmt = cj.value("format", "jsonl");
    if (fmt == "jsonl") cfg.corpus.format = ManifestFormat::jsonl;
    else if (fmt == "csv") cfg.corpus.format = ManifestFormat::csv;
    else raise("config: corpus.format must be jsonl or csv, got ", fmt);
    cfg.corpus.eval_split = cj.value("eval_split", "auto");
  } else if (corpus_kind == "sim_world") {
    cfg.corpus.kind = CorpusConfig::Kind::sim_world;
    cfg.corpus.world = world_from_json(cj, "corpus");
    cfg.corpus.n_cases = cj.value("n_cases", 50);
  } else {
    raise("config: corpus.kind must be manifest or sim_world, got ", corpus_kind);
  }

  if (j.contains("embedding_index"))
    cfg.embedding_index = resolve(base_dir, j["embedding_index"].get<std::string>());

  if (!j.contains("backends")) raise("config: missing backends section");
  const json& bj = j["backends"];
  const std::string backend_kind = bj.value("kind", "");
  if (backend_kind == "sim") {
    check_keys(bj, {"kind", "epsilon", "policy", "stop_after", "selector_fidelity", "seed"},
               "backends");
    cfg.backends.kind = BackendsConfig::Kind::sim;
    cfg.backends.sim.vqa_error_rate = bj.value("epsilon", 0.0);
    cfg.backends.sim.policy = agent_policy_from_name(bj.value("policy", "coverage"));
    cfg.backends.sim.stop_after = bj.value("stop_after", 0);
    cfg.backends.sim.selector_fidelity = bj.value("selector_fidelity", 1.0);
    cfg.backends.sim.seed = bj.value("seed", uint64_t{0});
    cfg.backends.has_selector = true;
  } else if (backend_kind == "scripted") {
    check_keys(bj, {"kind", "agent", "vqa", "selector"}, "backends");
    cfg.backends.kind = BackendsConfig::Kind::scripted;
    if (!bj.contains("agent") || !bj.contains("vqa"))
      raise("config: scripted backends need agent and vqa scripts");
    cfg.backends.agent_script = bj["agent"].get<std::vector<std::string>>();
    cfg.backends.vqa_script = bj["vqa"].get<std::vector<std::string>>();
    if (bj.contains("selector")) {
      cfg.backends.selector_script = bj["selector"].get<std::vector<std::string>>();
      cfg.backends.has_selector = true;
    }
  } else if (backend_kind == "remote") {
    check_keys(bj, {"kind", "agent", "vqa", "selector"}, "backends");
    cfg.backends.kind = BackendsConfig::Kind::remote;
    auto parse_role = [&](const json& rj, const char* role, const char* default_key_env,
                          bool default_vision) {
      check_keys(rj, {"base_url", "model", "api_key_env", "vision"}, role);
      RemoteRoleConfig r;
      if (!rj.contains("base_url") || !rj.contains("model"))
        raise("config: remote backend role ", role, " needs base_url and model");
      r.base_url = rj["base_url"].get<std::string>();
      r.model = rj["model"].get<std::string>();
      r.api_key_env = rj.value("api_key_env", default_key_env);
      r.vision = rj.value("vision", default_vision);
      return r;
    };
    if (!bj.contains("agent") || !bj.contains("vqa"))
      raise("config: remote backends need agent and vqa roles");
    cfg.backends.agent = parse_role(bj["agent"], "backends.agent", "MOCOLL_AGENT_KEY", false);
    cfg.backends.vqa = parse_role(bj["vqa"], "backends.vqa", "MOCOLL_VQA_KEY", true);
    if (bj.contains("selector")) {
      cfg.backends.selector =
          parse_role(bj["selector"], "backends.selector", "MOCOLL_AGENT_KEY", false);
      cfg.backends.has_selector = true;
    } else {
      cfg.backends.selector = cfg.backends.agent;
      cfg.backends.has_selector = true;
    }
  } else {
    raise("config: backends.kind must be sim, scripted or remote, got \"", backend_kind, "\"");
  }

  if (j.contains("orchestrator")) {
    const json& oj = j["orchestrator"];
    check_keys(oj, {"max_questions", "agent_temperature", "vqa_temperature", "max_tokens",
                    "instruction"},
               "orchestrator");
    if (oj.contains("max_questions")) cfg.max_questions = oj["max_questions"].get<int>();
    if (oj.contains("agent_temperature"))
      cfg.agent_temperature = oj["agent_temperature"].get<double>();
    if (oj.contains("vqa_temperature")) cfg.vqa_temperature = oj["vqa_temperature"].get<double>();
    if (oj.contains("max_tokens")) cfg.max_tokens = oj["max_tokens"].get<int>();
    if (oj.contains("instruction")) cfg.instruction = oj["instruction"].get<std::string>();
  }

  if (j.contains("few_shot")) {
    const json& fj = j["few_shot"];
    check_keys(fj, {"k", "strategy", "seed"}, "few_shot");
    cfg.few_shot.k = fj.value("k", 5);
    cfg.few_shot.strategy = strategy_from_name(fj.value("strategy", "similarity"));
    cfg.few_shot.seed = fj.value("seed", uint64_t{0});
  }

  if (j.contains("selection")) {
    const json& sj = j["selection"];
    check_keys(sj, {"strategy"}, "selection");
    cfg.selection = SelectionStrategy::parse(sj.value("strategy", "none"));
  }

  if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
  cfg.parallelism = j.value("parallelism", 1);
  if (cfg.parallelism < 1) raise("config: parallelism must be >= 1");
  cfg.seed = j.value("seed", uint64_t{0});
  cfg.trace = j.value("trace", false);
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) raise("config file is not valid JSON: ", path.string());
  return from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

namespace {

struct RunEnvironment {
  std::vector<CaptionedCase> eval_cases;   // cases a command operates on
  std::vector<CaptionedCase> train_cases;  // few-shot pool / curation input
  std::vector<const CaptionedCase*> pool;
  std::optional<EmbeddingIndex> index;
  std::shared_ptr<SimWorld> world;
  BackendSet backends;
  nlohmann::json model_meta;
};

std::string env_api_key(const std::string& env_name) {
  const char* v = std::getenv(env_name.c_str());
  return v ? v : "";
}

std::shared_ptr<ChatBackend> make_remote(const RemoteRoleConfig& role, bool trace) {
  RemoteConfig rc;
  rc.base_url = role.base_url;
  rc.model = role.model;
  rc.api_key = env_api_key(role.api_key_env);
  rc.vision = role.vision;
  rc.trace = trace;
  return std::make_shared<RemoteBackend>(rc);
}

// "curation" selects the 0.1 temperature defaults used by the tuning-stage
// inference; evaluation inference runs at temperature 0.
OrchestratorConfig build_orchestrator_config(const RunConfig& cfg, bool curation) {
  OrchestratorConfig oc;
  oc.max_questions = cfg.max_questions.value_or(6);
  oc.agent_params = curation ? curation_params() : eval_params();
  oc.vqa_params = oc.agent_params;
  if (cfg.agent_temperature) oc.agent_params.temperature = *cfg.agent_temperature;
  if (cfg.vqa_temperature) oc.vqa_params.temperature = *cfg.vqa_temperature;
  if (cfg.max_tokens) {
    oc.agent_params.max_tokens = *cfg.max_tokens;
    oc.vqa_params.max_tokens = *cfg.max_tokens;
  }
  oc.few_shot = cfg.few_shot;
  if (cfg.instruction) oc.prompts.instruction = *cfg.instruction;
  oc.prompts.validate();
  return oc;
}

RunEnvironment build_environment(const RunConfig& cfg, bool for_curation) {
  RunEnvironment env;

  if (cfg.corpus.kind == CorpusConfig::Kind::sim_world) {
    env.world = generate_world(cfg.corpus.world, cfg.corpus.n_cases);
    env.train_cases = env.world->captioned_cases();
    env.eval_cases = env.train_cases;
    env.index = env.world->index;
  } else {
    Corpus corpus = load_corpus(cfg.corpus.manifest, cfg.corpus.format);
    for (const auto& c : corpus.cases)
      if (c.split == Split::train) env.train_cases.push_back(c);
    std::vector<CaptionedCase> test_cases;
    for (const auto& c : corpus.cases)
      if (c.split == Split::test) test_cases.push_back(c);

    std::string which = cfg.corpus.eval_split;
    if (which == "auto") which = test_cases.empty() ? "all" : "test";
    if (for_curation) which = "train";
    if (which == "test") env.eval_cases = test_cases;
    else if (which == "train") env.eval_cases = env.train_cases;
    else if (which == "all") env.eval_cases = corpus.cases;
    else raise("config: corpus.eval_split must be auto|test|train|all");
    if (cfg.embedding_index) env.index = load_embedding_index(*cfg.embedding_index);
  }
  for (const auto& c : env.train_cases) env.pool.push_back(&c);

  if (env.eval_cases.empty()) raise("no cases to run (eval split is empty)");
  if (cfg.few_shot.k > 0 && cfg.few_shot.strategy == FewShotStrategy::similarity && !env.index)
    raise("similarity few-shot strategy requires an embedding_index (or a sim corpus)");

  switch (cfg.backends.kind) {
    case BackendsConfig::Kind::sim: {
      if (!env.world)
        raise("sim backends require corpus.kind = sim_world");
      env.backends = make_sim_backends(env.world, cfg.backends.sim);
      env.model_meta = {{"agent", "sim-agent"}, {"vqa", "sim-vqa"}};
      break;
    }
    case BackendsConfig::Kind::scripted: {
      env.backends.agent = std::make_shared<ScriptedBackend>(cfg.backends.agent_script);
      env.backends.vqa = std::make_shared<ScriptedBackend>(cfg.backends.vqa_script, true);
      if (!cfg.backends.selector_script.empty())
        env.backends.selector = std::make_shared<ScriptedBackend>(cfg.backends.selector_script);
      env.model_meta = {{"agent", "scripted"}, {"vqa", "scripted"}};
      break;
    }
    case BackendsConfig::Kind::remote: {
      env.backends.agent = make_remote(cfg.backends.agent, cfg.trace);
      env.backends.vqa = make_remote(cfg.backends.vqa, cfg.trace);
      env.backends.selector = make_remote(cfg.backends.selector, cfg.trace);
      env.model_meta = {{"agent", cfg.backends.agent.model}, {"vqa", cfg.backends.vqa.model}};
      break;
    }
  }
  return env;
}

void write_run_record(const fs::path& out_dir, const std::string& command,
                      const json& config_snapshot, const std::vector<fs::path>& outputs,
                      size_t failed_cases) {
  json hashes = json::object();
  for (const auto& p : outputs)
    if (fs::exists(p)) hashes[p.filename().string()] = sha256_file(p);
  json record{{"command", command},
              {"config", config_snapshot},
              {"outputs", hashes},
              {"failed_cases", failed_cases}};
  write_file(out_dir / "run.json", record.dump(2) + "\n");
}

// Existing conversations keyed by case_id; a torn final line (interrupted
// run) is ignored, anything else malformed is an error.
std::map<std::string, Conversation> load_resume_log(const fs::path& path) {
  std::map<std::string, Conversation> done;
  if (!fs::exists(path)) return done;
  std::string content = read_file(path);
  size_t start = 0, line_no = 0;
  while (start < content.size()) {
    size_t end = content.find('\n', start);
    const bool last = end == std::string::npos;
    std::string line = content.substr(start, last ? end : end - start);
    start = last ? content.size() : end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (last || start >= content.size()) break;  // torn tail from an interrupted run
      raise(path.string(), ":", line_no, ": malformed conversation record");
    }
    Conversation conv = Conversation::from_json(j);
    done[conv.case_id] = std::move(conv);
  }
  return done;
}

ProgressFn make_progress(const char* label, bool quiet) {
  if (quiet) return {};
  return [label](size_t done, size_t total) {
    if (done == total || done % std::max<size_t>(1, total / 10) == 0)
      std::fprintf(stderr, "[%s] %zu/%zu cases\n", label, done, total);
  };
}

void apply_global(RunConfig& cfg, const GlobalOptions& g) {
  if (g.seed) cfg.seed = *g.seed;
  if (g.parallelism) cfg.parallelism = *g.parallelism;
  if (g.out_dir) cfg.output_dir = *g.out_dir;
  if (g.trace) cfg.trace = true;
}

std::vector<Conversation> run_with_resume(const std::vector<CaptionedCase>& cases,
                                          const OrchestratorConfig& oc, const RunEnvironment& env,
                                          int parallelism, const fs::path& log_path, bool resume,
                                          const ProgressFn& progress) {
  std::map<std::string, Conversation> done;
  if (resume) done = load_resume_log(log_path);

  std::vector<CaptionedCase> pending;
  for (const auto& c : cases)
    if (!done.count(c.case_id)) pending.push_back(c);

  std::vector<Conversation> fresh;
  if (!pending.empty())
    fresh = run_batch(pending, oc, env.backends, env.pool,
                      env.index ? &*env.index : nullptr, parallelism, progress);

  // final log in input case order regardless of resume history
  std::vector<Conversation> ordered;
  ordered.reserve(cases.size());
  size_t fresh_i = 0;
  for (const auto& c : cases) {
    auto it = done.find(c.case_id);
    if (it != done.end()) ordered.push_back(it->second);
    else ordered.push_back(fresh[fresh_i++]);
  }
  return ordered;
}

void write_conversations(const std::vector<Conversation>& convs, const json& model_meta,
                         const fs::path& path) {
  std::vector<json> records;
  records.reserve(convs.size());
  for (const auto& conv : convs) records.push_back(conv.to_json(model_meta));
  write_jsonl(path, records);
}

}  // namespace

int cmd_ingest(const IngestOptions& opts) {
  const ManifestFormat format = opts.format == "csv" ? ManifestFormat::csv : ManifestFormat::jsonl;
  LoadStats stats;
  Corpus corpus = load_corpus(opts.manifest, format, &stats);
  if (opts.split_ratio) corpus = split_corpus(corpus, *opts.split_ratio, opts.seed);
  if (opts.min_frequency > 0)
    corpus = apply_vocab_filter(corpus, VocabFilter{opts.min_frequency, "<unk>"});

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  std::vector<json> records;
  for (const auto& c : corpus.cases)
    records.push_back({{"case_id", c.case_id},
                       {"images", c.image_refs},
                       {"report", c.report_text},
                       {"split", split_name(c.split)}});
  write_jsonl(out_dir / "corpus.jsonl", records);

  json report{{"n_records", stats.n_records},
              {"n_loaded", stats.n_loaded},
              {"n_dropped", stats.n_dropped},
              {"drop_reasons", stats.drop_reasons},
              {"vocab_cutoff", corpus.vocab_cutoff}};
  write_file(out_dir / "ingest_report.json", report.dump(2) + "\n");
  write_run_record(out_dir, "ingest", {{"manifest", opts.manifest.string()}},
                   {out_dir / "corpus.jsonl", out_dir / "ingest_report.json"}, 0);
  std::printf("ingested %zu cases (%zu dropped) -> %s\n", stats.n_loaded, stats.n_dropped,
              (out_dir / "corpus.jsonl").string().c_str());
  return 0;
}

int cmd_infer(const InferOptions& opts) {
  RunConfig cfg = RunConfig::load(opts.config_path);
  apply_global(cfg, opts.global);
  RunEnvironment env = build_environment(cfg, /*for_curation=*/false);
  OrchestratorConfig oc = build_orchestrator_config(cfg, /*curation=*/false);
  if (opts.max_questions) oc.max_questions = *opts.max_questions;

  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);
  const fs::path conv_path = out_dir / "conversations.jsonl";

  auto convs = run_with_resume(env.eval_cases, oc, env, cfg.parallelism, conv_path,
                               opts.global.resume, make_progress("infer", opts.global.quiet));
  write_conversations(convs, env.model_meta, conv_path);

  std::vector<json> captions;
  size_t failed = 0;
  for (const auto& conv : convs) {
    if (conv.stop_reason == StopReason::error) ++failed;
    if (conv.caption) captions.push_back({{"case_id", conv.case_id}, {"caption", *conv.caption}});
  }
  const fs::path captions_path = out_dir / "captions.jsonl";
  write_jsonl(captions_path, captions);
  write_run_record(out_dir, "infer", cfg.snapshot, {conv_path, captions_path}, failed);
  if (!opts.global.quiet)
    std::printf("infer: %zu conversations, %zu captions, %zu failed -> %s\n", convs.size(),
                captions.size(), failed, out_dir.string().c_str());
  return 0;
}

int cmd_curate(const CurateOptions& opts) {
  RunConfig cfg = RunConfig::load(opts.config_path);
  apply_global(cfg, opts.global);
  SelectionStrategy strategy = cfg.selection;
  if (opts.strategy) strategy = SelectionStrategy::parse(*opts.strategy);

  RunEnvironment env = build_environment(cfg, /*for_curation=*/true);
  OrchestratorConfig oc = build_orchestrator_config(cfg, /*curation=*/true);
  oc.with_caption = strategy.kind == SelectionKind::top_r_rouge;

  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);
  const fs::path conv_path = out_dir / "conversations.jsonl";

  std::vector<CaptionedCase> train = env.eval_cases;  // for_curation -> train split
  auto convs = run_with_resume(train, oc, env, cfg.parallelism, conv_path, opts.global.resume,
                               make_progress("curate", opts.global.quiet));
  write_conversations(convs, env.model_meta, conv_path);

  CurationResult result = finish_curation(train, convs, strategy, env.backends, oc.prompts);

  const fs::path memories_path = out_dir / "memories.jsonl";
  write_memories(result.memories, memories_path);

  const DatasetFormat format = dataset_format_from_name(opts.format);
  const fs::path dataset_path = out_dir / ("dataset." + opts.format);
  if (result.selected.empty())
    raise("selection kept zero examples; nothing to emit (strategy ", strategy.to_string(), ")");
  DatasetManifest manifest =
      emit_dataset(result.selected, dataset_path, format, strategy, oc.prompts.instruction);
  write_file(out_dir / "dataset_manifest.json", manifest.to_json().dump(2) + "\n");
  write_file(out_dir / "curation_report.json", result.report.to_json().dump(2) + "\n");
  write_run_record(out_dir, "curate", cfg.snapshot,
                   {conv_path, memories_path, dataset_path, out_dir / "dataset_manifest.json",
                    out_dir / "curation_report.json"},
                   result.report.failed_cases);
  if (!opts.global.quiet)
    std::printf("curate: %zu memories, %zu selected (ratio %.4f) -> %s\n",
                result.report.n_memories, result.report.n_selected,
                result.report.selection_ratio, out_dir.string().c_str());
  return 0;
}

int cmd_emit(const EmitOptions& opts) {
  auto examples = read_vqa_dataset(opts.examples);
  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  const DatasetFormat format = dataset_format_from_name(opts.format);
  const fs::path dataset_path = out_dir / ("dataset." + opts.format);
  const std::string instruction =
      opts.instruction.empty() ? PromptSet::defaults().instruction : opts.instruction;
  DatasetManifest manifest = emit_dataset(examples, dataset_path, format,
                                          SelectionStrategy::parse(opts.strategy_label),
                                          instruction);
  write_file(out_dir / "dataset_manifest.json", manifest.to_json().dump(2) + "\n");
  write_run_record(out_dir, "emit", {{"examples", opts.examples.string()}},
                   {dataset_path, out_dir / "dataset_manifest.json"}, 0);
  std::printf("emitted %zu examples -> %s\n", manifest.n_examples, dataset_path.string().c_str());
  return 0;
}

namespace {

// Reference/candidate files: JSONL records carrying case_id plus a caption
// ("caption"), a report ("report"), or finding/impression fields; CSV with
// the same columns.
std::map<std::string, std::string> load_text_by_case(const fs::path& path) {
  std::map<std::string, std::string> out;
  auto put = [&](const std::string& id, const std::string& text) {
    if (id.empty()) raise(path.string(), ": record missing case_id");
    if (!out.emplace(id, text).second) raise(path.string(), ": duplicate case_id ", id);
  };
  if (path.extension() == ".csv") {
    auto rows = parse_csv(read_file(path));
    if (rows.empty()) raise(path.string(), ": empty file");
    std::map<std::string, size_t> col;
    for (size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
    auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::string {
      auto it = col.find(name);
      return it == col.end() || it->second >= row.size() ? "" : row[it->second];
    };
    for (size_t i = 1; i < rows.size(); ++i) {
      std::string text = cell(rows[i], "caption");
      if (text.empty()) text = cell(rows[i], "report");
      if (text.empty()) {
        std::string f = cell(rows[i], "finding"), im = cell(rows[i], "impression");
        if (!trim(f).empty() || !trim(im).empty()) text = compose_report(f, im);
      }
      put(cell(rows[i], "case_id"), text);
    }
    return out;
  }
  for_each_jsonl(path, [&](size_t line_no, const json& rec) {
    if (!rec.contains("case_id"))
      raise(path.string(), ":", line_no, ": record missing case_id");
    std::string text = rec.value("caption", "");
    if (text.empty()) text = rec.value("report", "");
    if (text.empty() && (rec.contains("finding") || rec.contains("impression")))
      text = compose_report(rec.value("finding", ""), rec.value("impression", ""));
    put(rec["case_id"].get<std::string>(), text);
  });
  return out;
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& opts) {
  auto candidates = load_text_by_case(opts.candidates);
  auto references = load_text_by_case(opts.references);
  if (candidates.empty()) raise("no candidate captions in ", opts.candidates.string());

  std::vector<std::string> missing;
  for (const auto& [id, _] : candidates)
    if (!references.count(id)) missing.push_back(id);
  if (!missing.empty())
    raise("case_ids missing from references: ", join(missing, ", "));

  // case_id order fixes the floating-point reduction order
  std::vector<TokenSequence> cand_tokens, ref_tokens;
  for (const auto& [id, text] : candidates) {
    cand_tokens.push_back(tokenize(text));
    ref_tokens.push_back(tokenize(references.at(id)));
  }
  MetricsReport report = score_all(cand_tokens, ref_tokens);

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  write_file(out_dir / "metrics.json", report.to_json().dump(2) + "\n");
  write_file(out_dir / "metrics.csv", report.to_csv());
  write_file(out_dir / "metrics.txt", report.to_table());
  write_run_record(out_dir, "evaluate",
                   {{"candidates", opts.candidates.string()},
                    {"references", opts.references.string()}},
                   {out_dir / "metrics.json", out_dir / "metrics.csv", out_dir / "metrics.txt"},
                   0);
  std::fputs(report.to_table().c_str(), stdout);
  return 0;
}

AblationSetup parse_world_config(const fs::path& path) {
  AblationSetup setup;
  static const std::set<std::string> known = {
      "vocabulary",   "n_cases",   "min_findings", "max_findings",     "max_images",
      "world_seed",   "epsilon",   "policy",       "stop_after",       "selector_fidelity",
      "sim_seed",     "max_questions", "k",        "few_shot_strategy", "few_shot_seed",
      "parallelism"};
  std::istringstream in(read_file(path));
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      raise(path.string(), ":", line_no, ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!known.count(key)) raise(path.string(), ":", line_no, ": unknown key \"", key, "\"");
    try {
      if (key == "vocabulary") {
        std::vector<std::string> vocab;
        size_t pos = 0;
        while (pos <= value.size()) {
          size_t comma = value.find(',', pos);
          std::string item =
              trim(value.substr(pos, comma == std::string::npos ? comma : comma - pos));
          if (!item.empty()) vocab.push_back(item);
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        setup.world.vocabulary = vocab;
      } else if (key == "n_cases") setup.n_cases = std::stoi(value);
      else if (key == "min_findings") setup.world.min_findings = std::stoi(value);
      else if (key == "max_findings") setup.world.max_findings = std::stoi(value);
      else if (key == "max_images") setup.world.max_images = std::stoi(value);
      else if (key == "world_seed") setup.world.seed = std::stoull(value);
      else if (key == "epsilon") setup.sim.vqa_error_rate = std::stod(value);
      else if (key == "policy") setup.sim.policy = agent_policy_from_name(value);
      else if (key == "stop_after") setup.sim.stop_after = std::stoi(value);
      else if (key == "selector_fidelity") setup.sim.selector_fidelity = std::stod(value);
      else if (key == "sim_seed") setup.sim.seed = std::stoull(value);
      else if (key == "max_questions") setup.orchestrator.max_questions = std::stoi(value);
      else if (key == "k") setup.orchestrator.few_shot.k = std::stoi(value);
      else if (key == "few_shot_strategy")
        setup.orchestrator.few_shot.strategy = strategy_from_name(value);
      else if (key == "few_shot_seed") setup.orchestrator.few_shot.seed = std::stoull(value);
      else if (key == "parallelism") setup.parallelism = std::stoi(value);
    } catch (const Error&) {
      throw;
    } catch (...) {
      raise(path.string(), ":", line_no, ": bad value for ", key, ": ", value);
    }
  }
  return setup;
}

int cmd_simulate(const SimulateOptions& opts) {
  AblationSetup setup;
  if (opts.world_config) setup = parse_world_config(*opts.world_config);
  if (opts.global.parallelism) setup.parallelism = *opts.global.parallelism;
  if (opts.global.seed) {
    setup.world.seed = *opts.global.seed;
    setup.sim.seed = *opts.global.seed + 1;
  }
  if (opts.grid.empty()) raise("simulate: --grid is required (comma-separated points)");

  const AblationKind kind = ablation_kind_from_name(opts.ablation);
  AblationTable table = run_ablation(kind, opts.grid, setup);

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  write_file(out_dir / "ablation.csv", table.to_csv());
  write_file(out_dir / "ablation.json", table.to_json().dump(2) + "\n");
  json snapshot{{"ablation", opts.ablation}, {"grid", opts.grid}};
  if (opts.world_config) snapshot["world_config"] = opts.world_config->string();
  write_run_record(out_dir, "simulate", snapshot,
                   {out_dir / "ablation.csv", out_dir / "ablation.json"}, 0);
  std::fputs(table.to_csv().c_str(), stdout);
  return 0;
}

}  // namespace mocoll
