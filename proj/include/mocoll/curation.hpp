#ifndef MOCOLL_CURATION_HPP
#define MOCOLL_CURATION_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mocoll/orchestrator.hpp"

namespace mocoll {

/// One synthetic (images, question, answer, ground-truth) tuple gathered
/// during curation inference.
struct MemoryEntry {
  std::string case_id;
  std::vector<std::string> image_refs;
  std::string question;
  std::string answer;
  std::string ground_truth;

  nlohmann::json to_json() const;
  static MemoryEntry from_json(const nlohmann::json& j);
};

enum class SelectionKind { none, top_r_rouge, agent_based };

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::none;
  double r = 1.0;  // top_r_rouge only, in (0, 1]

  // "none" | "top-r=<frac>" | "agent"
  static SelectionStrategy parse(const std::string& text);
  std::string to_string() const;
};

/// A selected (images, question, answer) training triple.
struct VqaExample {
  std::string case_id;
  std::vector<std::string> image_refs;
  std::string question;
  std::string answer;

  bool operator==(const VqaExample&) const = default;
  nlohmann::json to_json() const;
  static VqaExample from_json(const nlohmann::json& j);
};

struct CaseBreakdown {
  std::string case_id;
  size_t n_memories = 0;
  size_t n_selected = 0;
  double caption_rouge = -1.0;  // top_r_rouge only; -1 = not scored
};

struct CurationReport {
  size_t n_memories = 0;
  size_t n_selected = 0;
  double selection_ratio = 0.0;
  SelectionStrategy strategy;
  size_t n_cases = 0;
  size_t failed_cases = 0;
  size_t empty_cases = 0;   // agent stopped before asking anything
  size_t parse_drops = 0;   // selector replies unparseable twice
  size_t backend_drops = 0; // selector transport failures
  std::vector<CaseBreakdown> per_case;

  nlohmann::json to_json() const;
};

struct CurationResult {
  std::vector<Conversation> conversations;  // transcripts, in input case order
  std::vector<MemoryEntry> memories;
  std::vector<VqaExample> selected;
  CurationReport report;
};

/// One MemoryEntry per recorded turn of a conversation.
std::vector<MemoryEntry> memories_from_conversation(const CaptionedCase& item,
                                                    const Conversation& conv);

// Runs the questioning loop over the train cases (captioning only when the
// configured strategy needs it) and derives the memory set. Per-case
// failures are isolated, matching run_batch.
std::vector<Conversation> generate_memory_conversations(
    const std::vector<CaptionedCase>& train_cases, OrchestratorConfig config,
    const BackendSet& backends, const std::vector<const CaptionedCase*>& few_shot_pool,
    const EmbeddingIndex* index, int parallelism, bool with_caption,
    const ProgressFn& progress = {});

// Selection-agent verdict for one memory. Parses {"keep": bool}; one
// corrective re-prompt, then the entry is dropped (counted in parse_drops).
// Backend failures drop the entry and count in backend_drops.
bool select_agent_based(ChatBackend& selector, const MemoryEntry& entry, const PromptSet& prompts,
                        const GenerationParams& params, CurationReport& report);

// Keeps all memories of the ceil(r * n_cases) cases whose generated caption
// scores best against the ground truth under ROUGE-L; ties broken by
// ascending case_id. Every case with memories must have a caption.
std::vector<MemoryEntry> select_top_r_rouge(const std::vector<MemoryEntry>& memories,
                                            const std::map<std::string, std::string>& captions,
                                            double r);

// Memory derivation + selection + report over already-generated
// conversations (conversations[i] belongs to train_cases[i]). Lets resumed
// runs reuse a conversation log.
CurationResult finish_curation(const std::vector<CaptionedCase>& train_cases,
                               std::vector<Conversation> conversations,
                               const SelectionStrategy& strategy, const BackendSet& backends,
                               const PromptSet& prompts);

/// Algorithm entry point: generate memories, filter with the strategy,
/// return the selected VQA examples plus the report.
CurationResult curate(const std::vector<CaptionedCase>& train_cases,
                      const OrchestratorConfig& config, const SelectionStrategy& strategy,
                      const BackendSet& backends,
                      const std::vector<const CaptionedCase*>& few_shot_pool,
                      const EmbeddingIndex* index, int parallelism,
                      const ProgressFn& progress = {});

enum class DatasetFormat { vqa_jsonl, chat_sft_jsonl };

DatasetFormat dataset_format_from_name(const std::string& name);
std::string dataset_format_name(DatasetFormat f);

struct DatasetManifest {
  size_t n_examples = 0;
  std::string strategy;
  std::string format;
  std::string path;
  std::string content_sha256;
  nlohmann::json advisory_hparams;

  nlohmann::json to_json() const;
};

/// Fine-tune hyperparameters recorded as advisory metadata in dataset
/// manifests (the training step itself is external).
nlohmann::json advisory_hparams();

// Writes the selected examples as vqa_jsonl or chat_sft_jsonl and returns
// the manifest (content hash, counts, advisory hyperparameters).
DatasetManifest emit_dataset(const std::vector<VqaExample>& examples,
                             const std::filesystem::path& out_path, DatasetFormat format,
                             const SelectionStrategy& strategy, const std::string& instruction);

std::vector<VqaExample> read_vqa_dataset(const std::filesystem::path& path);

void write_memories(const std::vector<MemoryEntry>& memories, const std::filesystem::path& path);
std::vector<MemoryEntry> read_memories(const std::filesystem::path& path);

}  // namespace mocoll

#endif  // MOCOLL_CURATION_HPP
