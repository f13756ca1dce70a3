#ifndef MOCOLL_CORPUS_HPP
#define MOCOLL_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mocoll {

enum class Split { train, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// One image-set plus its ground-truth report.
struct CaptionedCase {
  std::string case_id;
  std::vector<std::string> image_refs;  // 1..4 opaque refs (paths or URIs)
  std::string report_text;
  Split split = Split::train;
};

struct Corpus {
  std::string name;
  std::vector<CaptionedCase> cases;
  int vocab_cutoff = 0;

  std::vector<const CaptionedCase*> split_cases(Split s) const;
  const CaptionedCase* find(const std::string& case_id) const;
};

struct VocabFilter {
  int min_frequency = 0;
  std::string unknown_token = "<unk>";
};

enum class ManifestFormat { jsonl, csv };

struct LoadStats {
  size_t n_records = 0;
  size_t n_loaded = 0;
  size_t n_dropped = 0;
  std::vector<std::string> drop_reasons;
};

// Manifest loading. Records with no usable report or no images are dropped
// and counted; structural violations (missing case_id, duplicate case_id,
// more than 4 images) abort with an error naming the record.
Corpus load_corpus(const std::filesystem::path& manifest_path, ManifestFormat format,
                   LoadStats* stats = nullptr);

/// "finding + impression", single space between, missing side treated as
/// empty. Errors when both sides are empty.
std::string compose_report(const std::string& finding, const std::string& impression);

/// Random train/test partition: |train| = round(ratio * |cases|),
/// deterministic under seed, input case order preserved.
Corpus split_corpus(const Corpus& corpus, double ratio, uint64_t seed);

// Replaces tokens whose frequency over the train-split reports is below
// min_frequency with the unknown token. min_frequency == 0 is the identity.
// Reports of the filtered corpus are normalized token strings.
Corpus apply_vocab_filter(const Corpus& corpus, const VocabFilter& filter);

}  // namespace mocoll

#endif  // MOCOLL_CORPUS_HPP
