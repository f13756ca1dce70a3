#ifndef MOCOLL_RETRIEVAL_HPP
#define MOCOLL_RETRIEVAL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mocoll/backends.hpp"
#include "mocoll/corpus.hpp"

namespace mocoll {

enum class FewShotStrategy { random, similarity };

std::string strategy_name(FewShotStrategy s);
FewShotStrategy strategy_from_name(const std::string& name);

struct FewShotConfig {
  int k = 5;
  FewShotStrategy strategy = FewShotStrategy::similarity;
  uint64_t seed = 0;  // random strategy only
};

struct FewShotExample {
  std::string case_id;
  std::string caption;
};

struct ExampleSet {
  std::vector<FewShotExample> examples;  // at most k, never the query case
  FewShotStrategy strategy_used = FewShotStrategy::random;
};

// Case embedding lookup: the index entry keyed by case_id when present,
// otherwise the mean of the per-image-ref entries. Errors naming whatever
// id is missing.
std::vector<double> case_embedding(const CaptionedCase& c, const EmbeddingIndex& index);

// Few-shot example selection over the training pool. random: uniform
// without replacement under seed. similarity: top-k by cosine similarity of
// case embeddings, ties broken by ascending case_id. The query case never
// appears in the result.
ExampleSet select_examples(const CaptionedCase& query_case,
                           const std::vector<const CaptionedCase*>& pool,
                           const FewShotConfig& config, const EmbeddingIndex* index);

/// Every index entry ranked by descending similarity to the query vector,
/// ties broken by ascending case_id.
std::vector<std::pair<std::string, double>> rank_pool(const std::vector<double>& query_vector,
                                                      const EmbeddingIndex& index);

}  // namespace mocoll

#endif  // MOCOLL_RETRIEVAL_HPP
