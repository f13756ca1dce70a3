#include "mocoll/retrieval.hpp"

#include <algorithm>

#include "mocoll/error.hpp"
#include "mocoll/rng.hpp"

namespace mocoll {

std::string strategy_name(FewShotStrategy s) {
  return s == FewShotStrategy::random ? "random" : "similarity";
}

FewShotStrategy strategy_from_name(const std::string& name) {
  if (name == "random") return FewShotStrategy::random;
  if (name == "similarity" || name == "rag") return FewShotStrategy::similarity;
  raise("unknown few-shot strategy: ", name);
}

std::vector<double> case_embedding(const CaptionedCase& c, const EmbeddingIndex& index) {
  if (const auto* vec = index.find(c.case_id)) return *vec;
  std::vector<double> mean(index.dimension, 0.0);
  size_t found = 0;
  for (const auto& ref : c.image_refs) {
    const auto* vec = index.find(ref);
    if (!vec) raise("embedding missing for case ", c.case_id, " (no entry for ", ref, ")");
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += (*vec)[i];
    ++found;
  }
  if (found == 0) raise("embedding missing for case ", c.case_id);
  for (auto& v : mean) v /= static_cast<double>(found);
  return mean;
}

ExampleSet select_examples(const CaptionedCase& query_case,
                           const std::vector<const CaptionedCase*>& pool,
                           const FewShotConfig& config, const EmbeddingIndex* index) {
  if (config.k < 0) raise("few-shot k must be >= 0");
  ExampleSet out;
  out.strategy_used = config.strategy;
  if (config.k == 0) return out;

  std::vector<const CaptionedCase*> eligible;
  for (const auto* c : pool)
    if (c->case_id != query_case.case_id) eligible.push_back(c);
  if (eligible.empty()) return out;

  const auto k = static_cast<size_t>(config.k);
  if (config.strategy == FewShotStrategy::random) {
    // stable base order so sampling depends on (pool contents, seed) only
    std::sort(eligible.begin(), eligible.end(),
              [](const CaptionedCase* a, const CaptionedCase* b) { return a->case_id < b->case_id; });
    Rng rng(config.seed);
    for (size_t idx : rng.sample_indices(eligible.size(), k))
      out.examples.push_back({eligible[idx]->case_id, eligible[idx]->report_text});
    return out;
  }

  if (!index) raise("similarity strategy requires an embedding index");
  std::vector<double> query_vec = case_embedding(query_case, *index);
  std::vector<std::pair<double, const CaptionedCase*>> scored;
  scored.reserve(eligible.size());
  for (const auto* c : eligible)
    scored.emplace_back(cosine_similarity(query_vec, case_embedding(*c, *index)), c);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->case_id < b.second->case_id;
  });
  for (size_t i = 0; i < scored.size() && i < k; ++i)
    out.examples.push_back({scored[i].second->case_id, scored[i].second->report_text});
  return out;
}

std::vector<std::pair<std::string, double>> rank_pool(const std::vector<double>& query_vector,
                                                      const EmbeddingIndex& index) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(index.entries.size());
  for (const auto& [id, vec] : index.entries)
    out.emplace_back(id, cosine_similarity(query_vector, vec));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

}  // namespace mocoll
