#ifndef MOCOLL_METRICS_HPP
#define MOCOLL_METRICS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace mocoll {

/// Lowercased, whitespace-split tokens (see tokenize()). No empty tokens.
using TokenSequence = std::vector<std::string>;

struct MetricsReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double meteor = 0;
  double rouge_l = 0;
  double cider = 0;
  size_t n_cases = 0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  std::string to_csv() const;  // header line + value line
  std::string to_table() const;  // human-readable, 4 decimals
};

// Corpus-level BLEU-n: geometric mean of clipped modified n-gram precisions
// over orders 1..max_order times the brevity penalty min(1, exp(1 - r/c)).
// Single reference per case. Empty candidates contribute zero n-grams.
double bleu(const std::vector<TokenSequence>& candidates,
            const std::vector<TokenSequence>& references, int max_order);

// Mean per-case LCS F-measure, beta = 1.2:
// F = (1 + b^2) P R / (R + b^2 P), P = LCS/|cand|, R = LCS/|ref|.
double rouge_l(const std::vector<TokenSequence>& candidates,
               const std::vector<TokenSequence>& references);
double rouge_l_single(const TokenSequence& candidate, const TokenSequence& reference);

// Mean per-case METEOR with exact + Porter-stem match stages (no synonym
// stage). alpha = 0.9, beta = 3, gamma = 0.5. Duplicate tokens are aligned
// in order (first unmatched reference occurrence wins).
double meteor(const std::vector<TokenSequence>& candidates,
              const std::vector<TokenSequence>& references);

// CIDEr-D: TF-IDF n-gram cosine per order 1..4, IDF over the reference
// corpus, candidate TF clipped to reference TF, Gaussian length penalty
// (sigma = 6), scaled by 10. Mean over cases.
double cider(const std::vector<TokenSequence>& candidates,
             const std::vector<TokenSequence>& references);

MetricsReport score_all(const std::vector<TokenSequence>& candidates,
                        const std::vector<TokenSequence>& references);

size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

}  // namespace mocoll

#endif  // MOCOLL_METRICS_HPP
