#include "mocoll/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "mocoll/error.hpp"
#include "mocoll/text.hpp"

namespace mocoll {

namespace {

constexpr double kRougeBeta = 1.2;
constexpr double kMeteorAlpha = 0.9;
constexpr double kMeteorBeta = 3.0;
constexpr double kMeteorGamma = 0.5;
constexpr double kCiderSigma = 6.0;
constexpr int kCiderOrders = 4;

void check_aligned(const std::vector<TokenSequence>& candidates,
                   const std::vector<TokenSequence>& references) {
  if (candidates.empty()) raise("metrics: empty candidate list");
  if (candidates.size() != references.size())
    raise("metrics: ", candidates.size(), " candidates vs ", references.size(), " references");
}

// n-gram key: tokens joined by a separator that cannot occur inside a token.
std::string ngram_key(const TokenSequence& toks, size_t start, size_t order) {
  std::string key;
  for (size_t i = 0; i < order; ++i) {
    if (i) key += '\x1f';
    key += toks[start + i];
  }
  return key;
}

using CountMap = std::unordered_map<std::string, double>;

CountMap ngram_counts(const TokenSequence& toks, size_t order) {
  CountMap counts;
  if (toks.size() >= order && order > 0)
    for (size_t i = 0; i + order <= toks.size(); ++i) counts[ngram_key(toks, i, order)] += 1.0;
  return counts;
}

}  // namespace

double bleu(const std::vector<TokenSequence>& candidates,
            const std::vector<TokenSequence>& references, int max_order) {
  check_aligned(candidates, references);
  if (max_order < 1 || max_order > 4) raise("bleu: max_order must be in 1..4, got ", max_order);

  std::vector<double> clipped(static_cast<size_t>(max_order), 0.0);
  std::vector<double> total(static_cast<size_t>(max_order), 0.0);
  double cand_len = 0, ref_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    cand_len += static_cast<double>(candidates[i].size());
    ref_len += static_cast<double>(references[i].size());
    for (int n = 1; n <= max_order; ++n) {
      CountMap cand = ngram_counts(candidates[i], static_cast<size_t>(n));
      CountMap ref = ngram_counts(references[i], static_cast<size_t>(n));
      for (const auto& [gram, count] : cand) {
        total[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) clipped[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (cand_len == 0) return 0.0;

  double log_sum = 0.0;
  for (int n = 0; n < max_order; ++n) {
    if (total[n] == 0 || clipped[n] == 0) return 0.0;
    log_sum += std::log(clipped[n] / total[n]);
  }
  double precision = std::exp(log_sum / max_order);
  double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * precision;
}

size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_single(const TokenSequence& candidate, const TokenSequence& reference) {
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0 || candidate.empty() || reference.empty()) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = kRougeBeta * kRougeBeta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const std::vector<TokenSequence>& candidates,
               const std::vector<TokenSequence>& references) {
  check_aligned(candidates, references);
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i)
    sum += rouge_l_single(candidates[i], references[i]);
  return sum / static_cast<double>(candidates.size());
}

namespace {

// One matched (candidate position, reference position) pair.
struct MatchPair {
  size_t cand;
  size_t ref;
};

// In-order stage matching: walk candidate positions left to right and take
// the first unmatched reference position with an equal key.
void match_stage(const std::vector<std::string>& cand_keys,
                 const std::vector<std::string>& ref_keys, std::vector<bool>& cand_used,
                 std::vector<bool>& ref_used, std::vector<MatchPair>& pairs) {
  for (size_t i = 0; i < cand_keys.size(); ++i) {
    if (cand_used[i]) continue;
    for (size_t j = 0; j < ref_keys.size(); ++j) {
      if (ref_used[j] || cand_keys[i] != ref_keys[j]) continue;
      cand_used[i] = true;
      ref_used[j] = true;
      pairs.push_back({i, j});
      break;
    }
  }
}

double meteor_single(const TokenSequence& cand, const TokenSequence& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<bool> cand_used(cand.size(), false), ref_used(ref.size(), false);
  std::vector<MatchPair> pairs;
  match_stage(cand, ref, cand_used, ref_used, pairs);

  std::vector<std::string> cand_stems(cand.size()), ref_stems(ref.size());
  for (size_t i = 0; i < cand.size(); ++i) cand_stems[i] = porter_stem(cand[i]);
  for (size_t j = 0; j < ref.size(); ++j) ref_stems[j] = porter_stem(ref[j]);
  match_stage(cand_stems, ref_stems, cand_used, ref_used, pairs);

  const auto m = static_cast<double>(pairs.size());
  if (m == 0) return 0.0;

  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = p * r / (kMeteorAlpha * p + (1.0 - kMeteorAlpha) * r);

  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.cand < b.cand; });
  size_t chunks = 0;
  for (size_t k = 0; k < pairs.size(); ++k) {
    if (k == 0 || pairs[k].cand != pairs[k - 1].cand + 1 || pairs[k].ref != pairs[k - 1].ref + 1)
      ++chunks;
  }
  const double penalty =
      kMeteorGamma * std::pow(static_cast<double>(chunks) / m, kMeteorBeta);
  return fmean * (1.0 - penalty);
}

}  // namespace

double meteor(const std::vector<TokenSequence>& candidates,
              const std::vector<TokenSequence>& references) {
  check_aligned(candidates, references);
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i)
    sum += meteor_single(candidates[i], references[i]);
  return sum / static_cast<double>(candidates.size());
}

namespace {

struct TfidfVec {
  CountMap weights;
  double norm_sq = 0.0;
};

TfidfVec tfidf(const CountMap& counts, const CountMap& doc_freq, double log_n) {
  TfidfVec v;
  for (const auto& [gram, count] : counts) {
    auto it = doc_freq.find(gram);
    double df = it == doc_freq.end() ? 0.0 : it->second;
    double w = count * (log_n - std::log(std::max(1.0, df)));
    v.weights[gram] = w;
    v.norm_sq += w * w;
  }
  return v;
}

}  // namespace

double cider(const std::vector<TokenSequence>& candidates,
             const std::vector<TokenSequence>& references) {
  check_aligned(candidates, references);
  const size_t n_cases = candidates.size();
  const double log_n = std::log(static_cast<double>(n_cases));

  // document frequency per order, over the reference corpus
  std::vector<CountMap> doc_freq(kCiderOrders);
  for (const auto& ref : references) {
    for (int n = 1; n <= kCiderOrders; ++n) {
      for (const auto& [gram, _] : ngram_counts(ref, static_cast<size_t>(n)))
        doc_freq[n - 1][gram] += 1.0;
    }
  }

  double corpus_sum = 0.0;
  for (size_t i = 0; i < n_cases; ++i) {
    const double delta =
        static_cast<double>(candidates[i].size()) - static_cast<double>(references[i].size());
    const double length_penalty = std::exp(-delta * delta / (2.0 * kCiderSigma * kCiderSigma));
    double order_sum = 0.0;
    for (int n = 1; n <= kCiderOrders; ++n) {
      TfidfVec cand = tfidf(ngram_counts(candidates[i], static_cast<size_t>(n)),
                            doc_freq[n - 1], log_n);
      TfidfVec ref = tfidf(ngram_counts(references[i], static_cast<size_t>(n)),
                           doc_freq[n - 1], log_n);
      double sim = 0.0;
      if (cand.norm_sq > 0 && ref.norm_sq > 0) {
        double num = 0.0;
        for (const auto& [gram, wc] : cand.weights) {
          auto it = ref.weights.find(gram);
          if (it != ref.weights.end()) num += std::min(wc, it->second) * it->second;
        }
        sim = num / std::sqrt(cand.norm_sq * ref.norm_sq);
      }
      order_sum += sim * length_penalty;
    }
    corpus_sum += 10.0 * order_sum / kCiderOrders;
  }
  return corpus_sum / static_cast<double>(n_cases);
}

MetricsReport score_all(const std::vector<TokenSequence>& candidates,
                        const std::vector<TokenSequence>& references) {
  check_aligned(candidates, references);
  MetricsReport report;
  report.bleu1 = bleu(candidates, references, 1);
  report.bleu2 = bleu(candidates, references, 2);
  report.bleu3 = bleu(candidates, references, 3);
  report.bleu4 = bleu(candidates, references, 4);
  report.meteor = meteor(candidates, references);
  report.rouge_l = rouge_l(candidates, references);
  report.cider = cider(candidates, references);
  report.n_cases = candidates.size();
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  return nlohmann::json{{"bleu1", bleu1},     {"bleu2", bleu2},   {"bleu3", bleu3},
                        {"bleu4", bleu4},     {"meteor", meteor}, {"rouge_l", rouge_l},
                        {"cider", cider},     {"n_cases", n_cases}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.bleu1 = j.at("bleu1").get<double>();
  r.bleu2 = j.at("bleu2").get<double>();
  r.bleu3 = j.at("bleu3").get<double>();
  r.bleu4 = j.at("bleu4").get<double>();
  r.meteor = j.at("meteor").get<double>();
  r.rouge_l = j.at("rouge_l").get<double>();
  r.cider = j.at("cider").get<double>();
  r.n_cases = j.at("n_cases").get<size_t>();
  return r;
}

std::string MetricsReport::to_csv() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%zu\n", bleu1, bleu2,
                bleu3, bleu4, meteor, rouge_l, cider, n_cases);
  return std::string("bleu1,bleu2,bleu3,bleu4,meteor,rouge_l,cider,n_cases\n") + buf;
}

std::string MetricsReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-8s %-8s %-8s %-8s %-8s %-8s %-8s\n"
                "%-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f\n",
                "BLEU1", "BLEU2", "BLEU3", "BLEU4", "Meteor", "ROUGE-L", "Cider", bleu1, bleu2,
                bleu3, bleu4, meteor, rouge_l, cider);
  return buf;
}

}  // namespace mocoll
