#include "mocoll/metrics.hpp"

#include <cmath>

#include "doctest.h"
#include "golden_fixture.hpp"
#include "mocoll/error.hpp"
#include "mocoll/rng.hpp"
#include "mocoll/text.hpp"
#include "oracles.hpp"

using namespace mocoll;
using mocoll::testing::cider_oracle;
using mocoll::testing::lcs_oracle;

namespace {

std::vector<TokenSequence> toks(std::initializer_list<const char*> texts) {
  std::vector<TokenSequence> out;
  for (const char* t : texts) out.push_back(tokenize(t));
  return out;
}

TokenSequence random_tokens(Rng& rng, size_t max_len) {
  static const std::vector<std::string> words = {"the",  "lungs", "are",   "clear", "no",
                                                 "acute", "heart", "size",  "normal", "pleural",
                                                 "effusion", "seen"};
  TokenSequence out;
  const size_t n = rng.below(max_len + 1);
  for (size_t i = 0; i < n; ++i) out.push_back(words[rng.below(words.size())]);
  return out;
}

}  // namespace

TEST_CASE("bleu identity is exactly 1.0") {
  auto cands = toks({"no acute cardiopulmonary process", "the lungs are clear"});
  for (int order = 1; order <= 4; ++order) CHECK(bleu(cands, cands, order) == 1.0);
}

TEST_CASE("bleu: modified unigram precision with BP = 1") {
  auto cands = toks({"no acute cardiopulmonary process"});
  auto refs = toks({"no acute cardiopulmonary abnormality"});
  CHECK(bleu(cands, refs, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("bleu: brevity penalty e^(1 - r/c)") {
  auto cands = toks({"the cat sat"});
  auto refs = toks({"the cat sat on the mat"});
  CHECK(bleu(cands, refs, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("bleu edge cases") {
  auto refs = toks({"the lungs are clear"});
  CHECK(bleu(toks({""}), refs, 1) == 0.0);  // empty candidate contributes zero n-grams
  CHECK(bleu(toks({"completely disjoint tokens"}), refs, 1) == 0.0);
  CHECK_THROWS_AS(bleu({}, {}, 1), Error);
  CHECK_THROWS_AS(bleu(toks({"a"}), toks({"a", "b"}), 1), Error);
  CHECK_THROWS_AS(bleu(toks({"a"}), toks({"a"}), 5), Error);
}

TEST_CASE("bleu-1 monotonicity probe: corrupting one matching token never helps") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSequence ref = random_tokens(rng, 10);
    if (ref.empty()) continue;
    TokenSequence cand = ref;
    const double before = bleu({cand}, {ref}, 1);
    cand[rng.below(cand.size())] = "zzz-out-of-vocab";
    const double after = bleu({cand}, {ref}, 1);
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("rouge_l identity and disjoint cases") {
  auto cands = toks({"heart size is normal"});
  CHECK(rouge_l(cands, cands) == 1.0);
  CHECK(rouge_l(toks({"alpha beta"}), toks({"gamma delta"})) == 0.0);
}

TEST_CASE("rouge_l single-pair F-measure") {
  auto cand = tokenize("the lungs are clear");
  auto ref = tokenize("lungs are clear");
  CHECK(rouge_l_single(cand, ref) == doctest::Approx(0.879807692307692).epsilon(1e-12));
}

TEST_CASE("lcs_length agrees with the DP oracle on 1000 random pairs") {
  Rng rng(555);
  for (int trial = 0; trial < 1000; ++trial) {
    TokenSequence a = random_tokens(rng, 12);
    TokenSequence b = random_tokens(rng, 12);
    CHECK(lcs_length(a, b) == lcs_oracle(a, b));
  }
}

TEST_CASE("meteor per-formula examples") {
  // identity: matches=3, chunks=1, penalty = 0.5 * (1/3)^3
  CHECK(meteor(toks({"the cat sat"}), toks({"the cat sat"})) ==
        doctest::Approx(0.981481481481482).epsilon(1e-12));
  // single token: penalty = 0.5
  CHECK(meteor(toks({"clear"}), toks({"clear"})) == doctest::Approx(0.5).epsilon(1e-12));
  // no common tokens or stems
  CHECK(meteor(toks({"alpha beta"}), toks({"gamma delta"})) == 0.0);
}

TEST_CASE("meteor stem stage matches inflected forms") {
  // "change" vs "changes" only match through the stemmer
  const double with_stem = meteor(toks({"degenerative change"}), toks({"degenerative changes"}));
  CHECK(with_stem > 0.5);
  // two chunks: re-ordered tokens
  const double reordered = meteor(toks({"lungs clear"}), toks({"clear lungs"}));
  // matches=2, P=R=1, Fmean=1, chunks=2, penalty=0.5
  CHECK(reordered == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("meteor duplicate tokens align in order") {
  // cand "the cat the" vs ref "the the cat": exact stage pairs
  // (0,0), (1,2), (2,1) -> chunks = 3, matches = 3
  // P = R = 1, Fmean = 1, penalty = 0.5 * (3/3)^3 = 0.5
  CHECK(meteor(toks({"the cat the"}), toks({"the the cat"})) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cider: single-case corpus degenerates to zero") {
  CHECK(cider(toks({"the lungs are clear"}), toks({"the lungs are clear"})) == 0.0);
}

TEST_CASE("cider: identity on a well-conditioned fixture scores 10") {
  auto refs = mocoll::testing::well_conditioned_refs();
  CHECK(cider(refs, refs) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("cider agrees with the brute-force oracle on the 3-case fixture") {
  auto cands = toks({"the heart is enlarged", "lungs are clear", "no pleural effusion"});
  auto refs = toks({"the heart is enlarged", "the lungs are clear", "no pneumothorax is seen"});
  const double lib = cider(cands, refs);
  const double oracle = cider_oracle(cands, refs);
  CHECK(lib == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(lib - oracle) < 1e-9);
  // value also derived independently by tests/python/oracle_metrics.py
  CHECK(lib == doctest::Approx(5.657215704547188).epsilon(1e-9));
}

TEST_CASE("cider agrees with the brute-force oracle on random corpora") {
  Rng rng(777);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<TokenSequence> cands, refs;
    const size_t n = 2 + rng.below(5);
    for (size_t i = 0; i < n; ++i) {
      cands.push_back(random_tokens(rng, 8));
      refs.push_back(random_tokens(rng, 8));
    }
    CHECK(cider(cands, refs) == doctest::Approx(cider_oracle(cands, refs)).epsilon(1e-10));
  }
}

TEST_CASE("score_all populates every field and rejects mismatched lists") {
  std::vector<TokenSequence> cands, refs;
  mocoll::testing::golden_token_lists(cands, refs);
  MetricsReport report = score_all(cands, refs);
  CHECK(report.n_cases == 6);
  const mocoll::testing::GoldenScores golden;
  CHECK(report.bleu1 == doctest::Approx(golden.bleu1).epsilon(1e-9));
  CHECK(report.bleu2 == doctest::Approx(golden.bleu2).epsilon(1e-9));
  CHECK(report.bleu3 == doctest::Approx(golden.bleu3).epsilon(1e-9));
  CHECK(report.bleu4 == doctest::Approx(golden.bleu4).epsilon(1e-9));
  CHECK(report.meteor == doctest::Approx(golden.meteor).epsilon(1e-9));
  CHECK(report.rouge_l == doctest::Approx(golden.rouge_l).epsilon(1e-9));
  CHECK(report.cider == doctest::Approx(golden.cider).epsilon(1e-9));

  cands.pop_back();
  CHECK_THROWS_AS(score_all(cands, refs), Error);
}

TEST_CASE("metrics are permutation equivariant") {
  std::vector<TokenSequence> cands, refs;
  mocoll::testing::golden_token_lists(cands, refs);
  std::vector<TokenSequence> cands_p = {cands[3], cands[5], cands[0], cands[2], cands[4], cands[1]};
  std::vector<TokenSequence> refs_p = {refs[3], refs[5], refs[0], refs[2], refs[4], refs[1]};
  CHECK(bleu(cands, refs, 4) == doctest::Approx(bleu(cands_p, refs_p, 4)).epsilon(1e-12));
  CHECK(rouge_l(cands, refs) == doctest::Approx(rouge_l(cands_p, refs_p)).epsilon(1e-12));
  CHECK(meteor(cands, refs) == doctest::Approx(meteor(cands_p, refs_p)).epsilon(1e-12));
  CHECK(cider(cands, refs) == doctest::Approx(cider(cands_p, refs_p)).epsilon(1e-12));
}

TEST_CASE("metric ranges on random data") {
  Rng rng(31337);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TokenSequence> cands, refs;
    const size_t n = 1 + rng.below(4);
    for (size_t i = 0; i < n; ++i) {
      cands.push_back(random_tokens(rng, 8));
      refs.push_back(random_tokens(rng, 8));
    }
    for (int order = 1; order <= 4; ++order) {
      const double b = bleu(cands, refs, order);
      CHECK(b >= 0.0);
      CHECK(b <= 1.0 + 1e-12);
    }
    const double r = rouge_l(cands, refs);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0 + 1e-12);
    const double m = meteor(cands, refs);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0 + 1e-12);
    const double c = cider(cands, refs);
    CHECK(c >= 0.0);
    CHECK(c <= 10.0 + 1e-9);
  }
}

TEST_CASE("MetricsReport serialization round trips") {
  MetricsReport report;
  report.bleu1 = 0.5;
  report.bleu2 = 0.25;
  report.bleu3 = 0.125;
  report.bleu4 = 0.0625;
  report.meteor = 0.3;
  report.rouge_l = 0.4;
  report.cider = 2.5;
  report.n_cases = 7;
  MetricsReport back = MetricsReport::from_json(report.to_json());
  CHECK(back.bleu4 == report.bleu4);
  CHECK(back.n_cases == 7);
  CHECK(report.to_csv().find("bleu1,bleu2,bleu3,bleu4,meteor,rouge_l,cider,n_cases") == 0);
}
