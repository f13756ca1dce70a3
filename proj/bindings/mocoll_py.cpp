#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mocoll/backends.hpp"
#include "mocoll/corpus.hpp"
#include "mocoll/curation.hpp"
#include "mocoll/metrics.hpp"
#include "mocoll/simharness.hpp"
#include "mocoll/text.hpp"

namespace py = pybind11;

namespace {

std::vector<mocoll::TokenSequence> tokenize_all(const std::vector<std::string>& texts) {
  std::vector<mocoll::TokenSequence> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mocoll::tokenize(t));
  return out;
}

py::dict score_all_py(const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references) {
  auto report = mocoll::score_all(tokenize_all(candidates), tokenize_all(references));
  py::dict d;
  d["bleu1"] = report.bleu1;
  d["bleu2"] = report.bleu2;
  d["bleu3"] = report.bleu3;
  d["bleu4"] = report.bleu4;
  d["meteor"] = report.meteor;
  d["rouge_l"] = report.rouge_l;
  d["cider"] = report.cider;
  d["n_cases"] = report.n_cases;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mocoll, m) {
  m.doc() = "Caption metrics, text preprocessing and simulation oracles from the mocoll core";

  m.def("tokenize", [](const std::string& text) { return mocoll::tokenize(text); },
        py::arg("text"), "Normalize and whitespace-tokenize a caption");
  m.def("normalize_text", [](const std::string& text) { return mocoll::normalize_text(text); },
        py::arg("text"));
  m.def("stem", [](const std::string& word) { return mocoll::porter_stem(word); },
        py::arg("word"), "Porter-stem a lowercase word");
  m.def("compose_report", &mocoll::compose_report, py::arg("finding"), py::arg("impression"));

  m.def(
      "bleu",
      [](const std::vector<std::string>& cands, const std::vector<std::string>& refs,
         int max_order) { return mocoll::bleu(tokenize_all(cands), tokenize_all(refs), max_order); },
      py::arg("candidates"), py::arg("references"), py::arg("max_order") = 4,
      "Corpus-level BLEU over raw caption strings");
  m.def(
      "rouge_l",
      [](const std::vector<std::string>& cands, const std::vector<std::string>& refs) {
        return mocoll::rouge_l(tokenize_all(cands), tokenize_all(refs));
      },
      py::arg("candidates"), py::arg("references"));
  m.def(
      "meteor",
      [](const std::vector<std::string>& cands, const std::vector<std::string>& refs) {
        return mocoll::meteor(tokenize_all(cands), tokenize_all(refs));
      },
      py::arg("candidates"), py::arg("references"));
  m.def(
      "cider",
      [](const std::vector<std::string>& cands, const std::vector<std::string>& refs) {
        return mocoll::cider(tokenize_all(cands), tokenize_all(refs));
      },
      py::arg("candidates"), py::arg("references"));
  m.def("score_all", &score_all_py, py::arg("candidates"), py::arg("references"),
        "All corpus metrics as a dict (bleu1..4, meteor, rouge_l, cider, n_cases)");

  m.def("cosine_similarity", &mocoll::cosine_similarity, py::arg("a"), py::arg("b"));
  m.def(
      "lcs_length",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        return mocoll::lcs_length(a, b);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "simulate_world_reports",
      [](int n_cases, uint64_t seed, int min_findings, int max_findings) {
        mocoll::FindingWorld world = mocoll::FindingWorld::defaults();
        world.seed = seed;
        world.min_findings = min_findings;
        world.max_findings = max_findings;
        auto sim = mocoll::generate_world(world, n_cases);
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& c : sim->cases) out.emplace_back(c.base.case_id, c.base.report_text);
        return out;
      },
      py::arg("n_cases"), py::arg("seed") = 0, py::arg("min_findings") = 3,
      py::arg("max_findings") = 5,
      "Deterministic synthetic (case_id, report) pairs from the finding world");
}
