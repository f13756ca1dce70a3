"""Smoke tests for the pybind11 module, cross-checked against the pure-python
oracle implementations."""

import math

import pytest

import mocoll
from oracle_metrics import GOLDEN_FIXTURE, golden_scores


def test_tokenize_and_normalize():
    assert mocoll.tokenize("The LUNGS are clear.") == ["the", "lungs", "are", "clear"]
    assert mocoll.normalize_text("  No   acute  disease. ") == "no acute disease"


def test_stemmer():
    assert mocoll.stem("changes") == "chang"
    assert mocoll.stem("running") == "run"
    assert mocoll.stem("happiness") == "happi"


def test_compose_report():
    assert mocoll.compose_report("lungs clear.", "no acute disease.") == (
        "lungs clear. no acute disease."
    )
    assert mocoll.compose_report("", "no acute disease.") == "no acute disease."
    with pytest.raises(RuntimeError):
        mocoll.compose_report("", "")


def test_identity_scores():
    refs = ["no acute cardiopulmonary abnormality", "the lungs are clear"]
    assert mocoll.bleu(refs, refs, 4) == 1.0
    assert mocoll.rouge_l(refs, refs) == 1.0


def test_brevity_penalty_case():
    got = mocoll.bleu(["the cat sat"], ["the cat sat on the mat"], 1)
    assert got == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_rouge_example():
    got = mocoll.rouge_l(["the lungs are clear"], ["lungs are clear"])
    assert got == pytest.approx(0.879807692307692, abs=1e-12)


def test_cider_single_case_degenerates():
    assert mocoll.cider(["the lungs are clear"], ["the lungs are clear"]) == 0.0


def test_score_all_matches_python_oracle():
    cands = [c for _, c, _ in GOLDEN_FIXTURE]
    refs = [r for _, _, r in GOLDEN_FIXTURE]
    got = mocoll.score_all(cands, refs)
    expected = golden_scores()
    for name, value in expected.items():
        assert got[name] == pytest.approx(value, abs=1e-9), name
    assert got["n_cases"] == len(cands)


def test_cosine_similarity():
    assert mocoll.cosine_similarity([1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0)
    assert mocoll.cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)
    assert mocoll.cosine_similarity([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0)
    assert mocoll.cosine_similarity([0.0, 0.0], [1.0, 1.0]) == 0.0
    with pytest.raises(RuntimeError):
        mocoll.cosine_similarity([1.0], [1.0, 2.0])


def test_lcs_length():
    assert mocoll.lcs_length(["a", "b", "c"], ["b", "c", "d"]) == 2
    assert mocoll.lcs_length([], ["x"]) == 0


def test_simulated_world_is_deterministic():
    a = mocoll.simulate_world_reports(5, seed=9, min_findings=4, max_findings=4)
    b = mocoll.simulate_world_reports(5, seed=9, min_findings=4, max_findings=4)
    assert a == b
    assert len(a) == 5
    case_id, report = a[0]
    assert case_id.startswith("sim-")
    assert report.count("there is") >= 4
