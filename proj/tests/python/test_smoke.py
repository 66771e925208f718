import json
import math
import os
import tempfile

import pytest

import spirit


def bigram():
    return spirit.NgramOracle.train(["a b a b"], order=2, alpha=1.0)


def test_perplexity_matches_definition():
    assert spirit.perplexity([0.0, math.log(0.5), math.log(0.5)]) == pytest.approx(2.0, rel=1e-12)
    assert spirit.perplexity([math.log(0.5)] * 2, skip_first_token=False) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(spirit.SpiritError):
        spirit.perplexity([0.0])


def test_ngram_scores_and_generates():
    m = bigram()
    tokens = m.score("a", "b")
    assert [t for t, _ in tokens] == ["b"]
    assert tokens[0][1] == pytest.approx(math.log(3 / 4), rel=1e-12)
    assert m.generate("a", max_tokens=1) == "b"
    assert spirit.NgramOracle.parse(m.serialize()).score("a", "b") == tokens


def test_statistics():
    assert spirit.pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert spirit.pearson_p(-0.690, 10) == pytest.approx(0.0272, abs=5e-4)
    assert spirit.pearson_p(-0.690, 10, sided="less") == pytest.approx(spirit.pearson_p(-0.690, 10) / 2)


def test_answers_and_segmentation():
    assert spirit.extract_answer("so\nThe answer is 27.") == "27"
    assert spirit.answers_match("12.0", "12")
    assert spirit.segment_steps("x\n\ny\n") == ["x", "y"]


def test_refine_sample_keeps_answer():
    oracle = spirit.NgramOracle.train(["q a b c the answer is 1"], order=2, alpha=0.5, add_unk=True)
    record = {"id": "s", "question": "q", "reasoning": "a\nb\nzzz\nThe answer is 1", "answer": "1"}
    refined, trace = spirit.refine_sample(record, oracle, t2=1e6)
    assert refined["reasoning"].endswith("The answer is 1")
    assert trace["iterations"][-1]["decision"] == "stopped"
    assert trace["sample_id"] == "s"


def test_cli_exit_codes():
    code, out, _ = spirit.run_cli(["--help"])
    assert code == 0 and "refine-ft" in out
    code, _, err = spirit.run_cli(["refine-ft", "--in", "/nonexistent.jsonl", "--out", "x", "--backend", "ngram:y"])
    assert code == 4 and "/nonexistent.jsonl" in err
