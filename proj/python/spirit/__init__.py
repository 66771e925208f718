import json

from ._spirit import (
    NgramOracle,
    SpiritError,
    answers_match,
    extract_answer,
    pearson,
    pearson_p,
    perplexity,
    run_cli,
    segment_steps,
)
from ._spirit import _refine_sample

__all__ = [
    "NgramOracle",
    "SpiritError",
    "answers_match",
    "extract_answer",
    "pearson",
    "pearson_p",
    "perplexity",
    "refine_sample",
    "run_cli",
    "segment_steps",
]


def refine_sample(sample, oracle, *, t1=1.0, t2=1.2, strategy="min_ppl", merge_policy="standard",
                  skip_first_token=True, seed=0, min_steps=1):
    """Refine one corpus record; returns (refined record, trace)."""
    out = json.loads(_refine_sample(json.dumps(sample), oracle, t1, t2, strategy, merge_policy,
                                    skip_first_token, seed, min_steps))
    return out["refined"], out["trace"]
