"""Multilingual answer-sentence reranking: dataset composition, ranking metrics and experiment runs."""

import json as _json

from . import _core
from ._core import (
    Dataset,
    DatasetStats,
    DataError,
    Error,
    IoError,
    RemoteError,
    TranslationError,
    UsageError,
    average_precision,
    compose,
    concat,
    delta,
    early_stop,
    evaluate,
    lexical_score,
    linear_head,
    mix,
    mock_translate,
    parse_composition,
    render_composition,
    reciprocal_rank,
    round_to_tenth,
    transfer,
)


def run_experiment(config, persist=True):
    """Run an experiment config file and return the run record as a dict."""
    return _json.loads(_core.run_experiment(str(config), persist))


__all__ = [name for name in dir() if not name.startswith("_")]
