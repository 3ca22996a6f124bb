"""Review-aware Bayesian personalized ranking."""

from ._core import (
    ChecksumError,
    ConfigError,
    ContractError,
    DataError,
    DivergenceError,
    Error,
    Model,
    __version__,
    evaluate,
    improvement,
    prepare,
    recommend,
    run,
    stats,
    tokenize,
    train,
)

__all__ = [
    "ChecksumError",
    "ConfigError",
    "ContractError",
    "DataError",
    "DivergenceError",
    "Error",
    "Model",
    "evaluate",
    "improvement",
    "prepare",
    "recommend",
    "run",
    "stats",
    "tokenize",
    "train",
]
