"""Robust min-max programs solved by local reduction."""

from ._core import (
    LoadError,
    Problem,
    build_example,
    canonical,
    cli,
    evaluate,
    gradient,
    monte_carlo,
    oracle_estimation,
    oracle_saturation,
    solve,
)

__all__ = [
    "LoadError",
    "Problem",
    "build_example",
    "canonical",
    "cli",
    "evaluate",
    "gradient",
    "monte_carlo",
    "oracle_estimation",
    "oracle_saturation",
    "solve",
]
