"""Latent tree recovery from distance oracles."""

from ._latree import *  # noqa: F401,F403
from ._latree import (
    EstimateDegenerate,
    InvalidDelta,
    LatreeError,
    NoiseTooLarge,
    NotATreeMetric,
    ParseError,
    RoundBudgetExceeded,
    Tree,
)

__version__ = "0.1.0"
