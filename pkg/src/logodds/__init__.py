"""Structured log-odds models for competitive team sports."""

__version__ = "0.1.0"

from .data import Dataset, MatchRecord, Outcome, OutcomeDistribution, TeamIndex, parse_csv
from .model import Link, ModelSpec, ModelState, Structure, named_spec, predict
from .training import Regime, TrainConfig, fit_batch, run_regime, run_schedule

__all__ = [
    "Dataset",
    "MatchRecord",
    "Outcome",
    "OutcomeDistribution",
    "TeamIndex",
    "parse_csv",
    "Link",
    "ModelSpec",
    "ModelState",
    "Structure",
    "named_spec",
    "predict",
    "Regime",
    "TrainConfig",
    "fit_batch",
    "run_regime",
    "run_schedule",
]
