"""Synthetic truths, Bernoulli match sampling and paired replication experiments."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .data import Dataset, MatchRecord, TeamIndex
from .evaluation import TestResult, wilcoxon_signed_rank
from .links import sigmoid
from .model import CLAMP, LogOddsMatrix, ModelSpec, Structure, named_spec
from .rng import stream
from .training import DEFAULT_RATES, Regime, default_grid, grid_search, mean_outcome_loglik, run_regime

__all__ = [
    "Rank2Gaussian",
    "Rank4Orthonormal",
    "Rank4Gaussian",
    "EloGaussian",
    "SynthSpec",
    "gen_truth",
    "sample_matches",
    "ReplicationRow",
    "ExperimentResult",
    "replicate_experiment",
]


def _positive(**kw):
    for name, value in kw.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Rank2Gaussian:
    mu: float = 1.0
    sigma: float = 0.7

    def __post_init__(self):
        _positive(sigma=self.sigma)


@dataclass(frozen=True)
class Rank4Orthonormal:
    s1: float = 25.0
    s2: float = 24.0

    def __post_init__(self):
        _positive(s1=self.s1, s2=self.s2)


@dataclass(frozen=True)
class Rank4Gaussian:
    mu: float = 1.0
    sigma: float = 0.7

    def __post_init__(self):
        _positive(sigma=self.sigma)


@dataclass(frozen=True)
class EloGaussian:
    sd: float = 0.8

    def __post_init__(self):
        _positive(sd=self.sd)


Truth = Union[Rank2Gaussian, Rank4Orthonormal, Rank4Gaussian, EloGaussian]
TRUTHS = {"rank2": Rank2Gaussian, "rank4": Rank4Orthonormal, "rank4gauss": Rank4Gaussian, "elo": EloGaussian}


@dataclass(frozen=True)
class SynthSpec:
    q: int = 47
    truth: Truth = field(default_factory=Rank2Gaussian)
    matches_per_pair: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("need at least two teams")
        if self.matches_per_pair < 1:
            raise ValueError("matches_per_pair must be at least 1")


def _orthonormal_frame(q: int, k: int, rng: np.random.Generator, retries: int = 10) -> np.ndarray:
    """Columns: normalized ones, then k Gram-Schmidt-orthonormalized Gaussian draws."""
    if q < k + 1:
        raise ValueError(f"need at least {k + 1} teams for {k} directions orthogonal to ones")
    basis = [np.ones(q) / math.sqrt(q)]
    for _ in range(k):
        for _attempt in range(retries):
            x = rng.standard_normal(q)
            for b in basis:
                x -= (x @ b) * b
            for b in basis:  # second pass for numerical orthogonality
                x -= (x @ b) * b
            norm = np.linalg.norm(x)
            if norm > 1e-8:
                basis.append(x / norm)
                break
        else:
            raise RuntimeError("Gram-Schmidt kept producing degenerate directions")
    return np.column_stack(basis)


def gen_truth(spec: SynthSpec, rng: np.random.Generator | None = None) -> LogOddsMatrix:
    """Draw a ground-truth antisymmetric log-odds matrix."""
    rng = rng if rng is not None else stream(spec.seed)
    q, t = spec.q, spec.truth
    ones = np.ones(q)
    if isinstance(t, Rank2Gaussian):
        u, v = rng.normal(t.mu, t.sigma, (2, q))
        m, structure = np.outer(u, v), Structure.TWO_FACTOR
    elif isinstance(t, Rank4Gaussian):
        u, v, theta = rng.normal(t.mu, t.sigma, (3, q))
        m, structure = np.outer(u, v) + np.outer(theta, ones), Structure.RANK_FOUR
    elif isinstance(t, Rank4Orthonormal):
        frame = _orthonormal_frame(q, 3, rng)
        e, u, v, theta = frame.T
        m, structure = t.s1 * np.outer(u, v) + t.s2 * np.outer(theta, e), Structure.RANK_FOUR
    elif isinstance(t, EloGaussian):
        theta = rng.normal(0.0, t.sd, q)
        m, structure = np.outer(theta, ones), Structure.RANK2
    else:
        raise TypeError(f"unknown truth {t!r}")
    # M - M' is exactly antisymmetric in floating point
    return LogOddsMatrix(m - m.T, structure)


def sample_matches(
    truth: LogOddsMatrix,
    matches_per_pair: int,
    rng: np.random.Generator | int = 0,
    start: dt.date = dt.date(2000, 1, 1),
    teams: TeamIndex | None = None,
) -> Dataset:
    """``matches_per_pair`` Bernoulli(sigmoid(L_ij)) outcomes per unordered pair.

    The lower index is always the home side. Matches are shuffled, then given
    one strictly increasing date each starting at ``start``. A home win is
    stored as 1-0 and an away win as 0-1.
    """
    if not truth.is_antisymmetric(1e-9):
        raise ValueError("truth must be antisymmetric")
    if isinstance(rng, (int, np.integer)):
        rng = stream(int(rng))
    q = truth.entries.shape[0]
    ii, jj = np.triu_indices(q, 1)
    ii = np.repeat(ii, matches_per_pair)
    jj = np.repeat(jj, matches_per_pair)
    order = rng.permutation(len(ii))
    ii, jj = ii[order], jj[order]
    p = sigmoid(np.clip(truth.entries[ii, jj], -CLAMP, CLAMP))
    wins = rng.random(len(ii)) < p
    teams = teams if teams is not None else TeamIndex(f"T{k:02d}" for k in range(q))
    recs = tuple(
        MatchRecord(start + dt.timedelta(days=k), int(i), int(j), int(w), int(not w))
        for k, (i, j, w) in enumerate(zip(ii, jj, wins))
    )
    return Dataset(recs, teams)


# ---------------------------------------------------------------------------
# replication


@dataclass(frozen=True)
class ReplicationRow:
    rep: int
    model: str
    learning_rate: float
    mean_loglik: float
    accuracy: float
    n_test: int


@dataclass
class ExperimentResult:
    rows: list[ReplicationRow]
    models: tuple[str, ...]
    reps: int
    seed: int

    def metric(self, model: str, name: str) -> np.ndarray:
        vals = {r.rep: getattr(r, name) for r in self.rows if r.model == model}
        return np.array([vals[k] for k in sorted(vals)])

    def compare(self, a: str, b: str, metric: str = "mean_loglik", alternative: str = "greater") -> TestResult:
        """Wilcoxon signed-rank on the paired per-replication metric; ``greater``: a beats b."""
        return wilcoxon_signed_rank(self.metric(a, metric), self.metric(b, metric), alternative)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "model", "learning_rate", "mean_loglik", "accuracy", "n_test"])
            for r in self.rows:
                w.writerow([r.rep, r.model, repr(r.learning_rate), repr(r.mean_loglik), repr(r.accuracy), r.n_test])


def _accuracy(preds, data: Dataset) -> float:
    return sum(p.argmax() == rec.outcome for p, rec in zip(preds, data.records)) / len(data)


def run_replication(
    spec: SynthSpec,
    models: Sequence[str],
    rep: int,
    seed: int,
    rates: Sequence[float] = DEFAULT_RATES,
) -> list[ReplicationRow]:
    """One replication: fresh truth and data, online tuning on validation, test evaluation."""
    rng = stream(seed, rep)
    truth = gen_truth(spec, rng)
    n = spec.matches_per_pair
    val = sample_matches(truth, n, rng)
    test = sample_matches(truth, n, rng, val.records[-1].date + dt.timedelta(days=1), val.teams)
    empty = Dataset((), val.teams)
    rows = []
    for name in models:
        mspec = named_spec(name, "binary", spec.q)
        grid = default_grid(rates, seed=rep)
        tuned = grid_search(mspec, empty, val, grid, regime=Regime.ONLINE)
        # the tuned model carries its validation-set state into the test pass
        res = run_regime(mspec, Regime.ONLINE, val, test, tuned.best)
        preds = res.predictions[0]
        rows.append(ReplicationRow(rep, name, tuned.best.learning_rate,
                                   mean_outcome_loglik(preds, test), _accuracy(preds, test), len(test)))
    return rows


def replicate_experiment(
    spec: SynthSpec,
    models: Sequence[str | ModelSpec],
    reps: int = 20,
    seed: int | None = None,
    rates: Sequence[float] = DEFAULT_RATES,
    workers: int = 1,
) -> ExperimentResult:
    """Paired comparison of models over ``reps`` independent replications.

    Replication r draws everything from ``stream(seed, r)``, so results do not
    depend on ``workers``.
    """
    if reps < 2:
        raise ValueError("need at least two replications")
    names = tuple(m if isinstance(m, str) else _spec_name(m) for m in models)
    seed = spec.seed if seed is None else seed
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_replication, [spec] * reps, [names] * reps, range(reps),
                                   [seed] * reps, [tuple(rates)] * reps))
    else:
        chunks = [run_replication(spec, names, r, seed, rates) for r in range(reps)]
    return ExperimentResult([row for chunk in chunks for row in chunk], names, reps, seed)


def _spec_name(m: ModelSpec) -> str:
    from .model import MODEL_NAMES

    for name, (structure, cov) in MODEL_NAMES.items():
        if structure is m.structure and cov == m.covariates:
            return name
    raise ValueError(f"no short name for {m}")
