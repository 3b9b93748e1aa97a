"""Losses, prequential validation reports and paired comparison statistics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc

from .data import Dataset, Outcome, OutcomeDistribution
from .rng import stream
from .training import Regime, TrainConfig, run_regime

__all__ = [
    "log_loss",
    "brier_loss",
    "CaseRow",
    "ValidationReport",
    "temporal_validate",
    "StructuredRunner",
    "ConstantRunner",
    "bootstrap_ci",
    "clopper_pearson",
    "TestResult",
    "paired_t_test",
    "wilcoxon_signed_rank",
]

Runner = Callable[[Dataset, Dataset], Sequence["OutcomeDistribution | None"]]


def log_loss(pred: OutcomeDistribution, observed: Outcome | int) -> float:
    """-log of the mass on the observed outcome; ``inf`` when that mass is zero."""
    m = pred.mass(observed)
    return math.inf if m <= 0.0 else -math.log(m)


def brier_loss(pred: OutcomeDistribution, observed: Outcome | int) -> float:
    obs = int(observed)
    probs = (pred.p_win, pred.p_draw, pred.p_lose)
    return (1.0 - probs[obs]) ** 2 + sum(p * p for k, p in enumerate(probs) if k != obs)


# ---------------------------------------------------------------------------
# validation harness


@dataclass(frozen=True)
class CaseRow:
    match_id: int
    home: int
    away: int
    prediction: OutcomeDistribution
    observed: Outcome
    log_loss: float
    brier: float
    correct: bool


@dataclass
class ValidationReport:
    """Per-test-case rows plus aggregates; aggregates are recomputable from rows."""

    rows: list[CaseRow]
    skipped: int = 0
    leaks: int = 0
    bootstrap_reps: int = 5000
    seed: int = 0
    aggregates: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = self.compute_aggregates()

    @property
    def loglik_values(self) -> np.ndarray:
        return -np.array([r.log_loss for r in self.rows])

    def compute_aggregates(self) -> dict:
        n = len(self.rows)
        losses = np.array([r.log_loss for r in self.rows])
        finite = losses[np.isfinite(losses)]
        correct = sum(r.correct for r in self.rows)
        agg = {
            "n_cases": n,
            "n_skipped": self.skipped,
            "n_infinite_log_loss": int(n - len(finite)),
            "prequential_leaks": self.leaks,
            "mean_log_loss": float(losses.mean()) if n else math.nan,
            "mean_loglik": float(-losses.mean()) if n else math.nan,
            "mean_brier": float(np.mean([r.brier for r in self.rows])) if n else math.nan,
            "accuracy": correct / n if n else math.nan,
        }
        if len(finite):
            lo, hi = bootstrap_ci(-finite, self.bootstrap_reps, 0.95, self.seed)
            agg["mean_loglik_ci"] = [lo, hi]
        if n:
            agg["accuracy_ci"] = list(clopper_pearson(correct, n))
        return agg

    def to_csv(self, path: str | Path, teams=None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["match_id", "home", "away", "p_win", "p_draw", "p_lose", "observed", "log_loss", "brier", "correct"])
            for r in self.rows:
                home = teams.name(r.home) if teams is not None else r.home
                away = teams.name(r.away) if teams is not None else r.away
                p = r.prediction
                w.writerow([r.match_id, home, away, repr(p.p_win), repr(p.p_draw), repr(p.p_lose),
                            r.observed.code, repr(r.log_loss), repr(r.brier), int(r.correct)])

    def to_json(self, path: str | Path, **extra) -> None:
        Path(path).write_text(json.dumps({**self.aggregates, **extra}, indent=2), encoding="utf-8")


def make_report(
    preds: Sequence[OutcomeDistribution | None],
    test: Dataset,
    leaks: int = 0,
    bootstrap_reps: int = 5000,
    seed: int = 0,
) -> ValidationReport:
    if len(preds) != len(test):
        raise ValueError("one prediction per test record is required")
    rows, skipped = [], 0
    for k, (p, rec) in enumerate(zip(preds, test.records)):
        if p is None:
            skipped += 1
            continue
        obs = rec.outcome
        rows.append(CaseRow(k, rec.home, rec.away, p, obs, log_loss(p, obs), brier_loss(p, obs), p.argmax() == obs))
    return ValidationReport(rows, skipped, leaks, bootstrap_reps, seed)


def temporal_validate(
    runner: Runner,
    train: Dataset,
    test: Dataset,
    bootstrap_reps: int = 5000,
    seed: int = 0,
) -> ValidationReport:
    """Run ``runner`` over train then test and score only the test predictions."""
    if len(train) and len(test) and not train.records[-1].date < test.records[0].date:
        raise ValueError("all training matches must be dated before the first test match")
    preds = runner(train, test)
    return make_report(preds, test, getattr(runner, "leaks", 0), bootstrap_reps, seed)


class StructuredRunner:
    """Prequential predictions from a structured log-odds model under a training regime."""

    def __init__(self, spec, regime: Regime | str, cfg: TrainConfig):
        self.spec = spec
        self.regime = Regime(regime)
        self.cfg = cfg
        self.leaks = 0
        self.state = None

    def __call__(self, train: Dataset, test: Dataset):
        res = run_regime(self.spec, self.regime, train, test, self.cfg)
        self.leaks = res.leaks
        self.state = res.state
        return res.predictions[0]


class ConstantRunner:
    def __init__(self, dist: OutcomeDistribution):
        self.dist = dist

    def __call__(self, train: Dataset, test: Dataset):
        return [self.dist] * len(test)


# ---------------------------------------------------------------------------
# statistics


def bootstrap_ci(values: Sequence[float], b: int = 5000, level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile interval of the mean from ``b`` resamples (resample r uses stream(seed, r))."""
    x = np.asarray(values, dtype=float)
    if not len(x) or b < 1:
        raise ValueError("need at least one value and one replicate")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])
    n = len(x)
    means = np.empty(b)
    for r in range(b):
        means[r] = x[stream(seed, r).integers(0, n, n)].mean()
    lo, hi = np.quantile(means, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
    return float(lo), float(hi)


def _bisect(fn: Callable[[float], float], target: float, increasing: bool) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (fn(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial interval, found by bisection on the binomial tail probabilities."""
    if n < 1 or not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n and n >= 1")
    alpha = 1.0 - level
    # P(X >= k | p) = I_p(k, n-k+1) rises with p; P(X <= k | p) = 1 - I_p(k+1, n-k) falls
    lo = 0.0 if k == 0 else _bisect(lambda p: betainc(k, n - k + 1, p), alpha / 2, True)
    hi = 1.0 if k == n else _bisect(lambda p: 1.0 - betainc(k + 1, n - k, p), alpha / 2, False)
    return lo, hi


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    degenerate: bool = False
    method: str = ""


def _t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return tail if t > 0 else 1.0 - tail


def _sided(p_greater: float, p_less: float, alternative: str) -> float:
    if alternative == "greater":
        return p_greater
    if alternative == "less":
        return p_less
    if alternative == "two-sided":
        return min(1.0, 2.0 * min(p_greater, p_less))
    raise ValueError(f"unknown alternative {alternative!r}")


def paired_t_test(a: Sequence[float], b: Sequence[float], alternative: str = "two-sided") -> TestResult:
    """Paired t-test of mean(a - b); ``greater`` tests whether a exceeds b."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    n = len(d)
    if n < 2:
        raise ValueError("need at least two pairs")
    mean, sd = float(d.mean()), float(d.std(ddof=1))
    if sd == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
        if mean == 0.0:
            return TestResult(0.0, 1.0, n, True, "paired t")
        return TestResult(t, _sided(_t_sf(t, n - 1), 1.0 - _t_sf(t, n - 1), alternative), n, True, "paired t")
    t = mean / (sd / math.sqrt(n))
    p_greater = _t_sf(t, n - 1)
    p_less = _t_sf(-t, n - 1)
    return TestResult(t, _sided(p_greater, p_less, alternative), n, False, "paired t")


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _signed_rank_null(doubled: np.ndarray) -> np.ndarray:
    """Null distribution of the doubled positive-rank sum (each sign equally likely)."""
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled.astype(int):
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts / counts.sum()


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    alternative: str = "two-sided",
    exact: bool | None = None,
) -> TestResult:
    """Signed-rank test on a - b; zero differences are dropped, ties get mid-ranks.

    The exact null distribution is used for up to 25 non-zero differences,
    otherwise a normal approximation with tie and continuity correction.
    """
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return TestResult(0.0, 1.0, 0, True, "wilcoxon")
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if exact is None:
        exact = n <= 25
    if exact:
        doubled = np.rint(2.0 * ranks).astype(int)
        dist = _signed_rank_null(doubled)
        w2 = int(round(2.0 * w_plus))
        p_greater = float(dist[w2:].sum())
        p_less = float(dist[: w2 + 1].sum())
        return TestResult(w_plus, _sided(min(p_greater, 1.0), min(p_less, 1.0), alternative), n, False, "wilcoxon exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    sd = math.sqrt(var)
    z_greater = (w_plus - mean - 0.5) / sd
    z_less = (w_plus - mean + 0.5) / sd
    p_greater = 0.5 * math.erfc(z_greater / math.sqrt(2.0))
    p_less = 0.5 * math.erfc(-z_less / math.sqrt(2.0))
    return TestResult(w_plus, _sided(p_greater, p_less, alternative), n, False, "wilcoxon normal")
