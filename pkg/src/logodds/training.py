"""Batch, online, two-stage and repeated re-training of structured log-odds models."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import Dataset, MatchRecord, Outcome, OutcomeDistribution, partition_batches
from .links import sigmoid
from .model import (
    CLAMP,
    Link,
    ModelSpec,
    ModelState,
    flatten,
    grad,
    loglik_terms,
    match_logodds,
    predict,
    unflatten,
)
from .optim import gradient_ascent

__all__ = [
    "TrainConfig",
    "Regime",
    "FitResult",
    "ScheduleResult",
    "GridResult",
    "DEFAULT_RATES",
    "default_grid",
    "elo_online_update",
    "fit_batch",
    "run_schedule",
    "run_regime",
    "grid_search",
]

DEFAULT_RATES = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
FEATURE_PARAMS = frozenset({"beta_home", "beta_away"})


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``learning_rate`` plays the role of the Elo K-factor. ``initial_epochs``
    is the number of fixed-rate steps on the first batch; ``None`` means the
    first batch is fitted to convergence with :func:`fit_batch`. ``epochs``
    applies to every later batch.
    """

    learning_rate: float = 0.1
    epochs: int = 1
    initial_epochs: int | None = None
    batch_policy: str | int = "match"
    max_iters: int = 5000
    tol: float = 1e-8
    seed: int = 0
    update_features_online: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.epochs < 0 or (self.initial_epochs is not None and self.initial_epochs < 0):
            raise ValueError("epoch sizes must be non-negative")


def default_grid(rates: Sequence[float] = DEFAULT_RATES, **overrides) -> list[TrainConfig]:
    return [TrainConfig(learning_rate=k, **overrides) for k in rates]


class Regime(str, enum.Enum):
    SINGLE = "batch"        # fit on training data once, never update
    RETRAIN = "retrain"     # re-fit from scratch at every calendar quarter
    ONLINE = "online"       # per-match gradient steps from the initial state
    TWO_STAGE = "two-stage" # fit on training data, then per-match steps


# ---------------------------------------------------------------------------
# single steps


def _frozen(spec: ModelSpec, cfg_update_features: bool) -> frozenset[str]:
    return frozenset() if cfg_update_features or not spec.covariates else FEATURE_PARAMS


def _single_step(state: ModelState, spec: ModelSpec, rec: MatchRecord, lr: float, frozen=FEATURE_PARAMS) -> None:
    """In-place gradient ascent step on one match's log-likelihood."""
    if spec.link is Link.SKELLAM:
        _batch_step(state, spec, Dataset((rec,)), lr, frozen)
        return
    i, j = rec.home, rec.away
    x = (float(rec.home_promoted), float(rec.away_promoted))
    l = match_logodds(state, spec, i, j, x)
    inside = abs(l) < CLAMP
    l = min(max(l, -CLAMP), CLAMP)
    outcome = rec.outcome
    g_phi = 0.0
    if spec.link is Link.BINARY:
        g = (1.0, 0.5, 0.0)[outcome] - sigmoid(l)
    else:
        phi = state.phi
        if outcome is Outcome.HOME_WIN:
            g = sigmoid(-l)
        elif outcome is Outcome.DRAW:
            g = -sigmoid(l) + sigmoid(-l - phi)
            g_phi = sigmoid(-l - phi) + 1.0 / math.expm1(phi)
        else:
            g = g_phi = -sigmoid(l + phi)
    if not inside:
        g = 0.0
    step = lr * g
    base = spec.structure.base
    if base in ("twofactor", "rankfour"):
        ui, uj, vi, vj = state.u[i], state.u[j], state.v[i], state.v[j]
        state.u[i] = ui + step * vj
        state.u[j] = uj - step * vi
        state.v[j] = vj + step * ui
        state.v[i] = vi - step * uj
    if base in ("rank2", "rankfour"):
        state.theta[i] += step
        state.theta[j] -= step
    if spec.structure.has_home:
        state.h += step
    if spec.link is Link.TERNARY:
        state.phi_psi += lr * g_phi * state.phi
    if spec.covariates:
        if "beta_home" not in frozen:
            state.beta_home += step * x[0]
        if "beta_away" not in frozen:
            state.beta_away += step * x[1]


def _batch_step(state: ModelState, spec: ModelSpec, batch: Dataset, lr: float, frozen=FEATURE_PARAMS) -> None:
    g = grad(state, spec, batch)
    for name in spec.param_names():
        if name in frozen:
            continue
        setattr(state, name, getattr(state, name) + lr * getattr(g, name))


def elo_online_update(state: ModelState, spec: ModelSpec, record: MatchRecord, k: float) -> ModelState:
    """One K-factor step on a single match; returns a new state.

    For the binary rank-two model this is exactly the classical rule
    theta_i += K (S - p), theta_j -= K (S - p).
    """
    if spec.link is Link.SKELLAM:
        raise ValueError("the Elo step is defined for the binary and ternary links")
    out = state.copy()
    _single_step(out, spec, record, k)
    return out


# ---------------------------------------------------------------------------
# batch fitting


@dataclass
class FitResult:
    state: ModelState
    # rows of (iteration, loglik, gradient norm, step size)
    trace: list[tuple[int, float, float, float]]
    converged: bool


def fit_batch(
    state: ModelState,
    spec: ModelSpec,
    data: Dataset,
    cfg: TrainConfig | None = None,
    frozen: frozenset[str] = frozenset(),
    gtol: float = 0.0,
) -> FitResult:
    """Maximum-likelihood fit of all free parameters on ``data``."""
    cfg = cfg or TrainConfig()
    if not len(data):
        raise ValueError("cannot fit on an empty dataset")
    names = tuple(n for n in spec.param_names() if n not in frozen)
    start = loglik_quiet(state, spec, data)
    if not math.isfinite(start):
        cause = "draw observed while the draw parameter is zero" if spec.link is Link.TERNARY else "zero-probability outcome"
        raise ValueError(f"log-likelihood is not finite at the initial state: {cause}")

    def f(x):
        with np.errstate(all="ignore"):
            value = loglik_quiet(unflatten(x, spec, state, names), spec, data)
        return value if math.isfinite(value) else -math.inf

    def g(x):
        gs = grad(unflatten(x, spec, state, names), spec, data)
        return flatten(gs, spec, names)

    res = gradient_ascent(f, g, flatten(state, spec, names), cfg.max_iters, cfg.tol, gtol=gtol)
    fitted = unflatten(res.x, spec, state, names)
    fitted.center()
    return FitResult(fitted, res.trace, res.converged)


def loglik_quiet(state: ModelState, spec: ModelSpec, data: Dataset) -> float:
    return float(np.sum(loglik_terms(state, spec, data)))


# ---------------------------------------------------------------------------
# Algorithm-1 style schedules


@dataclass
class ScheduleResult:
    predictions: list[list[OutcomeDistribution]]
    state: ModelState
    snapshots: list[ModelState] = field(default_factory=list)
    leaks: int = 0
    fit_trace: list = field(default_factory=list)


def run_schedule(
    spec: ModelSpec,
    batches: Sequence[Dataset],
    cfg: TrainConfig,
    state: ModelState | None = None,
    keep_states: bool = False,
) -> ScheduleResult:
    """Predict each batch with the current state, then train on it.

    The first batch gets ``cfg.initial_epochs`` fixed-rate steps, or a full
    fit when that is ``None``; later batches get ``cfg.epochs`` steps. Feature
    coefficients only move in a full fit unless ``update_features_online``.
    Predictions are therefore strictly prequential; ``leaks`` counts any
    prediction made after its own or a later record fed an update (always 0).
    """
    state = (state or ModelState.initial(spec, cfg.seed)).copy()
    frozen = _frozen(spec, cfg.update_features_online)
    preds: list[list[OutcomeDistribution]] = []
    snaps: list[ModelState] = []
    leaks = 0
    last_used = -1
    position = 0
    trace: list = []
    for b, batch in enumerate(batches):
        batch_preds = []
        for offset, rec in enumerate(batch.records):
            if last_used >= position + offset:
                leaks += 1
            batch_preds.append(_predict_record(state, spec, rec))
        preds.append(batch_preds)
        if b == 0 and cfg.initial_epochs is None:
            if len(batch):
                fit = fit_batch(state, spec, batch, cfg)
                state = fit.state
                trace = fit.trace
                last_used = position + len(batch) - 1
        else:
            tau = cfg.epochs if b > 0 or cfg.initial_epochs is None else cfg.initial_epochs
            if tau > 0 and len(batch):
                last_used = position + len(batch) - 1
                if len(batch) == 1:
                    for _ in range(tau):
                        _single_step(state, spec, batch.records[0], cfg.learning_rate, frozen)
                else:
                    for _ in range(tau):
                        _batch_step(state, spec, batch, cfg.learning_rate, frozen)
        position += len(batch)
        if keep_states:
            snaps.append(state.copy())
    return ScheduleResult(preds, state, snaps, leaks, trace)


def _predict_record(state: ModelState, spec: ModelSpec, rec: MatchRecord) -> OutcomeDistribution:
    x = (rec.home_promoted, rec.away_promoted) if spec.covariates else None
    return predict(state, spec, rec.home, rec.away, x)


def run_regime(
    spec: ModelSpec,
    regime: Regime | str,
    train: Dataset,
    test: Dataset,
    cfg: TrainConfig,
    state: ModelState | None = None,
) -> ScheduleResult:
    """Run a training regime over train followed by test; returns test predictions only."""
    regime = Regime(regime)
    if len(train) and len(test) and train.records[-1].date > test.records[0].date:
        raise ValueError("training data must precede test data")
    state = state or ModelState.initial(spec, cfg.seed)

    if regime is Regime.RETRAIN:
        return _run_retrain(spec, train, test, cfg, state)

    if regime is Regime.ONLINE:
        full = train.concat(test)
        batches = partition_batches(full, "match") if len(full) else []
        res = run_schedule(spec, batches, replace(cfg, initial_epochs=cfg.epochs, batch_policy="match"), state)
        flat = [p for batch in res.predictions for p in batch]
        res.predictions = [flat[len(train):]]
        return res

    # single-batch and two-stage share the initial full fit on the training data
    test_batches = partition_batches(test, "match") if len(test) else []
    run_cfg = replace(cfg, initial_epochs=None)
    if regime is Regime.SINGLE:
        run_cfg = replace(run_cfg, epochs=0)
    if len(train):
        res = run_schedule(spec, [train] + test_batches, run_cfg, state)
        res.predictions = [[p for batch in res.predictions[1:] for p in batch]]
    else:
        res = run_schedule(spec, test_batches, replace(run_cfg, initial_epochs=run_cfg.epochs), state)
        res.predictions = [[p for batch in res.predictions for p in batch]]
    return res


def _run_retrain(spec, train, test, cfg, state) -> ScheduleResult:
    initial = state.copy()
    seen = train
    current = fit_batch(initial, spec, seen, cfg).state if len(train) else initial.copy()
    preds: list[OutcomeDistribution] = []
    for batch in partition_batches(test, "quarter") if len(test) else []:
        preds.extend(_predict_record(current, spec, rec) for rec in batch.records)
        seen = seen.concat(batch)
        current = fit_batch(initial, spec, seen, cfg).state
    return ScheduleResult([preds], current)


# ---------------------------------------------------------------------------
# hyperparameter search


@dataclass
class GridResult:
    best: TrainConfig
    best_score: float
    # (config, mean out-of-sample log-likelihood) in grid order
    report: list[tuple[TrainConfig, float]]


def mean_outcome_loglik(preds: Sequence[OutcomeDistribution], data: Dataset) -> float:
    if not len(data):
        return math.nan
    total = 0.0
    for p, rec in zip(preds, data.records):
        m = p.mass(rec.outcome)
        if m <= 0.0:
            return -math.inf
        total += math.log(m)
    return total / len(data)


def _score_config(args) -> float:
    spec, regime, train, tune, cfg = args
    res = run_regime(spec, regime, train, tune, cfg)
    return mean_outcome_loglik(res.predictions[0], tune)


def grid_search(
    spec: ModelSpec,
    train: Dataset,
    tune: Dataset,
    grid: Sequence[TrainConfig],
    regime: Regime | str = Regime.TWO_STAGE,
    workers: int = 1,
) -> GridResult:
    """Pick the config with the best mean out-of-sample log-likelihood on ``tune``.

    Ties go to the smaller learning rate, then to the earlier grid entry.
    """
    if not grid:
        raise ValueError("empty grid")
    jobs = [(spec, Regime(regime), train, tune, cfg) for cfg in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(_score_config, jobs))
    else:
        scores = [_score_config(job) for job in jobs]
    best_i = 0
    for k in range(1, len(grid)):
        s, b = scores[k], scores[best_i]
        if s > b or (s == b and grid[k].learning_rate < grid[best_i].learning_rate):
            best_i = k
    return GridResult(grid[best_i], scores[best_i], list(zip(grid, scores)))
