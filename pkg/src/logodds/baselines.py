"""Benchmark predictors: constant home-win frequencies, bookmaker odds, Poisson score models."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import Dataset, Outcome, OutcomeDistribution
from .optim import gradient_ascent

__all__ = [
    "HomeWinBaseline",
    "home_win_baseline",
    "odds_to_probs",
    "PoissonVariant",
    "PoissonBaselineState",
    "poisson_loglik",
    "poisson_grad",
    "time_weights",
    "fit_poisson_baseline",
    "poisson_predict_ternary",
    "HomeWinRunner",
    "OddsRunner",
    "PoissonRunner",
    "XI_GRID",
]

XI_GRID = (0.0, 0.0005, 0.001, 0.002, 0.005)
DAYS_PER_WEEK = 7.0


@dataclass(frozen=True)
class HomeWinBaseline:
    distribution: OutcomeDistribution
    label: Outcome = Outcome.HOME_WIN


def home_win_baseline(train: Dataset) -> HomeWinBaseline:
    """Always predict a home win; the distribution is the training outcome frequencies."""
    if not len(train):
        raise ValueError("empty training data")
    freq = np.bincount(train.outcomes, minlength=3) / len(train)
    return HomeWinBaseline(OutcomeDistribution.normalized(*freq))


def odds_to_probs(odds: tuple[float, float, float]) -> OutcomeDistribution:
    """Inverse decimal odds normalized to remove the bookmaker margin."""
    if len(odds) != 3 or any(not o > 1.0 for o in odds):
        raise ValueError(f"decimal odds must all exceed 1, got {odds}")
    implied = [1.0 / o for o in odds]
    return OutcomeDistribution.normalized(*implied)


# ---------------------------------------------------------------------------
# Poisson score models


class PoissonVariant(str, enum.Enum):
    MAHER = "maher"
    DIXON_COLES = "dixon-coles"


@dataclass
class PoissonBaselineState:
    """Home goals ~ Poisson(alpha_i beta_j h), away goals ~ Poisson(alpha_j beta_i).

    Gauge: the geometric mean of alpha is 1. ``rho`` is the Dixon-Coles
    low-score correction (0 for Maher).
    """

    alpha: np.ndarray
    beta: np.ndarray
    h: float = 1.0
    rho: float = 0.0
    xi: float = 0.0
    variant: PoissonVariant = PoissonVariant.MAHER

    def rates(self, i: int, j: int) -> tuple[float, float]:
        return self.alpha[i] * self.beta[j] * self.h, self.alpha[j] * self.beta[i]


def _tau(x, y, lam, mu, rho):
    tau = np.ones(np.broadcast(x, lam).shape)
    tau = np.where((x == 0) & (y == 0), 1.0 - lam * mu * rho, tau)
    tau = np.where((x == 0) & (y == 1), 1.0 + lam * rho, tau)
    tau = np.where((x == 1) & (y == 0), 1.0 + mu * rho, tau)
    return np.where((x == 1) & (y == 1), 1.0 - rho, tau)


def _unpack(x: np.ndarray, q: int, dc: bool):
    a, b, log_h = x[:q], x[q : 2 * q], x[2 * q]
    rho = x[2 * q + 1] if dc else 0.0
    return a, b, log_h, rho


def time_weights(data: Dataset, xi: float, ref_date=None) -> np.ndarray:
    """exp(-xi * weeks before the reference date), reference defaulting to the last match."""
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if xi == 0 or not len(data):
        return np.ones(len(data))
    ref = ref_date.toordinal() if ref_date is not None else int(data.dates.max())
    return np.exp(-xi * (ref - data.dates) / DAYS_PER_WEEK)


def _terms(x: np.ndarray, data: Dataset, q: int, dc: bool):
    a, b, log_h, rho = _unpack(x, q, dc)
    i, j = data.home_ids, data.away_ids
    log_lam = a[i] + b[j] + log_h
    log_mu = a[j] + b[i]
    lam, mu = np.exp(log_lam), np.exp(log_mu)
    return i, j, lam, mu, log_lam, log_mu, rho


def poisson_loglik(x: np.ndarray, data: Dataset, q: int, dc: bool, weights: np.ndarray) -> float:
    """Weighted log-likelihood at log-parameters x = (log alpha, log beta, log h[, rho])."""
    _, _, lam, mu, log_lam, log_mu, rho = _terms(x, data, q, dc)
    hg, ag = data.home_goals, data.away_goals
    ll = hg * log_lam - lam - gammaln(hg + 1) + ag * log_mu - mu - gammaln(ag + 1)
    if dc:
        tau = _tau(hg, ag, lam, mu, rho)
        if np.any(tau <= 0):
            return -math.inf
        ll = ll + np.log(tau)
    return float(weights @ ll)


def poisson_grad(x: np.ndarray, data: Dataset, q: int, dc: bool, weights: np.ndarray) -> np.ndarray:
    i, j, lam, mu, _, _, rho = _terms(x, data, q, dc)
    hg, ag = data.home_goals, data.away_goals
    g_lam = hg - lam  # d/d log lambda
    g_mu = ag - mu
    g_rho = 0.0
    if dc:
        c00 = (hg == 0) & (ag == 0)
        c01 = (hg == 0) & (ag == 1)
        c10 = (hg == 1) & (ag == 0)
        c11 = (hg == 1) & (ag == 1)
        t00 = 1.0 - lam * mu * rho
        t01 = 1.0 + lam * rho
        t10 = 1.0 + mu * rho
        g_lam = g_lam + np.where(c00, -lam * mu * rho / t00, 0.0) + np.where(c01, lam * rho / t01, 0.0)
        g_mu = g_mu + np.where(c00, -lam * mu * rho / t00, 0.0) + np.where(c10, mu * rho / t10, 0.0)
        d_rho = (np.where(c00, -lam * mu / t00, 0.0) + np.where(c01, lam / t01, 0.0)
                 + np.where(c10, mu / t10, 0.0) + np.where(c11, -1.0 / (1.0 - rho), 0.0))
        g_rho = float(weights @ d_rho)
    g_lam, g_mu = weights * g_lam, weights * g_mu
    # log lambda = a_i + b_j + log h, log mu = a_j + b_i
    ga = np.bincount(i, g_lam, q) + np.bincount(j, g_mu, q)
    gb = np.bincount(j, g_lam, q) + np.bincount(i, g_mu, q)
    out = [ga, gb, [g_lam.sum()]]
    if dc:
        out.append([g_rho])
    return np.concatenate(out)


def fit_poisson_baseline(
    data: Dataset,
    variant: PoissonVariant | str = PoissonVariant.MAHER,
    xi: float = 0.0,
    q: int | None = None,
    max_iters: int = 5000,
    tol: float = 1e-10,
    ref_date=None,
) -> PoissonBaselineState:
    """Maximum (time-weighted) likelihood fit on log-parameters by monotone gradient ascent.

    Teams that never scored or never conceded drift toward zero rates but stay
    finite because the ascent stops on relative improvement.
    """
    variant = PoissonVariant(variant)
    if not len(data):
        raise ValueError("empty data")
    q = q or data.n_teams
    dc = variant is PoissonVariant.DIXON_COLES
    w = time_weights(data, xi, ref_date)
    x0 = np.zeros(2 * q + 1 + dc)
    home_mean = float(np.mean(data.home_goals)) + 0.5
    away_mean = float(np.mean(data.away_goals)) + 0.5
    x0[q : 2 * q] = math.log(away_mean)
    x0[2 * q] = math.log(home_mean / away_mean)

    def project(x):
        x = x.copy()
        shift = x[:q].mean()  # geometric mean of alpha fixed to 1
        x[:q] -= shift
        x[q : 2 * q] += shift
        return x

    res = gradient_ascent(
        lambda x: poisson_loglik(x, data, q, dc, w),
        lambda x: poisson_grad(x, data, q, dc, w),
        x0,
        max_iters=max_iters,
        tol=tol,
        project=project,
    )
    a, b, log_h, rho = _unpack(res.x, q, dc)
    return PoissonBaselineState(np.exp(a), np.exp(b), math.exp(log_h), float(rho), xi, variant)


def _poisson_pmf(rate: float, n: int) -> np.ndarray:
    k = np.arange(n + 1)
    return np.exp(k * math.log(rate) - rate - gammaln(k + 1)) if rate > 0 else (k == 0).astype(float)


def poisson_predict_ternary(state: PoissonBaselineState, i: int, j: int, tol: float = 1e-10) -> OutcomeDistribution:
    """Aggregate the (adjusted) joint score pmf into win/draw/lose.

    The score grid starts at 0..10 goals per side and grows until the mass
    outside it is below ``tol``; the small remainder is removed by renormalizing.
    """
    lam, mu = state.rates(i, j)
    n = 10
    while True:
        px, py = _poisson_pmf(lam, n), _poisson_pmf(mu, n)
        if 1.0 - px.sum() * py.sum() < tol or n >= 1000:
            break
        n *= 2
    joint = np.outer(px, py)
    if state.rho != 0.0:
        joint[0, 0] *= 1.0 - lam * mu * state.rho
        joint[0, 1] *= 1.0 + lam * state.rho
        joint[1, 0] *= 1.0 + mu * state.rho
        joint[1, 1] *= 1.0 - state.rho
    return OutcomeDistribution.normalized(
        float(np.tril(joint, -1).sum()), float(np.trace(joint)), float(np.triu(joint, 1).sum())
    )


# ---------------------------------------------------------------------------
# runners for the validation harness


class HomeWinRunner:
    def __call__(self, train: Dataset, test: Dataset):
        return [home_win_baseline(train).distribution] * len(test)


class OddsRunner:
    """Normalized bookmaker odds; records without odds get ``None`` and are skipped."""

    def __call__(self, train: Dataset, test: Dataset):
        return [odds_to_probs(r.odds) if r.odds is not None else None for r in test.records]


class PoissonRunner:
    """Fit once on the training data, then predict every test match from that fit."""

    def __init__(self, variant: PoissonVariant | str = PoissonVariant.MAHER, xi: float = 0.0):
        self.variant = PoissonVariant(variant)
        self.xi = xi
        self.state: PoissonBaselineState | None = None

    def __call__(self, train: Dataset, test: Dataset):
        q = max(train.n_teams, test.n_teams)
        self.state = fit_poisson_baseline(train, self.variant, self.xi, q)
        return [poisson_predict_ternary(self.state, r.home, r.away) for r in test.records]
