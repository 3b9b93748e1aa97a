"""Empirical log-odds matrices and their nuclear-norm regularized estimates.

Binary program, over antisymmetric L:

    min ||Lhat - L||_F^2 + lam ||L||_*

Only the antisymmetric part of Lhat interacts with L, so the minimizer is the
singular-value soft-threshold of that part at lam / 2. The ternary program

    min ||Lhat1 - L||_F^2 + ||Lhat2 - L - phi 11'||_F^2 + lam ||L||_*

has no antisymmetry constraint and is solved by exact alternating minimization
over phi and L.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset, OutcomeDistribution
from .links import log_sigmoid, sigmoid, ternary_log_probs, ternary_probs

__all__ = [
    "CountMatrices",
    "binary_counts",
    "ternary_counts",
    "empirical_logodds",
    "soft_threshold",
    "solve_nuclear_binary",
    "solve_nuclear_ternary",
    "nuclear_objective",
    "ternary_objective",
    "TernarySolution",
    "RegularizedEstimate",
    "lambda_grid",
    "fit_regularized",
    "LambdaSearch",
    "tune_lambda",
    "RegularizedRunner",
    "write_matrix",
    "read_matrix",
]


@dataclass(frozen=True)
class CountMatrices:
    """``wins`` is (Q, Q) for binary counts and (3, Q, Q) for ternary counts.

    Binary: wins[i, j] counts i beating j at either venue, draws as one half.
    Ternary: wins[k, i, j] counts outcome k for home team i against away team j.
    """

    wins: np.ndarray
    played: np.ndarray

    @property
    def ternary(self) -> bool:
        return self.wins.ndim == 3

    def check(self, tol: float = 1e-12) -> None:
        if self.ternary:
            ok = np.allclose(self.wins.sum(axis=0), self.played, atol=tol)
        else:
            ok = np.allclose(self.wins + self.wins.T, self.played, atol=tol) and np.array_equal(self.played, self.played.T)
        if not ok:
            raise ValueError("count matrices are inconsistent")


def binary_counts(data: Dataset, q: int | None = None) -> CountMatrices:
    q = q or data.n_teams
    w = np.zeros((q, q))
    n = np.zeros((q, q))
    score = np.array([1.0, 0.5, 0.0])[data.outcomes]
    np.add.at(w, (data.home_ids, data.away_ids), score)
    np.add.at(w, (data.away_ids, data.home_ids), 1.0 - score)
    np.add.at(n, (data.home_ids, data.away_ids), 1.0)
    np.add.at(n, (data.away_ids, data.home_ids), 1.0)
    return CountMatrices(w, n)


def ternary_counts(data: Dataset, q: int | None = None) -> CountMatrices:
    q = q or data.n_teams
    w = np.zeros((3, q, q))
    np.add.at(w, (data.outcomes, data.home_ids, data.away_ids), 1.0)
    return CountMatrices(w, w.sum(axis=0))


def _log_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(num) - np.log(den)


def empirical_logodds(counts: CountMatrices, eps: float = 0.01):
    """Smoothed empirical log-odds; a pair (L1, L2) of cumulative log-odds for ternary counts.

    Binary: logit((W + eps) / (N + 2 eps)). Ternary: each outcome gets
    (W[k] + eps) / (N + 3 eps), then L1 = log(win / (draw + lose)) and
    L2 = log((win + draw) / lose). The binary diagonal is 0.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    q = counts.played.shape[0]
    off = ~np.eye(q, dtype=bool)
    if eps == 0 and np.any(counts.played[off] == 0):
        raise ValueError(f"{int(np.sum(counts.played[off] == 0))} pairings were never played; use eps > 0")
    if counts.ternary:
        win, draw, lose = counts.wins + eps
        if eps == 0:
            win, draw, lose = (np.where(off, x, 1.0) for x in (win, draw, lose))
        out = (_log_ratio(win, draw + lose), _log_ratio(win + draw, lose))
        bad = sum(int(np.sum(~np.isfinite(m))) for m in out)
    else:
        w, n = counts.wins + eps, counts.played + 2 * eps
        lhat = _log_ratio(w, n - w)
        np.fill_diagonal(lhat, 0.0)
        out, bad = lhat, int(np.sum(~np.isfinite(lhat)))
    if bad:
        warnings.warn(f"{bad} empirical log-odds entries are infinite", RuntimeWarning, stacklevel=2)
    return out


def soft_threshold(m: np.ndarray, tau: float) -> np.ndarray:
    """Proximal map of tau * nuclear norm: shrink each singular value by tau."""
    u, s, vt = np.linalg.svd(m)
    return (u * np.maximum(s - tau, 0.0)) @ vt


def nuclear_objective(lhat: np.ndarray, l: np.ndarray, lam: float) -> float:
    return float(np.sum((lhat - l) ** 2) + lam * np.linalg.svd(l, compute_uv=False).sum())


def solve_nuclear_binary(lhat: np.ndarray, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    lhat = np.asarray(lhat, dtype=float)
    if not np.all(np.isfinite(lhat)):
        raise ValueError("empirical log-odds must be finite")
    a = 0.5 * (lhat - lhat.T)
    x = soft_threshold(a, lam / 2.0)
    # thresholding keeps the paired singular values; this only removes rounding
    return 0.5 * (x - x.T)


def ternary_objective(l1: np.ndarray, l2: np.ndarray, l: np.ndarray, phi: float, lam: float) -> float:
    return float(np.sum((l1 - l) ** 2) + np.sum((l2 - l - phi) ** 2)
                 + lam * np.linalg.svd(l, compute_uv=False).sum())


@dataclass
class TernarySolution:
    L: np.ndarray
    phi: float
    trace: list[float] = field(default_factory=list)
    converged: bool = True


def solve_nuclear_ternary(
    l1: np.ndarray,
    l2: np.ndarray,
    lam: float,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> TernarySolution:
    """Alternate the exact phi-step and the exact L-step until the objective settles."""
    l1, l2 = np.asarray(l1, dtype=float), np.asarray(l2, dtype=float)
    if l1.shape != l2.shape:
        raise ValueError("shapes of the two log-odds matrices differ")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not (np.all(np.isfinite(l1)) and np.all(np.isfinite(l2))):
        raise ValueError("empirical log-odds must be finite")
    phi = float(np.mean(l2 - l1))
    l = soft_threshold(0.5 * (l1 + l2 - phi), lam / 4.0)
    trace = [ternary_objective(l1, l2, l, phi, lam)]
    for _ in range(max_iters):
        phi = float(np.mean(l2 - l))
        l = soft_threshold(0.5 * (l1 + l2 - phi), lam / 4.0)
        trace.append(ternary_objective(l1, l2, l, phi, lam))
        if abs(trace[-2] - trace[-1]) < tol:
            return TernarySolution(l, phi, trace, True)
    return TernarySolution(l, phi, trace, False)


# ---------------------------------------------------------------------------
# prediction and tuning


@dataclass
class RegularizedEstimate:
    L: np.ndarray
    lam: float
    phi: float | None = None  # None for the binary estimator

    def predict(self, i: int, j: int) -> OutcomeDistribution:
        l = float(self.L[i, j])
        if self.phi is None:
            return OutcomeDistribution.binary(sigmoid(l))
        # the unconstrained phi can come out negative on tiny samples
        return ternary_probs(l, max(self.phi, 0.0))

    def predict_dataset(self, data: Dataset) -> list[OutcomeDistribution]:
        return [self.predict(r.home, r.away) for r in data.records]

    def mean_loglik(self, data: Dataset) -> float:
        l = self.L[data.home_ids, data.away_ids]
        if self.phi is None:
            t = np.array([1.0, 0.5, 0.0])[data.outcomes]
            terms = t * log_sigmoid(l) + (1.0 - t) * log_sigmoid(-l)
        else:
            terms = ternary_log_probs(l, max(self.phi, 0.0))[np.arange(len(data)), data.outcomes]
        return float(np.mean(terms))


def fit_regularized(train: Dataset, lam: float, link: str = "binary", eps: float = 0.01, q: int | None = None) -> RegularizedEstimate:
    q = q or train.n_teams
    if link == "binary":
        return RegularizedEstimate(solve_nuclear_binary(empirical_logodds(binary_counts(train, q), eps), lam), lam)
    if link == "ternary":
        l1, l2 = empirical_logodds(ternary_counts(train, q), eps)
        sol = solve_nuclear_ternary(l1, l2, lam)
        return RegularizedEstimate(sol.L, lam, sol.phi)
    raise ValueError(f"unsupported link {link!r}")


def lambda_grid(m: np.ndarray, n: int = 20, low: float = 1e-3) -> np.ndarray:
    """``n`` log-spaced values from ``low`` to twice the largest singular value of ``m``."""
    top = 2.0 * float(np.linalg.svd(m, compute_uv=False)[0])
    return np.geomspace(low, max(top, low), n)


@dataclass
class LambdaSearch:
    best: RegularizedEstimate
    table: list[tuple[float, float]]  # (lambda, mean tune log-likelihood)


def tune_lambda(
    train: Dataset,
    tune: Dataset,
    link: str = "binary",
    eps: float = 0.01,
    grid: Sequence[float] | None = None,
) -> LambdaSearch:
    """Fit on ``train`` for each lambda and keep the best mean log-likelihood on ``tune``."""
    q = max(train.n_teams, tune.n_teams)
    if grid is None:
        if link == "binary":
            base = 0.5 * (lambda m: m - m.T)(empirical_logodds(binary_counts(train, q), eps))
        else:
            l1, l2 = empirical_logodds(ternary_counts(train, q), eps)
            base = 0.5 * (l1 + l2 - np.mean(l2 - l1))
        grid = lambda_grid(base)
    table, best, best_score = [], None, -math.inf
    for lam in grid:
        est = fit_regularized(train, float(lam), link, eps, q)
        score = est.mean_loglik(tune)
        table.append((float(lam), score))
        if score > best_score:
            best, best_score = est, score
    if best is None:
        raise ValueError("no lambda produced a finite tune log-likelihood")
    return LambdaSearch(best, table)


class RegularizedRunner:
    """Batch predictor for the validation harness: fit once on train, never update."""

    def __init__(self, lam: float, link: str = "binary", eps: float = 0.01):
        self.lam, self.link, self.eps = lam, link, eps

    def __call__(self, train: Dataset, test: Dataset):
        q = max(train.n_teams, test.n_teams)
        return fit_regularized(train, self.lam, self.link, self.eps, q).predict_dataset(test)


# ---------------------------------------------------------------------------
# dense CSV


def write_matrix(path: str | Path, m: np.ndarray, names: Sequence[str] | None = None) -> None:
    names = list(names) if names is not None else [str(k) for k in range(m.shape[0])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["team"] + names)
        for name, row in zip(names, m):
            w.writerow([name] + [repr(float(x)) for x in row])


def read_matrix(path: str | Path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = rows[0][1:]
    body = rows[1:]
    if [r[0] for r in body] != names:
        raise ValueError("row and column team labels differ")
    return np.array([[float(x) for x in r[1:]] for r in body]), names
