"""Scalar links and outcome distributions: logistic, proportional odds, Skellam."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from .data import OutcomeDistribution

__all__ = [
    "SkellamParams",
    "sigmoid",
    "log_sigmoid",
    "logit",
    "ternary_probs",
    "ternary_log_probs",
    "log_bessel_i",
    "bessel_i",
    "skellam_log_pmf",
    "skellam_pmf",
    "skellam_ternary",
]

SKELLAM_TAIL = 1e-10
SKELLAM_MAX_ABS = 500


@dataclass(frozen=True)
class SkellamParams:
    mu1: float
    mu2: float

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0 and math.isfinite(self.mu1) and math.isfinite(self.mu2)):
            raise ValueError(f"Skellam means must be positive and finite, got {self}")


def sigmoid(x):
    if isinstance(x, (float, int)):
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    return expit(x)


def log_sigmoid(x):
    """log(sigmoid(x)) without cancellation for large |x|."""
    if isinstance(x, (float, int)):
        return -math.log1p(math.exp(-x)) if x >= 0 else x - math.log1p(math.exp(x))
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def logit(p):
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError(f"logit is defined on (0, 1), got {p}")
    if isinstance(p, (float, int)):
        return math.log(p) - math.log1p(-p)
    return np.log(arr) - np.log1p(-arr)


def ternary_probs(l: float, phi: float) -> OutcomeDistribution:
    """Proportional-odds win/draw/lose probabilities for log-odds ``l``.

    The draw band has width ``phi``; ``phi = 0`` recovers the binary model.
    """
    if phi < 0:
        raise ValueError(f"draw parameter must be non-negative, got {phi}")
    p_win = sigmoid(l)
    p_lose = sigmoid(-l - phi)
    # sigma(-l) - sigma(-l-phi) = sigma(-l) sigma(l+phi) (1 - e^-phi)
    p_draw = sigmoid(-l) * sigmoid(l + phi) * -math.expm1(-phi)
    return OutcomeDistribution.normalized(p_win, p_draw, p_lose)


def ternary_log_probs(l, phi) -> np.ndarray:
    """Columns are log P(win), log P(draw), log P(lose); broadcasts over ``l``."""
    l = np.asarray(l, dtype=float)
    with np.errstate(divide="ignore"):
        log_band = np.log(-np.expm1(-np.asarray(phi, dtype=float)))
    return np.stack(
        [
            log_sigmoid(l),
            log_sigmoid(-l) + log_sigmoid(l + phi) + log_band,
            log_sigmoid(-l - phi),
        ],
        axis=-1,
    )


def log_bessel_i(alpha, x):
    """log I_alpha(x) for integer alpha >= 0 and x >= 0 from the power series.

    Terms are summed in log space; the series is extended until the last term
    is below 1e-17 of the total, well inside a 1e-12 relative tolerance.
    """
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(alpha < 0) or np.any(alpha != np.floor(alpha)):
        raise ValueError("Bessel order must be a non-negative integer")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be finite and non-negative")
    alpha, x = np.broadcast_arrays(alpha, x)
    out = np.empty(alpha.shape)
    zero = x == 0
    out[zero] = np.where(alpha[zero] == 0, 0.0, -np.inf)
    pos = ~zero
    if np.any(pos):
        a = alpha[pos][..., None]
        # x / 2 underflows for the smallest subnormals
        log_half = (np.log(x[pos]) - math.log(2.0))[..., None]
        n_terms = int(np.max(x[pos]) / 2.0 + 10.0 * np.sqrt(np.max(x[pos])) + 30)
        while True:
            k = np.arange(n_terms, dtype=float)
            terms = (2.0 * k + a) * log_half - gammaln(k + 1.0) - gammaln(a + k + 1.0)
            total = logsumexp(terms, axis=-1)
            if np.all(terms[..., -1] - total < -40.0):
                break
            n_terms *= 2
        out[pos] = total
    return out if out.ndim else float(out)


def bessel_i(alpha: int, x: float) -> float:
    """Modified Bessel function of the first kind, integer order."""
    value = log_bessel_i(alpha, x)
    if value > 709.0:
        raise OverflowError(f"I_{alpha}({x}) overflows double precision")
    return math.exp(value)


def skellam_log_pmf(z, mu1, mu2):
    z = np.asarray(z)
    if np.any(np.asarray(mu1) <= 0) or np.any(np.asarray(mu2) <= 0):
        raise ValueError("Skellam means must be positive")
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    out = (
        -(mu1 + mu2)
        + 0.5 * z * (np.log(mu1) - np.log(mu2))
        + log_bessel_i(np.abs(z), 2.0 * np.sqrt(mu1 * mu2))
    )
    return out if np.ndim(out) else float(out)


def skellam_pmf(z, params: SkellamParams):
    out = np.exp(skellam_log_pmf(z, params.mu1, params.mu2))
    return out if np.ndim(out) else float(out)


def skellam_ternary(params: SkellamParams) -> OutcomeDistribution:
    """Aggregate the score-difference pmf into (win, draw, lose).

    The support is truncated symmetrically around zero until the missing mass
    is below 1e-10 (capped at |z| <= 500) and the result is renormalized.
    """
    m1, m2 = params.mu1, params.mu2
    half = min(SKELLAM_MAX_ABS, int(math.ceil(abs(m1 - m2) + 12.0 * math.sqrt(m1 + m2) + 15)))
    while True:
        z = np.arange(-half, half + 1)
        pmf = np.exp(skellam_log_pmf(z, m1, m2))
        if 1.0 - pmf.sum() < SKELLAM_TAIL or half >= SKELLAM_MAX_ABS:
            break
        half = min(SKELLAM_MAX_ABS, 2 * half)
    p_lose = float(pmf[:half].sum())
    p_draw = float(pmf[half])
    p_win = float(pmf[half + 1 :].sum())
    return OutcomeDistribution.normalized(p_win, p_draw, p_lose)
