"""Slow, independent reference computations used only by the tests."""

import itertools
import math

import numpy as np


def binom_upper(k, n, p):
    """P(X >= k) for X ~ Bin(n, p) by direct summation."""
    return math.fsum(math.comb(n, x) * p**x * (1 - p) ** (n - x) for x in range(k, n + 1))


def binom_lower(k, n, p):
    return math.fsum(math.comb(n, x) * p**x * (1 - p) ** (n - x) for x in range(0, k + 1))


def _solve(fn, target, increasing):
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = (lo + hi) / 2
        if (fn(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def clopper_pearson_sum(k, n, level=0.95):
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else _solve(lambda p: binom_upper(k, n, p), a, True)
    hi = 1.0 if k == n else _solve(lambda p: binom_lower(k, n, p), a, False)
    return lo, hi


def midranks(x):
    x = np.asarray(x, dtype=float)
    return np.array([np.sum(x < v) + (np.sum(x == v) + 1) / 2 for v in x])


def wilcoxon_enumerate(a, b):
    """Exact one-sided p-values (greater, less) over every sign pattern."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    r = midranks(np.abs(d))
    observed = r[d > 0].sum()
    sums = np.array([np.dot(r, s) for s in itertools.product((0, 1), repeat=len(d))])
    # compare on doubled ranks to stay exact with half-integer mid-ranks
    obs2, sums2 = round(2 * observed), np.rint(2 * sums)
    return float(np.mean(sums2 >= obs2)), float(np.mean(sums2 <= obs2))


def antisymmetric_polar(l):
    """Polar factor U V' of a stack of 5x5 antisymmetric matrices, in closed form.

    Singular values come in pairs (s1, s1, s2, s2, 0). From s = tr(L'L) and
    ||L'L||_F^2 one gets a = s1^2 and b = s2^2, and alpha L + c L^3 equals
    U V' because its scalar profile alpha x - c x^3 is 1 at x = s1 and x = s2.
    """
    m = np.swapaxes(l, -1, -2) @ l
    s = np.trace(m, axis1=-2, axis2=-1)
    q2 = np.sum(m * m, axis=(-2, -1))
    d = np.sqrt(np.maximum(q2 - s * s / 4, 0.0))
    a = np.maximum((s / 2 + d) / 2, 0.0)
    b = np.maximum((s / 2 - d) / 2, 0.0)
    s1, s2 = np.sqrt(a), np.sqrt(b)
    full = s2 > 1e-7 * s1
    s1f = np.where(s1 > 0, s1, 1.0)
    s2f = np.where(full, s2, 1.0)
    c = np.where(full, 1.0 / (s1f * s2f * (s1f + s2f)), 0.0)
    alpha = np.where(full, (a + s1 * s2 + b) * c, 1.0 / s1f)
    alpha = np.where(s1 > 0, alpha, 0.0)
    return alpha[..., None, None] * l + c[..., None, None] * (l @ l @ l)


def nuclear_subgradient(lhat, lam, iters=100_000):
    """Projected subgradient descent on ||lhat - L||_F^2 + lam ||L||_* over antisymmetric L.

    ``lhat`` is a stack of 5x5 matrices and ``lam`` a matching vector. Starts
    at zero with step 1/(2k) and returns the last iterate.
    """
    lam = np.asarray(lam, dtype=float)[:, None, None]
    a = 0.5 * (lhat - np.swapaxes(lhat, -1, -2))
    l = np.zeros_like(a)
    for k in range(1, iters + 1):
        g = 2 * (l - a) + lam * antisymmetric_polar(l)
        l = l - g / (2 * k)
        l = 0.5 * (l - np.swapaxes(l, -1, -2))
    return l
