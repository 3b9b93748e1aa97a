"""Structured log-odds models: parameterizations, prediction, likelihood, gradients.

The log-odds of a home win for pairing (i, j) is

    l_ij = L_ij + h + beta_home * promoted(i) + beta_away * promoted(j)

where L is built from the team factors according to the structure:

    rank2      L = theta 1' - 1 theta'
    twofactor  L = u v' - v u'
    rankfour   L = u v' - v u' + theta 1' - 1 theta'

Under the Skellam link the home and away scoring rates are
exp(v_i + u_j + h) and exp(v_j + u_i), i.e. L = 1 u' + v 1' and L' = L'.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import Dataset, Outcome, OutcomeDistribution
from .links import (
    SkellamParams,
    log_sigmoid,
    sigmoid,
    skellam_log_pmf,
    skellam_ternary,
    ternary_log_probs,
    ternary_probs,
)

__all__ = [
    "Structure",
    "Link",
    "ModelSpec",
    "ModelState",
    "LogOddsMatrix",
    "CLAMP",
    "build_logodds",
    "match_logodds",
    "predict",
    "loglik",
    "loglik_terms",
    "grad",
    "flatten",
    "unflatten",
    "numerical_rank",
    "save_model",
    "load_model",
    "MODEL_NAMES",
    "named_spec",
]

CLAMP = 36.0
FORMAT_VERSION = 1


class Structure(str, enum.Enum):
    RANK2 = "rank2"
    RANK2_HOME = "rank2_home"
    TWO_FACTOR = "twofactor"
    TWO_FACTOR_HOME = "twofactor_home"
    RANK_FOUR = "rankfour"
    RANK_FOUR_HOME = "rankfour_home"

    @property
    def has_home(self) -> bool:
        return self.value.endswith("_home")

    @property
    def base(self) -> str:
        return self.value.removesuffix("_home")

    @property
    def rank_bound(self) -> int:
        return {"rank2": 2, "twofactor": 2, "rankfour": 4}[self.base] + self.has_home


class Link(str, enum.Enum):
    BINARY = "binary"
    TERNARY = "ternary"
    SKELLAM = "skellam"


@dataclass(frozen=True)
class ModelSpec:
    structure: Structure
    link: Link = Link.BINARY
    covariates: bool = False
    n_teams: int = 0

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        object.__setattr__(self, "link", Link(self.link))
        if self.n_teams < 2:
            raise ValueError("need at least two teams")
        if self.link is Link.SKELLAM:
            if self.structure.base != "rank2":
                raise ValueError("the Skellam link uses the rank-two structure with ones factors")
            if self.covariates:
                raise ValueError("covariates are not supported with the Skellam link")

    def param_names(self) -> tuple[str, ...]:
        """Free parameters, in the order used by :func:`flatten`."""
        if self.link is Link.SKELLAM:
            names = ["skellam_u", "skellam_v"]
        else:
            names = {
                "rank2": ["theta"],
                "twofactor": ["u", "v"],
                "rankfour": ["u", "v", "theta"],
            }[self.structure.base]
        if self.structure.has_home:
            names.append("h")
        if self.link is Link.TERNARY:
            names.append("phi_psi")
        if self.covariates:
            names += ["beta_home", "beta_away"]
        return tuple(names)

    def with_teams(self, n_teams: int) -> "ModelSpec":
        return replace(self, n_teams=n_teams)


VECTOR_FIELDS = ("theta", "u", "v", "skellam_u", "skellam_v")


@dataclass
class ModelState:
    theta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    h: float = 0.0
    phi_psi: float = math.log(0.5)
    beta_home: float = 0.0
    beta_away: float = 0.0
    skellam_u: np.ndarray = field(default=None)  # type: ignore[assignment]
    skellam_v: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        q = len(self.theta)
        for name in VECTOR_FIELDS:
            value = getattr(self, name)
            value = np.zeros(q) if value is None else np.array(value, dtype=float)
            if value.shape != (q,):
                raise ValueError(f"{name} has shape {value.shape}, expected ({q},)")
            setattr(self, name, value)

    @classmethod
    def initial(cls, spec: ModelSpec, seed: int = 0, factor_init: str = "auto") -> "ModelState":
        """Zero ratings and h, phi = 0.5, seeded factors.

        Zero factors are a saddle point, and tiny random factors take many
        online steps to leave it. With ``factor_init="auto"`` the two-factor
        model starts next to the Elo model (v near the ones vector) and the
        rank-four model, whose theta already covers the ones direction, starts
        from unit-scale factors. ``"small"`` draws both from 0.01 N(0, 1).
        """
        q = spec.n_teams
        rng = np.random.default_rng(seed)
        u, v = 0.01 * rng.standard_normal((2, q))
        base = spec.structure.base
        if base == "rank2":
            u, v = np.zeros(q), np.zeros(q)
        elif factor_init == "auto":
            if base == "twofactor":
                v = v + 1.0
            else:
                u, v = 100.0 * u, 100.0 * v
        elif factor_init != "small":
            raise ValueError(f"unknown factor_init {factor_init!r}")
        return cls(theta=np.zeros(q), u=u, v=v)

    @property
    def n_teams(self) -> int:
        return len(self.theta)

    @property
    def phi(self) -> float:
        return math.exp(self.phi_psi)

    def copy(self) -> "ModelState":
        return replace(self, **{n: getattr(self, n).copy() for n in VECTOR_FIELDS})

    def zeros_like(self) -> "ModelState":
        q = self.n_teams
        return ModelState(
            theta=np.zeros(q), u=np.zeros(q), v=np.zeros(q), h=0.0, phi_psi=0.0,
            skellam_u=np.zeros(q), skellam_v=np.zeros(q),
        )

    def center(self) -> None:
        """Gauge fix: mean-zero ratings. Factors u, v are left as they are."""
        self.theta -= self.theta.mean()


def flatten(state: ModelState, spec: ModelSpec, names=None) -> np.ndarray:
    names = spec.param_names() if names is None else names
    parts = [np.atleast_1d(np.asarray(getattr(state, n), dtype=float)) for n in names]
    return np.concatenate(parts) if parts else np.zeros(0)


def unflatten(vec: np.ndarray, spec: ModelSpec, template: ModelState, names=None) -> ModelState:
    out = template.copy()
    q = spec.n_teams
    pos = 0
    for name in spec.param_names() if names is None else names:
        if name in VECTOR_FIELDS:
            setattr(out, name, np.array(vec[pos : pos + q], dtype=float))
            pos += q
        else:
            setattr(out, name, float(vec[pos]))
            pos += 1
    if pos != len(vec):
        raise ValueError("parameter vector length does not match the model")
    return out


# ---------------------------------------------------------------------------
# log-odds


@dataclass(frozen=True)
class LogOddsMatrix:
    entries: np.ndarray
    structure: Structure

    def is_antisymmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries + self.entries.T), initial=0.0) <= tol)

    @property
    def rank(self) -> int:
        return numerical_rank(self.entries)


def numerical_rank(m: np.ndarray, rel: float = 1e-9) -> int:
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if not len(s) or s[0] == 0:
        return 0
    return int(np.sum(s > rel * s[0]))


def _check_dims(state: ModelState, spec: ModelSpec) -> None:
    if state.n_teams != spec.n_teams:
        raise ValueError(f"state has {state.n_teams} teams, spec expects {spec.n_teams}")


def build_logodds(state: ModelState, spec: ModelSpec) -> LogOddsMatrix:
    """Team-by-team log-odds matrix (home advantage on every entry incl. diagonal)."""
    _check_dims(state, spec)
    q = spec.n_teams
    ones = np.ones(q)
    if spec.link is Link.SKELLAM:
        m = np.outer(ones, state.skellam_u) + np.outer(state.skellam_v, ones)
    else:
        m = np.zeros((q, q))
        if spec.structure.base in ("twofactor", "rankfour"):
            m += np.outer(state.u, state.v) - np.outer(state.v, state.u)
        if spec.structure.base in ("rank2", "rankfour"):
            m += np.outer(state.theta, ones) - np.outer(ones, state.theta)
    if spec.structure.has_home:
        m = m + state.h
    return LogOddsMatrix(m, spec.structure)


def _structure_logodds(state: ModelState, spec: ModelSpec, i, j):
    base = spec.structure.base
    l = 0.0
    if base in ("twofactor", "rankfour"):
        l = l + state.u[i] * state.v[j] - state.v[i] * state.u[j]
    if base in ("rank2", "rankfour"):
        l = l + state.theta[i] - state.theta[j]
    if spec.structure.has_home:
        l = l + state.h
    return l


def match_logodds(state: ModelState, spec: ModelSpec, i: int, j: int, features=None) -> float:
    """Unclamped home-win log-odds of a single pairing (binary/ternary links)."""
    l = float(_structure_logodds(state, spec, i, j))
    if spec.covariates and features is not None:
        l += state.beta_home * float(features[0]) + state.beta_away * float(features[1])
    return l


def skellam_log_rates(state: ModelState, spec: ModelSpec, i, j):
    log_mu1 = state.skellam_v[i] + state.skellam_u[j]
    if spec.structure.has_home:
        log_mu1 = log_mu1 + state.h
    log_mu2 = state.skellam_v[j] + state.skellam_u[i]
    return np.clip(log_mu1, -CLAMP, CLAMP), np.clip(log_mu2, -CLAMP, CLAMP)


def predict(state: ModelState, spec: ModelSpec, i: int, j: int, features=None) -> OutcomeDistribution:
    if i == j:
        raise ValueError("a team cannot play itself")
    if spec.link is Link.SKELLAM:
        lm1, lm2 = skellam_log_rates(state, spec, i, j)
        return skellam_ternary(SkellamParams(math.exp(lm1), math.exp(lm2)))
    l = min(max(match_logodds(state, spec, i, j, features), -CLAMP), CLAMP)
    if spec.link is Link.TERNARY:
        return ternary_probs(l, state.phi)
    p = sigmoid(l)
    return OutcomeDistribution(p, 0.0, 1.0 - p)


# ---------------------------------------------------------------------------
# likelihood


def binary_targets(outcomes: np.ndarray) -> np.ndarray:
    """Home-win indicator; a draw counts as half a win (classical Elo convention)."""
    return np.array([1.0, 0.5, 0.0])[outcomes]


def _batch_logodds(state, spec, data: Dataset):
    l = _structure_logodds(state, spec, data.home_ids, data.away_ids)
    l = np.broadcast_to(np.asarray(l, dtype=float), (len(data),)).copy()
    if spec.covariates:
        x = data.promotions
        l += state.beta_home * x[:, 0] + state.beta_away * x[:, 1]
    inside = np.abs(l) < CLAMP
    return np.clip(l, -CLAMP, CLAMP), inside


def _likelihood_parts(state: ModelState, spec: ModelSpec, data: Dataset, need_grad: bool):
    """Per-match log-likelihood and derivatives w.r.t. the link inputs."""
    _check_dims(state, spec)
    if spec.link is Link.SKELLAM:
        hi, ai = data.home_ids, data.away_ids
        raw1 = state.skellam_v[hi] + state.skellam_u[ai] + (state.h if spec.structure.has_home else 0.0)
        raw2 = state.skellam_v[ai] + state.skellam_u[hi]
        lm1, lm2 = np.clip(raw1, -CLAMP, CLAMP), np.clip(raw2, -CLAMP, CLAMP)
        mu1, mu2 = np.exp(lm1), np.exp(lm2)
        z = data.score_diffs
        ll = np.asarray(skellam_log_pmf(z, mu1, mu2), dtype=float).reshape(len(data))
        if not need_grad:
            return ll, None
        lp_down = np.asarray(skellam_log_pmf(z - 1, mu1, mu2)).reshape(len(data))
        lp_up = np.asarray(skellam_log_pmf(z + 1, mu1, mu2)).reshape(len(data))
        g1 = mu1 * np.expm1(lp_down - ll) * (np.abs(raw1) < CLAMP)
        g2 = mu2 * np.expm1(lp_up - ll) * (np.abs(raw2) < CLAMP)
        return ll, (g1, g2)

    l, inside = _batch_logodds(state, spec, data)
    y = data.outcomes
    if spec.link is Link.BINARY:
        t = binary_targets(y)
        ll = t * log_sigmoid(l) + (1.0 - t) * log_sigmoid(-l)
        if not need_grad:
            return ll, None
        return ll, ((t - expit(l)) * inside, None)

    phi = state.phi
    logp = ternary_log_probs(l, phi)
    ll = logp[np.arange(len(data)), y]
    if not need_grad:
        return ll, None
    with np.errstate(divide="ignore"):
        band = 1.0 / math.expm1(phi) if phi > 0 else math.inf
    g_l = np.select(
        [y == Outcome.HOME_WIN, y == Outcome.DRAW],
        [expit(-l), -expit(l) + expit(-l - phi)],
        -expit(l + phi),
    )
    g_phi = np.select(
        [y == Outcome.HOME_WIN, y == Outcome.DRAW],
        [np.zeros_like(l), expit(-l - phi) + band],
        -expit(l + phi),
    )
    return ll, (g_l * inside, g_phi)


def loglik_terms(state: ModelState, spec: ModelSpec, data: Dataset) -> np.ndarray:
    """Log-probability of each observed label (outcome, or score difference for Skellam)."""
    if not len(data):
        return np.zeros(0)
    with np.errstate(divide="ignore"):
        return _likelihood_parts(state, spec, data, need_grad=False)[0]


def loglik(state: ModelState, spec: ModelSpec, data: Dataset) -> float:
    total = float(np.sum(loglik_terms(state, spec, data)))
    if math.isinf(total):
        warnings.warn("zero probability assigned to an observed outcome", RuntimeWarning, stacklevel=2)
    return total


def grad(state: ModelState, spec: ModelSpec, data: Dataset) -> ModelState:
    """Analytic gradient of :func:`loglik`, returned in the shape of a ModelState.

    Every entry is a sum over matches of the link residual times the
    derivative of the log-odds entry with respect to that parameter.
    """
    out = state.zeros_like()
    if not len(data):
        return out
    q = spec.n_teams
    hi, ai = data.home_ids, data.away_ids
    with np.errstate(divide="ignore", invalid="ignore"):
        _, parts = _likelihood_parts(state, spec, data, need_grad=True)

    def scatter(idx, w):
        return np.bincount(idx, weights=w, minlength=q)

    if spec.link is Link.SKELLAM:
        g1, g2 = parts
        out.skellam_v = scatter(hi, g1) + scatter(ai, g2)
        out.skellam_u = scatter(ai, g1) + scatter(hi, g2)
        if spec.structure.has_home:
            out.h = float(g1.sum())
        return out

    g, g_phi = parts
    base = spec.structure.base
    if base in ("rank2", "rankfour"):
        out.theta = scatter(hi, g) - scatter(ai, g)
    if base in ("twofactor", "rankfour"):
        u, v = state.u, state.v
        out.u = scatter(hi, g * v[ai]) - scatter(ai, g * v[hi])
        out.v = scatter(ai, g * u[hi]) - scatter(hi, g * u[ai])
    if spec.structure.has_home:
        out.h = float(g.sum())
    if spec.link is Link.TERNARY:
        out.phi_psi = float(g_phi.sum()) * state.phi
    if spec.covariates:
        x = data.promotions
        out.beta_home = float(g @ x[:, 0])
        out.beta_away = float(g @ x[:, 1])
    return out


# ---------------------------------------------------------------------------
# serialization


def save_model(state: ModelState, spec: ModelSpec, path: str | Path, teams=None) -> None:
    """Plain-text key/value dump; floats use repr() so values round-trip exactly."""
    lines = [
        f"format logodds-model {FORMAT_VERSION}",
        f"structure {spec.structure.value}",
        f"link {spec.link.value}",
        f"covariates {int(spec.covariates)}",
        f"n_teams {spec.n_teams}",
    ]
    if teams is not None:
        lines.append("teams " + "\t".join(teams))
    for f in fields(ModelState):
        value = getattr(state, f.name)
        if f.name in VECTOR_FIELDS:
            lines.append(f.name + " " + " ".join(repr(float(x)) for x in value))
        else:
            lines.append(f"{f.name} {float(value)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> tuple[ModelState, ModelSpec, tuple[str, ...] | None]:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, rest = line.partition(" ")
            entries[key] = rest
    if entries.get("format") != f"logodds-model {FORMAT_VERSION}":
        raise ValueError(f"unsupported model file format: {entries.get('format')!r}")
    spec = ModelSpec(
        Structure(entries["structure"]),
        Link(entries["link"]),
        bool(int(entries["covariates"])),
        int(entries["n_teams"]),
    )
    kwargs = {}
    for f in fields(ModelState):
        raw = entries[f.name]
        if f.name in VECTOR_FIELDS:
            kwargs[f.name] = np.array([float(x) for x in raw.split()])
        else:
            kwargs[f.name] = float(raw)
    teams = tuple(entries["teams"].split("\t")) if "teams" in entries else None
    return ModelState(**kwargs), spec, teams


# short names used by scripts and the command line
MODEL_NAMES = {
    "elo": (Structure.RANK2, False),
    "elo-home": (Structure.RANK2_HOME, False),
    "elo-cov": (Structure.RANK2_HOME, True),
    "twofactor": (Structure.TWO_FACTOR, False),
    "twofactor-home": (Structure.TWO_FACTOR_HOME, False),
    "rankfour": (Structure.RANK_FOUR, False),
    "rankfour-home": (Structure.RANK_FOUR_HOME, False),
}


def named_spec(name: str, link: Link | str = Link.BINARY, n_teams: int = 2) -> ModelSpec:
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; valid names: {', '.join(MODEL_NAMES)}")
    structure, covariates = MODEL_NAMES[name]
    return ModelSpec(structure, Link(link), covariates, n_teams)
