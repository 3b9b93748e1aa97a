import datetime as dt
import math
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_dataset
from logodds.model import (
    Link,
    ModelSpec,
    ModelState,
    Structure,
    build_logodds,
    flatten,
    grad,
    load_model,
    loglik,
    named_spec,
    numerical_rank,
    predict,
    save_model,
    unflatten,
)
from logodds.links import sigmoid
from logodds.data import Dataset, MatchRecord, TeamIndex

COMBOS = [(s, l) for s in Structure for l in (Link.BINARY, Link.TERNARY)] + [
    (Structure.RANK2, Link.SKELLAM),
    (Structure.RANK2_HOME, Link.SKELLAM),
]


def random_state(spec, rng, scale=0.6):
    q = spec.n_teams
    return ModelState(
        theta=rng.normal(0, scale, q), u=rng.normal(0, scale, q), v=rng.normal(0, scale, q),
        h=rng.normal(0, 0.3), phi_psi=rng.normal(-0.5, 0.3),
        beta_home=rng.normal(0, 0.3), beta_away=rng.normal(0, 0.3),
        skellam_u=rng.normal(0, 0.3, q), skellam_v=rng.normal(0, 0.3, q),
    )


def fd_gradient(spec, state, data, step=1e-5):
    x = flatten(state, spec)
    out = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = step
        out[k] = (loglik(unflatten(x + e, spec, state), spec, data)
                  - loglik(unflatten(x - e, spec, state), spec, data)) / (2 * step)
    return out


GRAD_CASES = [(s, l, c) for s, l in COMBOS for c in (False, True) if not (c and l is Link.SKELLAM)]


@pytest.mark.parametrize("structure, link, covariates", GRAD_CASES,
                         ids=[f"{s.value}-{l.value}-{'cov' if c else 'nocov'}" for s, l, c in GRAD_CASES])
def test_gradient_matches_finite_differences(structure, link, covariates):
    rng = np.random.default_rng(zlib.crc32(f"{structure.value}{link.value}{covariates}".encode()))
    spec = ModelSpec(structure, link, covariates, 6)
    data = random_dataset(rng, 6, 40, promotions=covariates)
    for _ in range(3):
        state = random_state(spec, rng)
        g = flatten(grad(state, spec, data), spec)
        fd = fd_gradient(spec, state, data)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1.0)


def test_rank2_matrix_example():
    spec = ModelSpec(Structure.RANK2, n_teams=3)
    st_ = ModelState(theta=np.array([1.0, 0.0, -1.0]), u=np.zeros(3), v=np.zeros(3))
    m = build_logodds(st_, spec)
    assert m.entries[0, 1] == 1.0 and m.entries[1, 0] == -1.0
    assert m.is_antisymmetric()
    assert m.rank == 2
    st_.theta[:] = 0.4
    assert m.rank == 2 and build_logodds(st_, spec).rank == 0


def test_rank_four_singular_values():
    rng = np.random.default_rng(3)
    q = 8
    basis, _ = np.linalg.qr(np.column_stack([np.ones(q), rng.normal(size=(q, 3))]))
    one, u, v, w = basis.T
    s1, s2 = 25.0, 24.0
    spec = ModelSpec(Structure.RANK_FOUR, n_teams=q)
    # theta 1' - 1 theta' has singular values |theta| sqrt(q) when theta is orthogonal to 1
    state = ModelState(theta=s2 * w / math.sqrt(q), u=math.sqrt(s1) * u, v=math.sqrt(s1) * v)
    s = np.linalg.svd(build_logodds(state, spec).entries, compute_uv=False)
    assert np.allclose(s[:4], [s1, s1, s2, s2], atol=1e-10)
    assert np.all(s[4:] < 1e-10)
    assert numerical_rank(build_logodds(state, spec).entries) == 4


@pytest.mark.parametrize("structure", list(Structure))
@given(seed=st.integers(0, 2**32 - 1))
def test_rank_bound_and_antisymmetry(structure, seed):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(structure, n_teams=7)
    m = build_logodds(random_state(spec, rng), spec)
    assert m.rank <= structure.rank_bound
    if not structure.has_home:
        assert m.is_antisymmetric(1e-12)


def test_predict_examples():
    spec = ModelSpec(Structure.RANK2_HOME, n_teams=2)
    s = ModelState(theta=np.zeros(2), u=np.zeros(2), v=np.zeros(2))
    assert predict(s, spec, 0, 1).p_win == 0.5
    s.theta = np.array([1.0, 0.0])
    s.h = 0.5
    assert math.isclose(predict(s, spec, 0, 1).p_win, sigmoid(1.5), rel_tol=1e-15)
    with pytest.raises(ValueError):
        predict(s, spec, 1, 1)


def test_covariate_shift_is_exact():
    spec = ModelSpec(Structure.RANK2_HOME, Link.BINARY, covariates=True, n_teams=3)
    s = ModelState(theta=np.array([0.2, -0.1, 0.0]), u=np.zeros(3), v=np.zeros(3), h=0.3, beta_home=-0.4)
    base = predict(s, spec, 0, 1, (0, 0)).p_win
    shifted = predict(s, spec, 0, 1, (1, 0)).p_win
    assert math.isclose(shifted, sigmoid(0.3 + 0.3 - 0.4), rel_tol=1e-15)
    assert math.isclose(base, sigmoid(0.6), rel_tol=1e-15)


def _one_match(hg, ag):
    return Dataset((MatchRecord(dt.date(2010, 1, 1), 0, 1, hg, ag),), TeamIndex(["A", "B"]))


def test_loglik_examples():
    spec = ModelSpec(Structure.RANK2, n_teams=2)
    s = ModelState.initial(spec)
    assert math.isclose(loglik(s, spec, _one_match(1, 0)), -math.log(2), rel_tol=1e-15)
    data = _one_match(1, 0)
    many = Dataset(data.records * 7, data.teams)
    assert math.isclose(loglik(s, spec, many), 7 * loglik(s, spec, data), rel_tol=1e-14)
    tern = ModelSpec(Structure.RANK2, Link.TERNARY, n_teams=2)
    s.phi_psi = -math.inf
    with pytest.warns(RuntimeWarning):
        assert loglik(s, tern, _one_match(1, 1)) == -math.inf


def test_grad_examples():
    spec = ModelSpec(Structure.RANK2, n_teams=2)
    g = grad(ModelState.initial(spec), spec, _one_match(2, 0))
    assert np.allclose(g.theta, [0.5, -0.5], atol=0)


@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-5, 5))
def test_gauge_invariance(seed, c):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(Structure.RANK_FOUR_HOME, Link.TERNARY, n_teams=5)
    s = random_state(spec, rng)
    t = s.copy()
    t.theta = t.theta + c
    for i, j in [(0, 1), (3, 2), (4, 0)]:
        assert np.allclose(predict(s, spec, i, j).as_array(), predict(t, spec, i, j).as_array(), atol=1e-12)


@pytest.mark.parametrize("structure", [Structure.RANK2, Structure.TWO_FACTOR, Structure.RANK_FOUR])
@given(seed=st.integers(0, 2**32 - 1))
def test_swap_symmetry(structure, seed):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(structure, Link.TERNARY, n_teams=4)
    s = random_state(spec, rng)
    # with a draw band the swap maps win to lose only for phi = 0
    s.phi_psi = -math.inf
    p, q = predict(s, spec, 0, 2), predict(s, spec, 2, 0)
    assert math.isclose(p.p_win, q.p_lose, rel_tol=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
def test_binary_rank2_loglik_concave(seed):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(Structure.RANK2, n_teams=5)
    data = random_dataset(rng, 5, 30)
    a, b = (random_state(spec, rng, 2.0) for _ in range(2))
    for t in (0.25, 0.5, 0.75):
        mid = a.copy()
        mid.theta = (1 - t) * a.theta + t * b.theta
        chord = (1 - t) * loglik(a, spec, data) + t * loglik(b, spec, data)
        assert loglik(mid, spec, data) >= chord - 1e-9


def test_ternary_tends_to_binary():
    spec_t = ModelSpec(Structure.RANK2, Link.TERNARY, n_teams=3)
    spec_b = ModelSpec(Structure.RANK2, Link.BINARY, n_teams=3)
    s = ModelState(theta=np.array([0.4, -0.2, -0.2]), u=np.zeros(3), v=np.zeros(3))
    gaps = []
    for psi in (-2, -6, -12):
        s.phi_psi = psi
        gaps.append(np.abs(predict(s, spec_t, 0, 1).as_array() - predict(s, spec_b, 0, 1).as_array()).max())
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-5


def test_initial_state():
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, n_teams=4)
    s = ModelState.initial(spec)
    assert np.all(s.theta == 0) and s.h == 0 and math.isclose(s.phi, 0.5)
    small = ModelState.initial(ModelSpec(Structure.TWO_FACTOR, n_teams=4), seed=1, factor_init="small")
    assert np.all(np.abs(small.u) < 0.1) and np.all(np.abs(small.v) < 0.1)
    auto = ModelState.initial(ModelSpec(Structure.TWO_FACTOR, n_teams=4), seed=1)
    assert np.allclose(auto.v, 1.0, atol=0.1)
    assert np.array_equal(ModelState.initial(spec, 7).u, ModelState.initial(spec, 7).u)


def test_skellam_requires_rank2():
    with pytest.raises(ValueError):
        ModelSpec(Structure.TWO_FACTOR, Link.SKELLAM, n_teams=3)


def test_dimension_mismatch():
    spec = ModelSpec(Structure.RANK2, n_teams=3)
    with pytest.raises(ValueError):
        build_logodds(ModelState.initial(ModelSpec(Structure.RANK2, n_teams=4)), spec)


def test_named_spec():
    assert named_spec("elo-cov", "ternary", 5).covariates
    with pytest.raises(ValueError, match="valid names"):
        named_spec("glicko")


@pytest.mark.parametrize("structure, link", COMBOS, ids=lambda v: v.value)
def test_save_load_round_trip(tmp_path, structure, link):
    spec = ModelSpec(structure, link, False, 4)
    s = random_state(spec, np.random.default_rng(1))
    save_model(s, spec, tmp_path / "m.txt", teams=["a b", "c", "d", "e"])
    s2, spec2, teams = load_model(tmp_path / "m.txt")
    assert spec2 == spec and teams == ("a b", "c", "d", "e")
    assert np.array_equal(flatten(s2, spec), flatten(s, spec))
    assert np.array_equal(s2.theta, s.theta) and s2.beta_away == s.beta_away
