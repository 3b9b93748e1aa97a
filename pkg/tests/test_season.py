import numpy as np
import pytest
from hypothesis import given, strategies as st

from logodds.data import OutcomeDistribution
from logodds.season import TIE_RULE, simulate_season


def _round_robin(q):
    return [(i, j) for i in range(q) for j in range(q) if i != j]


def _random_preds(rng, n):
    return [OutcomeDistribution.normalized(*rng.uniform(0.05, 1, 3)) for _ in range(n)]


def test_deterministic_predictions_give_point_mass():
    fx = _round_robin(5)
    # the lower index always wins, so points are 24, 18, 12, 6, 0 with no ties
    preds = [OutcomeDistribution(1.0, 0.0, 0.0) if i < j else OutcomeDistribution(0.0, 0.0, 1.0) for i, j in fx]
    r = simulate_season(preds, fx, reps=50)
    assert np.array_equal(r.probs, np.eye(5))


def test_exchangeable_teams():
    fx = [(0, 1), (1, 0)]
    r = simulate_season([OutcomeDistribution.uniform()] * 2, fx, reps=4000, seed=1)
    assert np.allclose(r.probs[0], r.probs[1], atol=0.03)


@given(seed=st.integers(0, 2**32 - 1), q=st.integers(2, 7))
def test_doubly_stochastic(seed, q):
    rng = np.random.default_rng(seed)
    fx = _round_robin(q)
    r = simulate_season(_random_preds(rng, len(fx)), fx, reps=37, seed=seed, chunk=10)
    assert np.all(r.counts.sum(axis=0) == 37) and np.all(r.counts.sum(axis=1) == 37)
    assert np.allclose(r.probs.sum(axis=0), 1, atol=1e-12) and np.allclose(r.probs.sum(axis=1), 1, atol=1e-12)


def test_chunking_does_not_change_result(rng):
    fx = _round_robin(6)
    preds = _random_preds(rng, len(fx))
    a = simulate_season(preds, fx, reps=300, seed=4, chunk=1000)
    b = simulate_season(preds, fx, reps=300, seed=4, chunk=7)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, simulate_season(preds, fx, reps=300, seed=5).counts)


def test_stronger_team_ranks_higher():
    fx = _round_robin(4)
    preds = [OutcomeDistribution(0.8, 0.1, 0.1) if i == 0 else OutcomeDistribution(0.1, 0.1, 0.8) if j == 0
             else OutcomeDistribution(0.4, 0.3, 0.3) for i, j in fx]
    r = simulate_season(preds, fx, reps=2000)
    assert r.probs[0, 0] > 0.8
    assert r.quartiles()[0][1:] == (1, 1, 1)


def test_outputs(tmp_path, rng):
    fx = _round_robin(4)
    r = simulate_season(_random_preds(rng, len(fx)), fx, reps=100, teams=list("ABCD"))
    r.to_csv(tmp_path / "ranks.csv")
    lines = (tmp_path / "ranks.csv").read_text().splitlines()
    assert lines[0] == "team,rank_1,rank_2,rank_3,rank_4" and len(lines) == 5
    assert TIE_RULE in r.summary()


def test_input_validation():
    with pytest.raises(ValueError):
        simulate_season([OutcomeDistribution.uniform()], [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        simulate_season([OutcomeDistribution.uniform()], [(0, 0)])
    with pytest.raises(ValueError):
        simulate_season([OutcomeDistribution.uniform()], [(0, 1)], reps=0)
