import datetime as dt
import math

import numpy as np
import pytest

from conftest import random_dataset
from logodds.data import Dataset, MatchRecord, TeamIndex, partition_batches
from logodds.links import sigmoid
from logodds.model import Link, ModelSpec, ModelState, Structure, flatten, grad, loglik, predict
from logodds.synthetic import EloGaussian, SynthSpec, gen_truth, sample_matches
from logodds.training import (
    Regime,
    TrainConfig,
    default_grid,
    elo_online_update,
    fit_batch,
    grid_search,
    run_regime,
    run_schedule,
)

ELO = ModelSpec(Structure.RANK2, Link.BINARY, n_teams=2)


def _match(hg, ag, i=0, j=1, day=0):
    return MatchRecord(dt.date(2010, 1, 1) + dt.timedelta(days=day), i, j, hg, ag)


def test_elo_update_examples():
    s = ModelState.initial(ELO)
    s2 = elo_online_update(s, ELO, _match(1, 0), 32.0)
    assert np.array_equal(s2.theta, [16.0, -16.0])
    # a draw between equals has zero residual
    assert np.array_equal(elo_online_update(s, ELO, _match(1, 1), 32.0).theta, [0.0, 0.0])
    assert np.array_equal(s.theta, [0.0, 0.0])  # input untouched


def _elo_reference(theta, matches, k):
    theta = theta.copy()
    for r in matches:
        p = 1.0 / (1.0 + math.exp(-(theta[r.home] - theta[r.away])))
        s = (1.0, 0.5, 0.0)[r.outcome]
        theta[r.home] += k * (s - p)
        theta[r.away] -= k * (s - p)
    return theta


def test_singleton_schedule_is_classic_elo(rng):
    data = random_dataset(rng, 8, 300)
    spec = ModelSpec(Structure.RANK2, n_teams=8)
    cfg = TrainConfig(learning_rate=0.07, epochs=1, initial_epochs=1)
    res = run_schedule(spec, partition_batches(data, "match"), cfg, keep_states=True)
    theta = np.zeros(8)
    for rec, snap in zip(data.records, res.snapshots):
        theta = _elo_reference(theta, [rec], 0.07)
        # the two logistic formulas may differ in the last bit
        assert np.max(np.abs(snap.theta - theta)) <= 1e-13


def test_home_advantage_fixed_when_absent(rng):
    data = random_dataset(rng, 4, 50)
    spec = ModelSpec(Structure.RANK2_HOME, n_teams=4)
    for rec in data.records:
        s = elo_online_update(ModelState.initial(spec), spec, rec, 0.1)
        assert math.isclose(s.theta[rec.home], -s.theta[rec.away], abs_tol=0)


def test_zero_epochs_never_moves(rng):
    data = random_dataset(rng, 5, 40)
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, n_teams=5)
    start = ModelState.initial(spec)
    start.theta = np.linspace(-1, 1, 5)
    res = run_schedule(spec, partition_batches(data, "match"), TrainConfig(epochs=0, initial_epochs=0), start)
    assert np.array_equal(flatten(res.state, spec), flatten(start, spec))
    preds = [p for b in res.predictions for p in b]
    assert preds == [predict(start, spec, r.home, r.away) for r in data.records]


def test_prequential_predictions_use_only_the_past(rng):
    data = random_dataset(rng, 6, 80)
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, n_teams=6)
    cfg = TrainConfig(learning_rate=0.2, epochs=2, initial_epochs=2)
    batches = partition_batches(data, 7)
    res = run_schedule(spec, batches, cfg, keep_states=True)
    assert res.leaks == 0
    state = ModelState.initial(spec, cfg.seed)
    for b, batch in enumerate(batches):
        for rec, p in zip(batch.records, res.predictions[b]):
            assert p == predict(state, spec, rec.home, rec.away)
        state = res.snapshots[b]


def test_online_regime_leaks_nothing(rng):
    train, test = random_dataset(rng, 6, 60), random_dataset(rng, 6, 30, start=dt.date(2005, 1, 1))
    spec = ModelSpec(Structure.TWO_FACTOR_HOME, Link.TERNARY, n_teams=6)
    for regime in Regime:
        res = run_regime(spec, regime, train, test, TrainConfig(learning_rate=0.1))
        assert res.leaks == 0
        assert len(res.predictions[0]) == len(test)


def test_fit_recovers_truth():
    q, n = 5, 200
    truth = gen_truth(SynthSpec(q=q, truth=EloGaussian(0.8), seed=4), np.random.default_rng(4))
    data = sample_matches(truth, n, 11)
    spec = ModelSpec(Structure.RANK2, n_teams=q)
    fit = fit_batch(ModelState.initial(spec), spec, data)
    p_true = sigmoid(truth.entries)
    for i in range(q):
        for j in range(q):
            if i != j:
                assert abs(predict(fit.state, spec, i, j).p_win - p_true[i, j]) < 0.05
    values = [row[1] for row in fit.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert abs(fit.state.theta.mean()) < 1e-12


@pytest.mark.parametrize("structure, link", [
    (Structure.RANK2_HOME, Link.TERNARY), (Structure.TWO_FACTOR, Link.BINARY),
    (Structure.RANK_FOUR_HOME, Link.TERNARY), (Structure.RANK2_HOME, Link.SKELLAM)])
def test_fit_trace_monotone(rng, structure, link):
    data = random_dataset(rng, 6, 100)
    spec = ModelSpec(structure, link, n_teams=6)
    fit = fit_batch(ModelState.initial(spec, 1), spec, data, TrainConfig(max_iters=300))
    values = [row[1] for row in fit.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] > values[0]


def test_strictly_concave_fit_reaches_small_gradient(rng):
    data = random_dataset(rng, 6, 200)
    spec = ModelSpec(Structure.RANK2, n_teams=6)
    fit = fit_batch(ModelState.initial(spec), spec, data, TrainConfig(tol=1e-300, max_iters=20000), gtol=1e-7)
    assert np.linalg.norm(grad(fit.state, spec, data).theta) < 1e-6


def test_symmetric_wins_are_stationary():
    t = TeamIndex(["A", "B", "C"])
    recs = []
    for day, (i, j) in enumerate([(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]):
        recs.append(_match(1, 0, i, j, day))
    data = Dataset(tuple(recs), t)
    spec = ModelSpec(Structure.RANK2, n_teams=3)
    s = ModelState.initial(spec)
    assert np.all(grad(s, spec, data).theta == 0.0)
    assert np.allclose(fit_batch(s, spec, data).state.theta, 0.0)


def test_fit_rejects_infinite_start():
    data = Dataset((_match(1, 1),), TeamIndex(["A", "B"]))
    spec = ModelSpec(Structure.RANK2, Link.TERNARY, n_teams=2)
    s = ModelState.initial(spec)
    s.phi_psi = -math.inf
    with pytest.raises(ValueError, match="draw"):
        fit_batch(s, spec, data)
    with pytest.raises(ValueError):
        fit_batch(s, spec, Dataset((), data.teams))


def test_two_stage_first_fits_then_steps(rng):
    train, test = random_dataset(rng, 5, 100), random_dataset(rng, 5, 10, start=dt.date(2005, 1, 1))
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, n_teams=5)
    cfg = TrainConfig(learning_rate=0.05)
    res = run_regime(spec, Regime.TWO_STAGE, train, test, cfg)
    fitted = fit_batch(ModelState.initial(spec), spec, train, cfg).state
    assert res.predictions[0][0] == predict(fitted, spec, test[0].home, test[0].away)
    single = run_regime(spec, Regime.SINGLE, train, test, cfg)
    assert all(p == predict(fitted, spec, r.home, r.away) for p, r in zip(single.predictions[0], test.records))


def test_retrain_refits_each_quarter(rng):
    train = random_dataset(rng, 5, 100, start=dt.date(2004, 1, 1))
    test = random_dataset(rng, 5, 150, start=dt.date(2005, 1, 1))
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, n_teams=5)
    cfg = TrainConfig()
    res = run_regime(spec, Regime.RETRAIN, train, test, cfg)
    batches = partition_batches(test, "quarter")
    assert len(batches) == 2
    seen = train.concat(batches[0])
    refit = fit_batch(ModelState.initial(spec), spec, seen, cfg).state
    r = batches[1][0]
    assert res.predictions[0][len(batches[0])] == predict(refit, spec, r.home, r.away)


def test_regime_rejects_overlap(rng):
    a = random_dataset(rng, 4, 20)
    with pytest.raises(ValueError):
        run_regime(ModelSpec(Structure.RANK2, n_teams=4), "online", a, a, TrainConfig())


def test_feature_coefficients_fixed_online(rng):
    data = random_dataset(rng, 5, 60, promotions=True)
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, True, 5)
    res = run_regime(spec, Regime.ONLINE, Dataset((), data.teams), data, TrainConfig(learning_rate=0.1))
    assert res.state.beta_home == 0.0 and res.state.beta_away == 0.0
    moved = run_regime(spec, Regime.ONLINE, Dataset((), data.teams), data,
                       TrainConfig(learning_rate=0.1, update_features_online=True))
    assert moved.state.beta_home != 0.0


def test_grid_search_rules(rng):
    train, tune = random_dataset(rng, 5, 80), random_dataset(rng, 5, 40, start=dt.date(2005, 1, 1))
    spec = ModelSpec(Structure.RANK2_HOME, Link.TERNARY, n_teams=5)
    one = [TrainConfig(learning_rate=0.3)]
    assert grid_search(spec, train, tune, one).best is one[0]
    dup = [TrainConfig(learning_rate=0.2, seed=1), TrainConfig(learning_rate=0.2, seed=1)]
    res = grid_search(spec, train, tune, dup)
    assert res.best is dup[0] and res.report[0][1] == res.report[1][1]


def test_grid_search_reproducible():
    truth = gen_truth(SynthSpec(q=8, truth=EloGaussian(0.8)), np.random.default_rng(0))
    train, tune = sample_matches(truth, 4, 1), sample_matches(truth, 4, 2, dt.date(2003, 1, 1))
    spec = ModelSpec(Structure.RANK2, n_teams=8)
    grid = default_grid((0.05, 0.1, 0.2, 0.4))
    a = grid_search(spec, train, tune, grid, regime="online")
    b = grid_search(spec, train, tune, grid, regime="online")
    assert a.best == b.best and a.report == b.report
    # lower learning rate wins a tie
    flat = grid_search(spec, train, tune, [TrainConfig(0.4, epochs=0), TrainConfig(0.1, epochs=0)], regime="online")
    assert flat.best.learning_rate == 0.1


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(tol=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)


def test_loglik_improves_online(rng):
    data = random_dataset(rng, 4, 30)
    spec = ModelSpec(Structure.RANK2_HOME, n_teams=4)
    res = run_schedule(spec, partition_batches(data, "match"), TrainConfig(learning_rate=0.05, initial_epochs=1))
    assert loglik(res.state, spec, data) > loglik(ModelState.initial(spec), spec, data)
