import datetime as dt
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from logodds.data import Dataset, MatchRecord, TeamIndex

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_dataset(rng: np.random.Generator, q: int, n: int, start=dt.date(2001, 1, 1), promotions=False) -> Dataset:
    """n matches among q teams with Poisson goals on consecutive days."""
    recs = []
    for k in range(n):
        i, j = rng.choice(q, 2, replace=False)
        hg, ag = rng.poisson(1.4), rng.poisson(1.1)
        hp, ap = (bool(x) for x in rng.random(2) < 0.3) if promotions else (False, False)
        recs.append(MatchRecord(start + dt.timedelta(days=k), int(i), int(j), int(hg), int(ag),
                                home_promoted=hp, away_promoted=ap))
    return Dataset(tuple(recs), TeamIndex(f"T{t}" for t in range(q)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def league(rng):
    return random_dataset(rng, 6, 120, promotions=True)


def write_fake_league(path, q=8, first_season=2003, last_season=2011, seed=7):
    """Double round-robin seasons (Aug to May) with Poisson goals and noisy odds."""
    rng = np.random.default_rng(seed)
    names = [f"Club{k}" for k in range(q + 2)]
    strength = rng.normal(0, 0.4, len(names))
    lines = ["Date,HomeTeam,AwayTeam,FTHG,FTAG,FTR,B365H,B365D,B365A"]
    for season in range(first_season, last_season + 1):
        # two clubs swap in and out each season so promotion flags are exercised
        clubs = list(range(q - 2)) + [q - 2 + (season % 2) * 2, q - 1 + (season % 2) * 2]
        fixtures = [(i, j) for i in clubs for j in clubs if i != j]
        rng.shuffle(fixtures)
        day0 = dt.date(season, 8, 10)
        for k, (i, j) in enumerate(fixtures):
            date = day0 + dt.timedelta(days=int(k * 270 / len(fixtures)))
            hg = rng.poisson(np.exp(0.25 + strength[i] - strength[j]))
            ag = rng.poisson(np.exp(strength[j] - strength[i]))
            res = "H" if hg > ag else "D" if hg == ag else "A"
            p = np.array([0.45 + 0.2 * (strength[i] - strength[j]), 0.27, 0.28 - 0.2 * (strength[i] - strength[j])])
            p = np.clip(p, 0.05, None)
            odds = 1.0 / (1.05 * p / p.sum())
            odds_txt = ",".join(f"{o:.2f}" for o in odds) if k % 10 else ",,"
            lines.append(f"{date:%d/%m/%Y},{names[i]},{names[j]},{hg},{ag},{res},{odds_txt}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def league_csv(tmp_path_factory):
    return write_fake_league(tmp_path_factory.mktemp("league") / "league.csv")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=int):
        status, detail = results[key]
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
