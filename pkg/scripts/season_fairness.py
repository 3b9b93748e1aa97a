"""Final-table distribution for one or more seasons.

    python scripts/season_fairness.py results.csv --seasons 2010 --out runs/season

Each season is predicted match by match with the two-stage Elo model with
covariates, then 10 000 tables are sampled from those predictions. Prints the
quartiles of every team's finishing position and the share of replicates in
which each team matched its observed rank.
"""

import argparse
from pathlib import Path

import numpy as np

from logodds.cli import main as cli
from logodds.data import parse_csv, season_of
from logodds.season import POINTS


def observed_table(data, season):
    pts, gd = {}, {}
    for r in data.records:
        if season_of(r.date) != season:
            continue
        h, a = data.teams.name(r.home), data.teams.name(r.away)
        ph, pa = POINTS[r.outcome]
        pts[h], pts[a] = pts.get(h, 0) + ph, pts.get(a, 0) + pa
        if r.home_goals is not None:
            gd[h] = gd.get(h, 0) + r.home_goals - r.away_goals
            gd[a] = gd.get(a, 0) + r.away_goals - r.home_goals
    return sorted(pts, key=lambda t: (-pts[t], -gd.get(t, 0), t))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data", type=Path)
    ap.add_argument("--seasons", default="2010", help="comma-separated starting years")
    ap.add_argument("--model", default="elo-cov")
    ap.add_argument("--reps", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/season"))
    args = ap.parse_args()
    data = parse_csv(args.data)

    for season in (int(s) for s in args.seasons.split(",")):
        out = args.out / str(season)
        if cli(["simulate", "--data", str(args.data), "--season", str(season), "--model", args.model,
                "--reps", str(args.reps), "--seed", str(args.seed), "--out", str(out)]):
            raise SystemExit(1)
        with open(out / "ranks.csv") as fh:
            header, *rows = [line.rstrip("\n").split(",") for line in fh]
        probs = {r[0]: np.array(r[1:], dtype=float) for r in rows}
        print(f"\nseason {season}: P(simulated rank == observed rank)")
        for rank, team in enumerate(observed_table(data, season)):
            print(f"  {rank + 1:>2} {team:<24} {probs[team][rank]:.3f}")


if __name__ == "__main__":
    main()
