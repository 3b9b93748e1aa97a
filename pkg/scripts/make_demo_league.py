"""Write a fake league CSV in football-data.co.uk layout for trying the other scripts.

    python scripts/make_demo_league.py demo.csv --teams 20 --first 1993 --last 2014
"""

import argparse
import datetime as dt
from pathlib import Path

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--teams", type=int, default=20)
    ap.add_argument("--first", type=int, default=1993)
    ap.add_argument("--last", type=int, default=2014)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    q = args.teams
    # three spare clubs rotate through the bottom places to exercise promotion flags
    attack = rng.normal(0, 0.3, q + 3)
    defence = rng.normal(0, 0.3, q + 3)
    rows = ["Date,HomeTeam,AwayTeam,FTHG,FTAG,FTR,B365H,B365D,B365A"]
    for season in range(args.first, args.last + 1):
        clubs = list(range(q - 3)) + [q - 3 + (season + k) % 6 for k in range(3)]
        fixtures = [(i, j) for i in clubs for j in clubs if i != j]
        rng.shuffle(fixtures)
        start = dt.date(season, 8, 15)
        for k, (i, j) in enumerate(fixtures):
            date = start + dt.timedelta(days=int(k * 270 / len(fixtures)))
            lam, mu = np.exp(0.3 + attack[i] - defence[j]), np.exp(0.05 + attack[j] - defence[i])
            hg, ag = rng.poisson(lam), rng.poisson(mu)
            res = "H" if hg > ag else "D" if hg == ag else "A"
            diff = lam - mu
            p = np.clip([0.45 + 0.25 * diff, 0.26, 0.29 - 0.25 * diff], 0.04, None)
            odds = 1.0 / (1.06 * p / p.sum())
            rows.append(f"{date:%d/%m/%Y},Club{i:02d},Club{j:02d},{hg},{ag},{res},"
                        + ",".join(f"{o:.2f}" for o in odds))
    args.out.write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {len(rows) - 1} matches to {args.out}")


if __name__ == "__main__":
    main()
