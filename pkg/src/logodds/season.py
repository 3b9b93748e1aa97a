"""Monte Carlo league tables from frozen per-fixture outcome distributions.

Points are 3 for a win, 1 for a draw, 0 for a loss. Outcomes are sampled
without goals, so teams level on points are ordered uniformly at random
rather than by goal difference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import OutcomeDistribution
from .rng import stream

__all__ = ["RankDistribution", "simulate_season", "TIE_RULE"]

TIE_RULE = "teams level on points are ordered uniformly at random (goal difference is not simulated)"
POINTS = np.array([[3, 0], [1, 1], [0, 3]])  # (home, away) points for win, draw, lose


@dataclass
class RankDistribution:
    """probs[t, r] = probability that team t finishes in position r + 1."""

    probs: np.ndarray
    teams: tuple[str, ...]
    reps: int
    seed: int
    counts: np.ndarray | None = None

    def quartiles(self) -> list[tuple[str, int, int, int]]:
        """(team, lower quartile, median, upper quartile) of the finishing position."""
        cdf = np.cumsum(self.probs, axis=1)
        out = []
        for t, name in enumerate(self.teams):
            q = [int(np.searchsorted(cdf[t], p - 1e-12)) + 1 for p in (0.25, 0.5, 0.75)]
            out.append((name, *q))
        return out

    def summary(self) -> str:
        lines = [f"# {self.reps} replicates, seed {self.seed}; {TIE_RULE}",
                 f"{'team':<24} {'q25':>4} {'med':>4} {'q75':>4}"]
        for name, lo, med, hi in self.quartiles():
            lines.append(f"{name:<24} {lo:>4} {med:>4} {hi:>4}")
        return "\n".join(lines)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["team"] + [f"rank_{r + 1}" for r in range(self.probs.shape[1])])
            for name, row in zip(self.teams, self.probs):
                w.writerow([name] + [repr(float(p)) for p in row])


def simulate_season(
    predictions: Sequence[OutcomeDistribution],
    fixtures: Sequence[tuple[int, int]],
    reps: int = 10_000,
    seed: int = 0,
    teams: Sequence[str] | None = None,
    chunk: int = 1000,
) -> RankDistribution:
    """Sample every fixture independently per replicate and tabulate final positions.

    Replicate r draws from ``stream(seed, r)``: one uniform per fixture, then
    one uniform per team for tie-breaking.
    """
    if len(predictions) != len(fixtures):
        raise ValueError(f"{len(predictions)} predictions for {len(fixtures)} fixtures")
    if reps < 1:
        raise ValueError("reps must be positive")
    fx = np.asarray(fixtures, dtype=np.intp).reshape(-1, 2)
    n_teams = len(teams) if teams is not None else int(fx.max()) + 1 if len(fx) else 0
    if len(fx) and (fx.min() < 0 or fx.max() >= n_teams or np.any(fx[:, 0] == fx[:, 1])):
        raise ValueError("fixtures reference invalid team ids")
    names = tuple(teams) if teams is not None else tuple(str(t) for t in range(n_teams))
    cum = np.cumsum([p.as_array() for p in predictions], axis=1).reshape(-1, 3)
    m = len(fx)

    counts = np.zeros((n_teams, n_teams), dtype=np.int64)
    for start in range(0, reps, chunk):
        block = range(start, min(start + chunk, reps))
        u = np.empty((len(block), m))
        tie = np.empty((len(block), n_teams))
        for k, r in enumerate(block):
            g = stream(seed, r)
            u[k] = g.random(m)
            tie[k] = g.random(n_teams)
        # outcome index: 0 win, 1 draw, 2 lose; the last bin absorbs rounding
        outcome = (u[:, :, None] >= cum[None, :, :2]).sum(axis=2)
        pts = np.zeros((len(block), n_teams))
        for side in (0, 1):
            for b in range(len(block)):
                pts[b] += np.bincount(fx[:, side], POINTS[outcome[b], side], n_teams)
        # sort by points descending, then by the random tie key
        order = np.lexsort((tie, -pts), axis=1)
        ranks = np.empty_like(order)
        rows = np.arange(len(block))[:, None]
        ranks[rows, order] = np.arange(n_teams)[None, :]
        np.add.at(counts, (np.broadcast_to(np.arange(n_teams), ranks.shape), ranks), 1)
    return RankDistribution(counts / reps, names, reps, seed, counts)
