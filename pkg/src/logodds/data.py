"""Match records, team indexing, CSV ingestion and chronological splitting."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DataError",
    "Outcome",
    "OutcomeDistribution",
    "TeamIndex",
    "MatchRecord",
    "Dataset",
    "parse_csv",
    "write_csv",
    "split_by_dates",
    "partition_batches",
    "annotate_promotions",
    "season_of",
]

REQUIRED_COLUMNS = ("Date", "HomeTeam", "AwayTeam", "FTHG", "FTAG", "FTR")
ODDS_COLUMNS = ("B365H", "B365D", "B365A")
DEFAULT_SCHEMA = {c: c for c in REQUIRED_COLUMNS + ODDS_COLUMNS}


class DataError(ValueError):
    """Raised for malformed input; ``row`` is the 1-based data row (header excluded)."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"{message} at row {row}")


class Outcome(enum.IntEnum):
    """Match result from the home side's perspective."""

    HOME_WIN = 0
    DRAW = 1
    AWAY_WIN = 2

    @classmethod
    def from_goals(cls, home_goals: int, away_goals: int) -> "Outcome":
        if home_goals > away_goals:
            return cls.HOME_WIN
        if home_goals == away_goals:
            return cls.DRAW
        return cls.AWAY_WIN

    @property
    def code(self) -> str:
        return "HDA"[self.value]


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability mass over (home win, draw, home loss).

    Binary predictions carry ``p_draw == 0`` exactly.
    """

    p_win: float
    p_draw: float
    p_lose: float

    def __post_init__(self):
        for p in (self.p_win, self.p_draw, self.p_lose):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability out of range: {self}")
        if abs(self.p_win + self.p_draw + self.p_lose - 1.0) > 1e-12:
            raise ValueError(f"probabilities do not sum to one: {self}")

    @classmethod
    def normalized(cls, p_win: float, p_draw: float, p_lose: float) -> "OutcomeDistribution":
        total = p_win + p_draw + p_lose
        p_win, p_draw = p_win / total, p_draw / total
        # with a = fl(w + d), fl(a + fl(1 - a)) == 1, so w + d + l sums to exactly one
        p_lose = 1.0 - (p_win + p_draw)
        if p_lose < 0.0:
            p_lose = 0.0
            if p_win >= p_draw:
                p_win = 1.0 - p_draw
            else:
                p_draw = 1.0 - p_win
        return cls(p_win, p_draw, p_lose)

    @classmethod
    def binary(cls, p_win: float) -> "OutcomeDistribution":
        return cls(p_win, 0.0, 1.0 - p_win)

    @classmethod
    def uniform(cls) -> "OutcomeDistribution":
        return cls(1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0)

    def mass(self, outcome: Outcome | int) -> float:
        return (self.p_win, self.p_draw, self.p_lose)[int(outcome)]

    def as_array(self) -> np.ndarray:
        return np.array([self.p_win, self.p_draw, self.p_lose])

    def argmax(self) -> Outcome:
        # ties resolve in the order win > draw > lose
        probs = (self.p_win, self.p_draw, self.p_lose)
        return Outcome(max(range(3), key=lambda k: (probs[k], -k)))

    def swapped(self) -> "OutcomeDistribution":
        return OutcomeDistribution(self.p_lose, self.p_draw, self.p_win)


class TeamIndex:
    """Dense bijection between team names and ids ``0..Q-1``."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        if name not in self._ids:
            self._ids[name] = len(self._names)
            self._names.append(name)
        return self._ids[name]

    def id(self, name: str) -> int:
        return self._ids[name]

    def name(self, team_id: int) -> str:
        return self._names[team_id]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TeamIndex) and self._names == other._names

    def __repr__(self) -> str:
        return f"TeamIndex({self._names!r})"


@dataclass(frozen=True)
class MatchRecord:
    date: dt.date
    home: int
    away: int
    home_goals: int
    away_goals: int
    odds: tuple[float, float, float] | None = None
    home_promoted: bool = False
    away_promoted: bool = False

    def __post_init__(self):
        if self.home == self.away:
            raise ValueError("a team cannot play itself")
        if self.home_goals < 0 or self.away_goals < 0:
            raise ValueError("goals must be non-negative")

    @property
    def outcome(self) -> Outcome:
        return Outcome.from_goals(self.home_goals, self.away_goals)

    @property
    def score_diff(self) -> int:
        return self.home_goals - self.away_goals


@dataclass(frozen=True, eq=False)
class Dataset:
    """Match records kept in ascending date order (stable on ties)."""

    records: tuple[MatchRecord, ...]
    teams: TeamIndex = field(default_factory=TeamIndex)

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=lambda r: r.date))
        object.__setattr__(self, "records", recs)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Dataset(self.records[item], self.teams)
        return self.records[item]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Dataset)
            and self.records == other.records
            and self.teams == other.teams
        )

    @property
    def n_teams(self) -> int:
        return len(self.teams)

    def subset(self, records: Iterable[MatchRecord]) -> "Dataset":
        return Dataset(tuple(records), self.teams)

    def concat(self, other: "Dataset") -> "Dataset":
        if self.records and other.records and self.records[-1].date > other.records[0].date:
            raise ValueError("datasets overlap in time")
        return Dataset(self.records + other.records, self.teams)

    @cached_property
    def home_ids(self) -> np.ndarray:
        return np.array([r.home for r in self.records], dtype=np.intp)

    @cached_property
    def away_ids(self) -> np.ndarray:
        return np.array([r.away for r in self.records], dtype=np.intp)

    @cached_property
    def outcomes(self) -> np.ndarray:
        return np.array([int(r.outcome) for r in self.records], dtype=np.intp)

    @cached_property
    def home_goals(self) -> np.ndarray:
        return np.array([r.home_goals for r in self.records], dtype=np.int64)

    @cached_property
    def away_goals(self) -> np.ndarray:
        return np.array([r.away_goals for r in self.records], dtype=np.int64)

    @cached_property
    def score_diffs(self) -> np.ndarray:
        return self.home_goals - self.away_goals

    @cached_property
    def promotions(self) -> np.ndarray:
        """(N, 2) float array of (home promoted, away promoted) indicators."""
        return np.array(
            [(float(r.home_promoted), float(r.away_promoted)) for r in self.records],
            dtype=float,
        ).reshape(len(self.records), 2)

    @cached_property
    def dates(self) -> np.ndarray:
        return np.array([r.date.toordinal() for r in self.records], dtype=np.int64)


# ---------------------------------------------------------------------------
# CSV


def _parse_date(text: str, row: int) -> dt.date:
    parts = text.strip().split("/")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise DataError(f"malformed date {text!r}", row)
    day, month, year = (int(p) for p in parts)
    if len(parts[2]) == 2:
        year += 1900 if year >= 70 else 2000
    elif len(parts[2]) != 4:
        raise DataError(f"malformed date {text!r}", row)
    try:
        return dt.date(year, month, day)
    except ValueError as exc:
        raise DataError(f"malformed date {text!r}", row) from exc


def _parse_goals(text: str, row: int) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise DataError(f"non-integer goals {text!r}", row) from None
    if value < 0:
        raise DataError(f"negative goals {text!r}", row)
    return value


def _parse_odds(values: Sequence[str | None], row: int) -> tuple[float, float, float] | None:
    if any(v is None or not v.strip() for v in values):
        return None
    try:
        odds = tuple(float(v) for v in values)
    except ValueError:
        raise DataError(f"malformed odds {values!r}", row) from None
    if not all(math.isfinite(o) and o > 1.0 for o in odds):
        raise DataError(f"decimal odds must exceed 1, got {odds}", row)
    return odds  # type: ignore[return-value]


def parse_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    strict: bool = False,
    teams: TeamIndex | None = None,
) -> Dataset:
    """Read a football-data.co.uk style results file.

    ``schema`` maps canonical column names (Date, HomeTeam, AwayTeam, FTHG,
    FTAG, FTR, B365H, B365D, B365A) to the names used in the file. Rows with
    incomplete odds get ``odds=None``. In strict mode any column outside the
    schema is an error.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)
    teams = teams if teams is not None else TeamIndex()
    records = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if colmap[c] not in header]
        if missing:
            raise DataError(f"missing required columns {missing}")
        if strict:
            known = set(colmap.values())
            unknown = [c for c in header if c not in known]
            if unknown:
                raise DataError(f"unknown columns {unknown}")
        has_odds = all(colmap[c] in header for c in ODDS_COLUMNS)
        for row_no, row in enumerate(reader, start=1):
            if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
                continue
            date = _parse_date(row[colmap["Date"]] or "", row_no)
            home_name = (row[colmap["HomeTeam"]] or "").strip()
            away_name = (row[colmap["AwayTeam"]] or "").strip()
            if not home_name or not away_name:
                raise DataError("missing team name", row_no)
            if home_name == away_name:
                raise DataError(f"team {home_name!r} plays itself", row_no)
            hg = _parse_goals(row[colmap["FTHG"]] or "", row_no)
            ag = _parse_goals(row[colmap["FTAG"]] or "", row_no)
            ftr = (row[colmap["FTR"]] or "").strip().upper()
            if ftr not in ("H", "D", "A"):
                raise DataError(f"unknown result code {ftr!r}", row_no)
            if Outcome.from_goals(hg, ag).code != ftr:
                raise DataError("outcome inconsistent", row_no)
            odds = None
            if has_odds:
                odds = _parse_odds([row[colmap[c]] for c in ODDS_COLUMNS], row_no)
            records.append(
                MatchRecord(date, teams.add(home_name), teams.add(away_name), hg, ag, odds)
            )
    return Dataset(tuple(records), teams)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REQUIRED_COLUMNS + ODDS_COLUMNS)
        for r in dataset.records:
            odds = [repr(o) for o in r.odds] if r.odds else ["", "", ""]
            writer.writerow(
                [
                    r.date.strftime("%d/%m/%Y"),
                    dataset.teams.name(r.home),
                    dataset.teams.name(r.away),
                    r.home_goals,
                    r.away_goals,
                    r.outcome.code,
                    *odds,
                ]
            )


# ---------------------------------------------------------------------------
# splitting


def split_by_dates(
    d: Dataset, tune_start: dt.date, test_start: dt.date, strict: bool = False
) -> tuple[Dataset, Dataset, Dataset]:
    """Split into [.., tune_start), [tune_start, test_start), [test_start, ..)."""
    if not tune_start < test_start:
        raise ValueError("tune_start must precede test_start")
    train = d.subset(r for r in d.records if r.date < tune_start)
    tune = d.subset(r for r in d.records if tune_start <= r.date < test_start)
    test = d.subset(r for r in d.records if r.date >= test_start)
    if strict:
        for name, part in (("train", train), ("tune", tune), ("test", test)):
            if not len(part):
                raise DataError(f"empty {name} split")
    return train, tune, test


def _quarter(date: dt.date) -> tuple[int, int]:
    return date.year, (date.month - 1) // 3


def partition_batches(d: Dataset, policy: str | int = "match") -> list[Dataset]:
    """Cut ``d`` into time-contiguous batches.

    ``policy`` is ``"match"`` (one record per batch), ``"quarter"`` (calendar
    quarters) or a positive int ``n`` (fixed count, shorter final batch).
    """
    if not len(d):
        raise ValueError("cannot partition an empty dataset")
    recs = d.records
    if policy == "match":
        return [d.subset((r,)) for r in recs]
    if policy == "quarter":
        batches: list[list[MatchRecord]] = []
        current = None
        for r in recs:
            key = _quarter(r.date)
            if key != current:
                batches.append([])
                current = key
            batches[-1].append(r)
        return [d.subset(b) for b in batches]
    if isinstance(policy, int) and not isinstance(policy, bool) and policy >= 1:
        return [d.subset(recs[k : k + policy]) for k in range(0, len(recs), policy)]
    raise ValueError(f"unknown batch policy {policy!r}")


def season_of(date: dt.date, start_month: int = 7) -> int:
    """Season label: the calendar year in which the season started."""
    return date.year if date.month >= start_month else date.year - 1


def annotate_promotions(d: Dataset, start_month: int = 7) -> Dataset:
    """Flag teams absent from the previous season as newly promoted.

    Nobody is flagged in the first season present in the data.
    """
    by_season: dict[int, set[int]] = {}
    for r in d.records:
        by_season.setdefault(season_of(r.date, start_month), set()).update((r.home, r.away))
    out = []
    for r in d.records:
        prev = by_season.get(season_of(r.date, start_month) - 1)
        if prev is None:
            out.append(replace(r, home_promoted=False, away_promoted=False))
        else:
            out.append(replace(r, home_promoted=r.home not in prev, away_promoted=r.away not in prev))
    return d.subset(out)
