"""Rating percentage index and the per-game home RPI advantage."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DegenerateError, EmptySelectionError, MissingTeamError, NotApplicableError
from .model import Dataset, GameRecord, GenderDivision

WP_WEIGHT, OWP_WEIGHT, OOWP_WEIGHT = 0.25, 0.50, 0.25
NEUTRAL_PRIOR_WP = 0.5


@dataclass(frozen=True)
class RpiEntry:
    team_id: str
    season: str
    wp: float
    owp: float
    oowp: float
    rpi: float
    games_played: int


@dataclass(frozen=True)
class RpiTable:
    season: str | None
    gender_division: GenderDivision | None
    entries: dict[str, RpiEntry] = field(default_factory=dict)

    def __getitem__(self, team_id: str) -> RpiEntry:
        try:
            return self.entries[team_id]
        except KeyError:
            raise MissingTeamError(f"team {team_id!r} not in RPI table") from None

    def __contains__(self, team_id) -> bool:
        return team_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def rpi(self, team_id: str) -> float:
        return self[team_id].rpi

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["team_id", "season", "wp", "owp", "oowp", "rpi"])
        for tid in sorted(self.entries):
            e = self.entries[tid]
            w.writerow([tid, e.season] + [f"{v:.6f}" for v in (e.wp, e.owp, e.oowp, e.rpi)])
        return buf.getvalue()


def rpi_from_results(
    results: Iterable[tuple[str, str]],
    season: str = "",
    exclude_reference: bool = True,
) -> dict[str, RpiEntry]:
    """RPI for every team from ``(winner, loser)`` pairs.

    Opponent terms average over games, so an opponent met twice counts twice.
    With ``exclude_reference`` an opponent's winning percentage ignores its
    games against the team being rated; an opponent left with no games
    contributes 0.5.
    """
    results = list(results)
    wins: dict[str, int] = defaultdict(int)
    played: dict[str, int] = defaultdict(int)
    h2h_wins: dict[tuple[str, str], int] = defaultdict(int)  # (team, opp) -> wins of team vs opp
    h2h_games: dict[tuple[str, str], int] = defaultdict(int)
    opponents: dict[str, list[str]] = defaultdict(list)
    for w, l in results:
        wins[w] += 1
        played[w] += 1
        played[l] += 1
        h2h_wins[(w, l)] += 1
        h2h_games[(w, l)] += 1
        h2h_games[(l, w)] += 1
        opponents[w].append(l)
        opponents[l].append(w)

    def wp_vs_field(team: str, ignoring: str | None) -> float:
        g, wn = played[team], wins[team]
        if ignoring is not None:
            g -= h2h_games[(team, ignoring)]
            wn -= h2h_wins[(team, ignoring)]
        return wn / g if g > 0 else NEUTRAL_PRIOR_WP

    teams = sorted(played)
    owp = {}
    for t in teams:
        ref = t if exclude_reference else None
        owp[t] = math.fsum(wp_vs_field(o, ref) for o in opponents[t]) / len(opponents[t])
    out = {}
    for t in teams:
        wp = wins[t] / played[t]
        oowp = math.fsum(owp[o] for o in opponents[t]) / len(opponents[t])
        rpi = WP_WEIGHT * wp + OWP_WEIGHT * owp[t] + OOWP_WEIGHT * oowp
        out[t] = RpiEntry(t, season, wp, owp[t], oowp, rpi, played[t])
    return out


def compute_rpi(
    dataset: Dataset,
    season: str | None,
    gender_division: GenderDivision | None,
    exclude_reference: bool = True,
    include_neutral: bool = True,
) -> RpiTable:
    """End-of-season RPI for one season / gender-division pool."""
    games = dataset.select(season, gender_division)
    results = [
        (g.winner, _loser(g))
        for g in games
        if include_neutral or not g.is_neutral
    ]
    if not results:
        raise EmptySelectionError(f"no games for season {season!r} / {gender_division}")
    return RpiTable(season, gender_division, rpi_from_results(results, season or "", exclude_reference))


def _loser(g: GameRecord) -> str:
    a, b = g.team_ids
    return b if g.winner == a else a


@dataclass(frozen=True)
class RpiAdvantage:
    game_id: str
    value: float
    standardized_value: float | None = None


def rpi_advantage(game: GameRecord, table: RpiTable) -> RpiAdvantage:
    """Home RPI minus away RPI for a home/away game."""
    if game.is_neutral:
        raise NotApplicableError(f"game {game.game_id} is at a neutral site")
    return RpiAdvantage(game.game_id, table.rpi(game.home.team_id) - table.rpi(game.away.team_id))


class Standardized(NamedTuple):
    values: np.ndarray
    mean: float
    sd: float


def standardize(values) -> Standardized:
    """Z-scores using the sample (n - 1) standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise DegenerateError("need at least two values to standardize")
    mean = math.fsum(x) / x.size
    sd = math.sqrt(math.fsum((x - mean) ** 2) / (x.size - 1))
    if not sd > 0:
        raise DegenerateError("zero variance: cannot standardize")
    return Standardized((x - mean) / sd, mean, sd)


def standardize_advantages(advs: list[RpiAdvantage]) -> tuple[list[RpiAdvantage], float, float]:
    z, mean, sd = standardize([a.value for a in advs])
    return [replace(a, standardized_value=float(v)) for a, v in zip(advs, z)], mean, sd


class RpiCache:
    """Lazily computed RPI tables keyed by (season, gender-division)."""

    def __init__(self, dataset: Dataset, **options):
        self.dataset = dataset
        self.options = options
        self._tables: dict = {}

    def table(self, season: str, gd: GenderDivision) -> RpiTable:
        key = (season, gd)
        if key not in self._tables:
            self._tables[key] = compute_rpi(self.dataset, season, gd, **self.options)
        return self._tables[key]

    def advantage(self, game: GameRecord) -> float:
        return rpi_advantage(game, self.table(game.season, game.gender_division)).value
