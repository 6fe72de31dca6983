"""Home / neutral / away percent-increase measures.

All three comparisons divide by the same denominator, the mean over every
team line of the filtered games (neutral lines included), so that
``HomeNeutral + NeutralAway == HomeAway`` holds exactly.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, EmptySelectionError
from .model import GD_ORDER, Dataset, GenderDivision, Location, Stat


class Comparison(enum.Enum):
    HOME_AWAY = "HomeAway"
    HOME_NEUTRAL = "HomeNeutral"
    NEUTRAL_AWAY = "NeutralAway"

    @property
    def roles(self) -> tuple[Location, Location]:
        return _ROLES[self]


_ROLES = {
    Comparison.HOME_AWAY: (Location.HOME, Location.AWAY),
    Comparison.HOME_NEUTRAL: (Location.HOME, Location.NEUTRAL),
    Comparison.NEUTRAL_AWAY: (Location.NEUTRAL, Location.AWAY),
}


@dataclass(frozen=True)
class PercentIncrease:
    stat: Stat
    gender_division: GenderDivision
    season: str | None
    comparison: Comparison
    value: float
    n_games: int

    def as_row(self) -> dict:
        gd = self.gender_division
        return {
            "stat": self.stat.value,
            "gender": gd.gender,
            "division": gd.division,
            "season": self.season if self.season is not None else "all",
            "comparison": self.comparison.value,
            "value": self.value,
            "n_games": self.n_games,
        }


def _selection(dataset: Dataset, gender_division, season):
    t = dataset.lines
    mask = np.ones(len(t.game), dtype=bool)
    if gender_division is not None:
        mask &= t.gd == GD_ORDER.index(gender_division)
    if season is not None:
        mask &= t.season == season
    return t, mask


def group_mean(
    dataset: Dataset,
    stat: Stat,
    gender_division: GenderDivision | None,
    season: str | None,
    role: Location | None,
) -> float:
    """Mean stat value over team lines playing ``role`` (``None`` = every line)."""
    return _role_mean(dataset, stat, gender_division, season, role)[0]


def _role_mean(dataset, stat, gender_division, season, role):
    t, mask = _selection(dataset, gender_division, season)
    if role is not None:
        mask = mask & (t.role == role.value)
    vals = t.values(stat)[mask]
    defined = ~np.isnan(vals)
    vals = vals[defined]
    if vals.size == 0:
        what = role.name.lower() if role is not None else "any"
        raise EmptySelectionError(f"no {what} lines with defined {stat.value}")
    games = np.unique(t.game[mask][defined])
    return math.fsum(vals) / vals.size, games


def percent_increase(
    dataset: Dataset,
    stat: Stat,
    gender_division: GenderDivision | None,
    season: str | None,
    comparison: Comparison,
) -> PercentIncrease:
    a_role, b_role = comparison.roles
    mean_a, games_a = _role_mean(dataset, stat, gender_division, season, a_role)
    mean_b, games_b = _role_mean(dataset, stat, gender_division, season, b_role)
    overall, _ = _role_mean(dataset, stat, gender_division, season, None)
    if overall == 0:
        raise DegenerateError(f"overall mean of {stat.value} is zero")
    value = 100.0 * (mean_a - mean_b) / overall
    if stat.lower_is_better:
        value = -value
    n_games = len(np.union1d(games_a, games_b))
    return PercentIncrease(stat, gender_division, season, comparison, value, n_games)


def summarize(dataset: Dataset, pool_seasons: bool = False) -> list[PercentIncrease]:
    """Full stat x gender-division x season x comparison grid.

    Cells whose selection is empty or degenerate are omitted. Stats are ordered
    by their mean HomeAway value, largest first.
    """
    if len(dataset) == 0:
        raise EmptySelectionError("empty dataset")
    seasons = [None] if pool_seasons else dataset.seasons
    rows = []
    for stat in Stat:
        for gd in dataset.gender_divisions:
            for season in seasons:
                for comp in Comparison:
                    try:
                        rows.append(percent_increase(dataset, stat, gd, season, comp))
                    except (EmptySelectionError, DegenerateError):
                        pass
    return sort_by_home_away(rows)


def sort_by_home_away(rows: list[PercentIncrease]) -> list[PercentIncrease]:
    ha: dict[Stat, list[float]] = {}
    for r in rows:
        if r.comparison is Comparison.HOME_AWAY:
            ha.setdefault(r.stat, []).append(r.value)
    stat_key = {s: (0, -math.fsum(v) / len(v)) if v else (1, 0.0) for s, v in ha.items()}
    stat_pos = {s: i for i, s in enumerate(Stat)}
    comp_pos = {c: i for i, c in enumerate(Comparison)}
    gd_pos = {g: i for i, g in enumerate(GD_ORDER)}
    return sorted(
        rows,
        key=lambda r: (
            stat_key.get(r.stat, (1, 0.0)),
            stat_pos[r.stat],
            gd_pos[r.gender_division],
            r.season or "",
            comp_pos[r.comparison],
        ),
    )


SUMMARY_FIELDS = ("stat", "gender", "division", "season", "comparison", "value", "n_games")


def summary_csv(rows: list[PercentIncrease], fmt=lambda v: f"{v:.6g}") -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = r.as_row()
        d["value"] = fmt(d["value"])
        w.writerow(d)
    return buf.getvalue()


def summary_json(rows: list[PercentIncrease]) -> str:
    return json.dumps([_round_row(r.as_row()) for r in rows], indent=2) + "\n"


def _round_row(d):
    d["value"] = float(f"{d['value']:.6g}")
    return d


def plot_data(rows: list[PercentIncrease]) -> list[dict]:
    """Long-format table for external plotting.

    ``figure`` is ``home_away`` (per-season points, one panel per stat) or
    ``decomposition`` (HomeNeutral/NeutralAway points); ``rank`` is the stat's
    position in the HomeAway ordering.
    """
    order: list[Stat] = []
    for r in rows:
        if r.stat not in order:
            order.append(r.stat)
    out = []
    for r in rows:
        d = _round_row(r.as_row())
        d["figure"] = "home_away" if r.comparison is Comparison.HOME_AWAY else "decomposition"
        d["rank"] = order.index(r.stat) + 1
        d["gender_division"] = r.gender_division.code
        out.append(d)
    return out


def plot_data_csv(rows: list[PercentIncrease]) -> str:
    data = plot_data(rows)
    buf = io.StringIO()
    cols = ("figure", "rank", "stat", "gender_division", "gender", "division", "season", "comparison", "value", "n_games")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(data)
    return buf.getvalue()


__all__ = [
    "Comparison", "PercentIncrease", "group_mean", "percent_increase", "summarize",
    "summary_csv", "summary_json", "plot_data", "plot_data_csv",
]
