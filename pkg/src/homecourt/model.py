"""Box-score data model, CSV ingestion/serialization and structural validation.

One CSV row holds one team's line for one game; the two rows of a game share
``game_id``. Percentages are never stored, they are derived from makes and
attempts so the points identity can be checked.
"""
from __future__ import annotations

import csv
import datetime as dt
import enum
import io
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import IO, Iterable, Iterator, Mapping

import numpy as np

from .errors import DataError, EmptySelectionError, HeaderError, UndefinedValueError


class Stat(enum.Enum):
    THREE_FGA = "3FGA"
    THREE_FG_PCT = "3FG%"
    AST = "AST"
    BLK = "BLK"
    DREB = "DREB"
    FGA = "FGA"
    FG_PCT = "FG%"
    FTA = "FTA"
    FT_PCT = "FT%"
    OREB = "OREB"
    PF = "PF"
    PTS = "PTS"
    STL = "STL"
    TOV = "TOV"

    @property
    def is_percentage(self) -> bool:
        return self in _PERCENT_PARTS

    @property
    def lower_is_better(self) -> bool:
        return self in (Stat.PF, Stat.TOV)

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Stat":
        key = text.strip().upper()
        for s in cls:
            if s.value == key or s.name == key:
                return s
        raise ValueError(f"unknown statistic {text!r}")


# (makes field, attempts field) for the derived percentages
_PERCENT_PARTS = {
    Stat.FG_PCT: ("fgm", "fga"),
    Stat.THREE_FG_PCT: ("tpm", "tpa"),
    Stat.FT_PCT: ("ftm", "fta"),
}

# TeamLine field backing each count statistic
COUNT_FIELD = {
    Stat.THREE_FGA: "tpa",
    Stat.AST: "ast",
    Stat.BLK: "blk",
    Stat.DREB: "dreb",
    Stat.FGA: "fga",
    Stat.FTA: "fta",
    Stat.OREB: "oreb",
    Stat.PF: "pf",
    Stat.PTS: "pts",
    Stat.STL: "stl",
    Stat.TOV: "tov",
}


class GenderDivision(enum.Enum):
    MEN_D1 = ("M", 1)
    MEN_D2 = ("M", 2)
    MEN_D3 = ("M", 3)
    WOMEN_D1 = ("W", 1)
    WOMEN_D2 = ("W", 2)
    WOMEN_D3 = ("W", 3)

    @property
    def gender(self) -> str:
        return self.value[0]

    @property
    def division(self) -> int:
        return self.value[1]

    @property
    def code(self) -> str:
        return f"{self.gender}{self.division}"

    @property
    def label(self) -> str:
        return f"{'Men' if self.gender == 'M' else 'Women'} D{self.division}"

    @classmethod
    def from_codes(cls, gender: str, division: int | str) -> "GenderDivision":
        try:
            return cls((gender.strip().upper(), int(division)))
        except (ValueError, AttributeError):
            raise ValueError(f"unknown gender/division {gender!r}/{division!r}") from None

    @classmethod
    def parse(cls, text: str) -> "GenderDivision":
        """Accept ``M1``, ``W3`` or a member name such as ``MEN_D1``."""
        t = text.strip().upper()
        if t in cls.__members__:
            return cls[t]
        if len(t) == 2:
            return cls.from_codes(t[0], t[1])
        raise ValueError(f"unknown gender/division {text!r}")


GD_ORDER = tuple(GenderDivision)


class Location(enum.Enum):
    HOME = "H"
    AWAY = "A"
    NEUTRAL = "N"


@dataclass(frozen=True)
class TeamLine:
    team_id: str
    fgm: int
    fga: int
    tpm: int
    tpa: int
    ftm: int
    fta: int
    oreb: int
    dreb: int
    ast: int
    blk: int
    stl: int
    tov: int
    pf: int
    pts: int


COUNT_COLUMNS = tuple(f.name for f in fields(TeamLine) if f.name != "team_id")


@dataclass(frozen=True)
class GameRecord:
    game_id: str
    season: str
    date: dt.date
    gender_division: GenderDivision
    attendance: int
    lines: tuple[tuple[TeamLine, Location], tuple[TeamLine, Location]]

    @property
    def is_neutral(self) -> bool:
        return self.lines[0][1] is Location.NEUTRAL

    def line_for(self, loc: Location) -> TeamLine:
        for line, role in self.lines:
            if role is loc:
                return line
        raise KeyError(f"game {self.game_id} has no {loc.name.lower()} line")

    @property
    def home(self) -> TeamLine:
        return self.line_for(Location.HOME)

    @property
    def away(self) -> TeamLine:
        return self.line_for(Location.AWAY)

    @property
    def winner(self) -> str:
        a, b = self.lines[0][0], self.lines[1][0]
        if a.pts == b.pts:
            raise DataError(f"game {self.game_id} is tied")
        return a.team_id if a.pts > b.pts else b.team_id

    @property
    def team_ids(self) -> tuple[str, str]:
        return self.lines[0][0].team_id, self.lines[1][0].team_id


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return self.message


def _line_violations(line: TeamLine) -> list[Violation]:
    out = []
    for name in COUNT_COLUMNS:
        if getattr(line, name) < 0:
            out.append(Violation("negative", f"{line.team_id}: {name} < 0"))
    for small, big in (("fgm", "fga"), ("tpm", "tpa"), ("ftm", "fta"), ("tpa", "fga"), ("tpm", "fgm")):
        if getattr(line, small) > getattr(line, big):
            out.append(Violation("ordering", f"{line.team_id}: {small} ≤ {big} violated"))
    expected = 2 * (line.fgm - line.tpm) + 3 * line.tpm + line.ftm
    if line.pts != expected:
        out.append(Violation("pts", f"{line.team_id}: pts identity violated ({line.pts} != {expected})"))
    return out


def validate_game(record: GameRecord) -> list[Violation]:
    """Return every violated structural invariant of ``record`` (empty if valid)."""
    out: list[Violation] = []
    if len(record.lines) != 2:
        return [Violation("lines", f"game {record.game_id}: expected 2 team lines, got {len(record.lines)}")]
    (a, la), (b, lb) = record.lines
    roles = {la, lb}
    if not (roles == {Location.HOME, Location.AWAY} or (la is lb is Location.NEUTRAL)):
        out.append(Violation("location", f"game {record.game_id}: invalid location pair ({la.value}, {lb.value})"))
    if a.team_id == b.team_id:
        out.append(Violation("teams", f"game {record.game_id}: both lines belong to {a.team_id}"))
    if record.attendance < 0:
        out.append(Violation("attendance", f"game {record.game_id}: attendance < 0"))
    out.extend(_line_violations(a))
    out.extend(_line_violations(b))
    if a.pts == b.pts:
        out.append(Violation("tie", f"game {record.game_id}: tied score {a.pts}-{b.pts}"))
    return out


def validation_warnings(record: GameRecord) -> list[Violation]:
    """Non-fatal oddities; currently only zero attendance."""
    if record.attendance == 0:
        return [Violation("zero-attendance", f"game {record.game_id}: attendance is 0")]
    return []


def stat_value(line: TeamLine, stat: Stat) -> float:
    """Count for count statistics, makes/attempts in [0, 1] for percentages."""
    parts = _PERCENT_PARTS.get(stat)
    if parts is None:
        return getattr(line, COUNT_FIELD[stat])
    made, att = getattr(line, parts[0]), getattr(line, parts[1])
    if att == 0:
        raise UndefinedValueError(f"{stat.value} undefined for {line.team_id}: zero attempts")
    return made / att


POSSESSION_FTA_WEIGHT = 0.475


def possessions(line: TeamLine) -> float:
    return line.fga - line.oreb + line.tov + POSSESSION_FTA_WEIGHT * line.fta


def game_possessions(record: GameRecord) -> float:
    return 0.5 * (possessions(record.lines[0][0]) + possessions(record.lines[1][0]))


class Dataset:
    """Immutable ordered collection of games with lazily built indexes."""

    def __init__(self, games: Iterable[GameRecord] = ()):
        self._games = tuple(games)
        seen = set()
        for g in self._games:
            if g.game_id in seen:
                raise DataError(f"duplicate game_id {g.game_id}")
            seen.add(g.game_id)

    def __len__(self) -> int:
        return len(self._games)

    def __iter__(self) -> Iterator[GameRecord]:
        return iter(self._games)

    def __getitem__(self, i):
        return self._games[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self._games == other._games

    def __repr__(self) -> str:
        return f"Dataset({len(self)} games)"

    @property
    def games(self) -> tuple[GameRecord, ...]:
        return self._games

    @cached_property
    def _by_season(self) -> dict[str, tuple[int, ...]]:
        return _index(self._games, lambda g: (g.season,))

    @cached_property
    def _by_gd(self) -> dict[GenderDivision, tuple[int, ...]]:
        return _index(self._games, lambda g: (g.gender_division,))

    @cached_property
    def _by_team(self) -> dict[str, tuple[int, ...]]:
        return _index(self._games, lambda g: g.team_ids)

    @property
    def seasons(self) -> list[str]:
        return sorted(self._by_season)

    @property
    def gender_divisions(self) -> list[GenderDivision]:
        return [gd for gd in GD_ORDER if gd in self._by_gd]

    def by_season(self, season: str) -> list[GameRecord]:
        return [self._games[i] for i in self._by_season.get(season, ())]

    def by_gender_division(self, gd: GenderDivision) -> list[GameRecord]:
        return [self._games[i] for i in self._by_gd.get(gd, ())]

    def by_team(self, team_id: str) -> list[GameRecord]:
        return [self._games[i] for i in self._by_team.get(team_id, ())]

    def select(self, season: str | None = None, gender_division: GenderDivision | None = None) -> "Dataset":
        """Sub-dataset for a season and/or gender-division (``None`` means any)."""
        idx = range(len(self._games))
        if season is not None:
            idx = self._by_season.get(season, ())
        if gender_division is not None:
            keep = set(self._by_gd.get(gender_division, ()))
            idx = [i for i in idx if i in keep]
        return Dataset(self._games[i] for i in idx)

    @cached_property
    def lines(self) -> "LineTable":
        return LineTable.from_games(self._games)


def _index(games, keys) -> dict:
    out: dict = {}
    for i, g in enumerate(games):
        for k in dict.fromkeys(keys(g)):
            out.setdefault(k, []).append(i)
    return {k: tuple(v) for k, v in out.items()}


@dataclass(frozen=True)
class LineTable:
    """Columnar view: one entry per team line, two per game, in game order."""

    game: np.ndarray
    role: np.ndarray  # Location value codes 'H'/'A'/'N'
    gd: np.ndarray  # index into GD_ORDER
    season: np.ndarray  # season labels
    attendance: np.ndarray
    counts: Mapping[str, np.ndarray] = field(repr=False)

    @classmethod
    def from_games(cls, games) -> "LineTable":
        n = 2 * len(games)
        cols = {c: np.empty(n, dtype=np.int64) for c in COUNT_COLUMNS}
        game = np.repeat(np.arange(len(games)), 2)
        role = np.empty(n, dtype="<U1")
        gd = np.empty(n, dtype=np.int64)
        season = np.empty(n, dtype=object)
        att = np.empty(n, dtype=np.int64)
        gd_pos = {g: i for i, g in enumerate(GD_ORDER)}
        k = 0
        for g in games:
            for line, loc in g.lines:
                for c in COUNT_COLUMNS:
                    cols[c][k] = getattr(line, c)
                role[k] = loc.value
                gd[k] = gd_pos[g.gender_division]
                season[k] = g.season
                att[k] = g.attendance
                k += 1
        return cls(game, role, gd, season, att, cols)

    def values(self, stat: Stat) -> np.ndarray:
        """Per-line stat values; NaN where a percentage has zero attempts."""
        parts = _PERCENT_PARTS.get(stat)
        if parts is None:
            return self.counts[COUNT_FIELD[stat]].astype(float)
        made = self.counts[parts[0]].astype(float)
        att = self.counts[parts[1]].astype(float)
        out = np.full(att.shape, np.nan)
        ok = att > 0
        out[ok] = made[ok] / att[ok]
        return out


# --------------------------------------------------------------------------
# CSV schema

CSV_COLUMNS = (
    "game_id", "season", "date", "gender", "division", "team_id", "opponent_id",
    "loc", "attendance",
) + COUNT_COLUMNS


@dataclass(frozen=True)
class RowError:
    row: int  # 1-based physical line in the file, header is line 1
    message: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.message}"


@dataclass(frozen=True)
class ParseResult:
    dataset: Dataset
    errors: tuple[RowError, ...] = ()
    warnings: tuple[RowError, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def parse_dataset(
    stream: IO[str] | IO[bytes] | str | bytes,
    schema: Mapping[str, str] | None = None,
    strict: bool = False,
) -> ParseResult:
    """Read the two-rows-per-game CSV format.

    ``schema`` maps canonical column names to the header names actually used
    in the file; unmapped columns are looked up under their canonical name.
    Bad rows are skipped and reported; with ``strict=True`` any bad row raises
    :class:`DataError` carrying all row errors.
    """
    text = _as_text(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderError("empty input: missing header row") from None
    schema = dict(schema or {})
    header = [h.strip() for h in header]
    pos = {}
    missing = []
    for col in CSV_COLUMNS:
        name = schema.get(col, col)
        if name not in header:
            missing.append(name)
        else:
            pos[col] = header.index(name)
    if missing:
        raise HeaderError(f"missing required columns: {', '.join(missing)}")
    if len(set(header)) != len(header):
        raise HeaderError("duplicate column names in header")

    errors: list[RowError] = []
    warnings: list[RowError] = []
    pending: dict[str, tuple[int, dict]] = {}
    done: set[str] = set()
    order: list[str] = []
    games: dict[str, GameRecord] = {}

    for rownum, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            errors.append(RowError(rownum, f"expected {len(header)} cells, got {len(raw)}"))
            continue
        try:
            row = _convert_row({c: raw[i] for c, i in pos.items()})
        except ValueError as exc:
            errors.append(RowError(rownum, str(exc)))
            continue
        gid = row["game_id"]
        if gid in done:
            errors.append(RowError(rownum, f"duplicate game_id {gid}"))
            continue
        if gid not in pending:
            pending[gid] = (rownum, row)
            order.append(gid)
            continue
        first_row, first = pending.pop(gid)
        done.add(gid)
        try:
            record = _assemble(first, row)
        except ValueError as exc:
            errors.append(RowError(rownum, str(exc)))
            continue
        bad = validate_game(record)
        if bad:
            errors.extend(RowError(first_row, str(v)) for v in bad)
            continue
        warnings.extend(RowError(first_row, str(v)) for v in validation_warnings(record))
        games[gid] = record
    for gid, (rownum, _) in pending.items():
        errors.append(RowError(rownum, f"game {gid} has only one team row"))

    errors.sort(key=lambda e: e.row)
    if strict and errors:
        raise DataError(f"{len(errors)} invalid rows", errors=errors)
    return ParseResult(Dataset(games[g] for g in order if g in games), tuple(errors), tuple(warnings))


def _as_text(stream) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _convert_row(cells: dict[str, str]) -> dict:
    row: dict = {k: cells[k].strip() for k in ("game_id", "season", "team_id", "opponent_id")}
    for k in ("game_id", "season", "team_id"):
        if not row[k]:
            raise ValueError(f"empty {k}")
    try:
        row["date"] = dt.date.fromisoformat(cells["date"].strip())
    except ValueError:
        raise ValueError(f"unparseable date {cells['date']!r}") from None
    row["gd"] = GenderDivision.from_codes(cells["gender"], cells["division"].strip() or "x")
    try:
        row["loc"] = Location(cells["loc"].strip().upper())
    except ValueError:
        raise ValueError(f"unknown loc {cells['loc']!r}") from None
    for k in ("attendance",) + COUNT_COLUMNS:
        v = cells[k].strip()
        try:
            row[k] = int(v)
        except ValueError:
            raise ValueError(f"unparseable integer in {k}: {v!r}") from None
    return row


def _assemble(a: dict, b: dict) -> GameRecord:
    for k in ("season", "date", "gd", "attendance"):
        if a[k] != b[k]:
            raise ValueError(f"game {a['game_id']}: conflicting {k} between team rows")
    if a["opponent_id"] and a["opponent_id"] != b["team_id"] or b["opponent_id"] and b["opponent_id"] != a["team_id"]:
        raise ValueError(f"game {a['game_id']}: opponent_id does not match the other row")
    lines = tuple(
        (TeamLine(r["team_id"], *(r[c] for c in COUNT_COLUMNS)), r["loc"]) for r in (a, b)
    )
    return GameRecord(a["game_id"], a["season"], a["date"], a["gd"], a["attendance"], lines)


def write_dataset(dataset: Iterable[GameRecord], destination: IO[str] | None = None) -> str:
    """Serialize to the CSV schema; returns the text and writes it to ``destination`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for g in dataset:
        (a, la), (b, lb) = g.lines
        for line, loc, opp in ((a, la, b), (b, lb, a)):
            w.writerow(
                [g.game_id, g.season, g.date.isoformat(), g.gender_division.gender,
                 g.gender_division.division, line.team_id, opp.team_id, loc.value, g.attendance]
                + [getattr(line, c) for c in COUNT_COLUMNS]
            )
    text = buf.getvalue()
    if destination is not None:
        destination.write(text)
    return text


def load_dataset(path, strict: bool = False) -> ParseResult:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_dataset(fh, strict=strict)


def require_nonempty(values, what: str):
    if len(values) == 0:
        raise EmptySelectionError(f"no {what} in selection")
    return values
