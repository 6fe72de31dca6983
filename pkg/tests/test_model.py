import dataclasses
import datetime as dt
import io

import pytest
from hypothesis import given, settings, strategies as st

from homecourt.errors import DataError, HeaderError, UndefinedValueError
from homecourt.model import (
    COUNT_COLUMNS, CSV_COLUMNS, Dataset, GenderDivision, Location, Stat, game_possessions,
    parse_dataset, possessions, stat_value, validate_game, validation_warnings, write_dataset,
)

from conftest import A, H, N, make_game, make_line


def test_stat_and_division_parsing():
    assert Stat.parse("3fg%") is Stat.THREE_FG_PCT
    assert Stat.parse("blk") is Stat.BLK
    assert Stat.PF.lower_is_better and Stat.TOV.lower_is_better and not Stat.AST.lower_is_better
    assert {s for s in Stat if s.is_percentage} == {Stat.FG_PCT, Stat.THREE_FG_PCT, Stat.FT_PCT}
    assert len(Stat) == 14
    assert GenderDivision.parse("W2") is GenderDivision.WOMEN_D2
    assert GenderDivision.from_codes("M", "3") is GenderDivision.MEN_D3
    assert GenderDivision.MEN_D1.label == "Men D1"
    with pytest.raises(ValueError):
        Stat.parse("XYZ")


def test_valid_game_has_no_violations():
    assert validate_game(make_game("g", "a", "b")) == []
    assert validate_game(make_game("g", "a", "b", N, N)) == []


def test_ordering_violation_message():
    bad = make_game("g", make_line("a", fgm=70, fga=60), "b")
    assert any("fgm ≤ fga violated" in v.message for v in validate_game(bad))


def test_tie_rejected():
    g = make_game("g", make_line("a"), make_line("b"))
    assert [v.code for v in validate_game(g)] == ["tie"]


_MUTATIONS = {
    "negative": lambda g: _mutate_line(g, tov=-1),
    "fgm>fga": lambda g: _mutate_line(g, fgm=g.lines[0][0].fga + 1),
    "tpm>tpa": lambda g: _mutate_line(g, tpm=g.lines[0][0].tpa + 1),
    "ftm>fta": lambda g: _mutate_line(g, ftm=g.lines[0][0].fta + 1),
    "tpa>fga": lambda g: _mutate_line(g, tpa=g.lines[0][0].fga + 1),
    "pts": lambda g: _mutate_line(g, pts=g.lines[0][0].pts + 1),
    "location": lambda g: dataclasses.replace(g, lines=((g.lines[0][0], H), (g.lines[1][0], H))),
    "mixed-neutral": lambda g: dataclasses.replace(g, lines=((g.lines[0][0], N), (g.lines[1][0], A))),
    "same-team": lambda g: dataclasses.replace(
        g, lines=(g.lines[0], (dataclasses.replace(g.lines[1][0], team_id=g.lines[0][0].team_id), A))),
    "attendance": lambda g: dataclasses.replace(g, attendance=-5),
    "tie": lambda g: dataclasses.replace(
        g, lines=(g.lines[0], (dataclasses.replace(g.lines[1][0], pts=g.lines[0][0].pts), g.lines[1][1]))),
}


def _mutate_line(g, **changes):
    line = dataclasses.replace(g.lines[0][0], **changes)
    return dataclasses.replace(g, lines=((line, g.lines[0][1]), g.lines[1]))


line_counts = st.fixed_dictionaries({
    "fga": st.integers(1, 90), "tpa": st.integers(0, 40), "fta": st.integers(0, 40),
    "oreb": st.integers(0, 25), "dreb": st.integers(0, 45), "ast": st.integers(0, 30),
    "blk": st.integers(0, 15), "stl": st.integers(0, 20), "tov": st.integers(0, 30), "pf": st.integers(0, 35),
})


@st.composite
def valid_lines(draw, team):
    c = draw(line_counts)
    tpa = min(c["tpa"], c["fga"])
    fgm = draw(st.integers(0, c["fga"]))
    tpm = draw(st.integers(0, min(tpa, fgm)))
    ftm = draw(st.integers(0, c["fta"]))
    return make_line(team, fgm=fgm, fga=c["fga"], tpm=tpm, tpa=tpa, ftm=ftm, fta=c["fta"], oreb=c["oreb"],
                     dreb=c["dreb"], ast=c["ast"], blk=c["blk"], stl=c["stl"], tov=c["tov"], pf=c["pf"])


@st.composite
def valid_games(draw):
    a, b = draw(valid_lines("a")), draw(valid_lines("b"))
    if a.pts == b.pts:
        a = dataclasses.replace(a, ftm=a.ftm + 1, fta=a.fta + 1, pts=a.pts + 1)
    neutral = draw(st.booleans())
    return make_game("g1", a, b, N if neutral else H, N if neutral else A, attendance=draw(st.integers(0, 20000)))


@settings(max_examples=200, deadline=None)
@given(valid_games(), st.sampled_from(sorted(_MUTATIONS)))
def test_every_single_mutation_is_caught(game, mutation):
    assert validate_game(game) == []
    assert len(validate_game(_MUTATIONS[mutation](game))) >= 1


def test_zero_attendance_is_a_warning_not_an_error():
    g = make_game("g", "a", "b", attendance=0)
    assert validate_game(g) == []
    assert [w.code for w in validation_warnings(g)] == ["zero-attendance"]


def test_stat_value_and_possessions():
    line = make_line("a", fgm=25, fga=60, tpm=6, tpa=18, ftm=12, fta=16, oreb=10, tov=12)
    assert stat_value(line, Stat.FG_PCT) == 25 / 60
    assert stat_value(line, Stat.THREE_FGA) == 18
    assert stat_value(line, Stat.PTS) == 2 * 19 + 18 + 12
    assert possessions(line) == 60 - 10 + 12 + 0.475 * 16
    g = make_game("g", line, make_line("b", fga=50, oreb=5, tov=20, fta=10))
    assert game_possessions(g) == 0.5 * (possessions(line) + 50 - 5 + 20 + 4.75)
    with pytest.raises(UndefinedValueError):
        stat_value(make_line("a", tpm=0, tpa=0), Stat.THREE_FG_PCT)


def test_line_table_marks_undefined_percentages():
    ds = Dataset([make_game("g", make_line("a", tpm=0, tpa=0, fgm=30), "b")])
    v = ds.lines.values(Stat.THREE_FG_PCT)
    assert v[0] != v[0] and v[1] == 6 / 18


def test_dataset_rejects_duplicate_ids_and_selects():
    g1 = make_game("g1", "a", "b")
    g2 = make_game("g2", "a", "c", season="2014-2015", gd=GenderDivision.WOMEN_D1)
    with pytest.raises(DataError):
        Dataset([g1, g1])
    ds = Dataset([g1, g2])
    assert ds.seasons == ["2014-2015", "2015-2016"]
    assert ds.gender_divisions == [GenderDivision.MEN_D1, GenderDivision.WOMEN_D1]
    assert [g.game_id for g in ds.by_team("a")] == ["g1", "g2"]
    assert len(ds.select("2015-2016", GenderDivision.MEN_D1)) == 1
    assert len(ds.select(gender_division=GenderDivision.WOMEN_D1)) == 1


def test_round_trip_is_bit_exact(small_league):
    text = write_dataset(small_league)
    parsed = parse_dataset(text, strict=True)
    assert parsed.dataset == small_league
    assert write_dataset(parsed.dataset) == text
    assert parse_dataset(text.encode()).dataset == small_league


def _csv(rows):
    return ",".join(CSV_COLUMNS) + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows)


def _row(gid, team, opp, loc, pts, **kw):
    counts = dict(fgm=20, fga=50, tpm=0, tpa=10, ftm=pts - 40, fta=30, oreb=5, dreb=20, ast=10, blk=2, stl=5,
                  tov=10, pf=15, pts=pts)
    counts.update(kw)
    return [gid, "2015-2016", "2015-12-01", "M", 1, team, opp, loc, 500] + [
        counts[c] for c in COUNT_COLUMNS]


def test_lenient_parse_reports_row_numbers():
    rows = [
        _row("g1", "a", "b", "H", 60), _row("g1", "b", "a", "A", 55),
        _row("g2", "a", "c", "H", 60, fgm=70), _row("g2", "c", "a", "A", 55),  # fgm > fga
        _row("g3", "a", "d", "H", 60),  # lone row
        _row("g1", "x", "y", "H", 60),  # duplicate id
    ]
    result = parse_dataset(_csv(rows))
    assert [g.game_id for g in result.dataset] == ["g1"]
    assert {e.row for e in result.errors} == {4, 6, 7}
    with pytest.raises(DataError) as info:
        parse_dataset(_csv(rows), strict=True)
    assert len(info.value.errors) == len(result.errors)


def test_bad_cells_are_row_errors():
    rows = [_row("g1", "a", "b", "H", 60), _row("g1", "b", "a", "Q", 55)]
    assert any("unknown loc" in e.message and e.row == 3 for e in parse_dataset(_csv(rows)).errors)
    rows = [_row("g1", "a", "b", "H", 60), _row("g1", "b", "a", "A", 55)]
    rows[1][9] = "lots"
    assert any("fgm" in e.message and e.row == 3 for e in parse_dataset(_csv(rows)).errors)


def test_missing_column_and_schema_mapping():
    text = _csv([_row("g1", "a", "b", "H", 60), _row("g1", "b", "a", "A", 55)])
    with pytest.raises(HeaderError):
        parse_dataset(text.replace("attendance", "crowd", 1))
    mapped = parse_dataset(text.replace("attendance", "crowd", 1), schema={"attendance": "crowd"})
    assert mapped.ok and mapped.dataset[0].attendance == 500
    with pytest.raises(HeaderError):
        parse_dataset("")


def test_game_accessors():
    g = make_game("g", "a", "b")
    assert g.home.team_id == "a" and g.away.team_id == "b" and g.winner == "a"
    assert make_game("n", "a", "b", N, N).is_neutral
    with pytest.raises(KeyError):
        make_game("n", "a", "b", N, N).home
    assert g.date == dt.date(2015, 12, 1)


@given(st.integers(0, 100), st.integers(0, 30), st.integers(0, 40), st.integers(0, 40),
       st.sampled_from(["fga", "tov", "fta", "oreb"]), st.integers(1, 10))
def test_possessions_monotone(fga, oreb, tov, fta, field, step):
    base = make_line("a", fga=fga, oreb=oreb, tov=tov, fta=fta)
    bumped = dataclasses.replace(base, **{field: getattr(base, field) + step})
    if field == "oreb":
        assert possessions(bumped) <= possessions(base)
    else:
        assert possessions(bumped) >= possessions(base)


def test_possessions_zero_line_and_symmetry():
    zero = make_line("z", fgm=0, fga=0, tpm=0, tpa=0, ftm=0, fta=0, oreb=0, tov=0)
    assert possessions(zero) == 0
    line = make_line("a")
    g = make_game("g", line, dataclasses.replace(line, team_id="b", pts=line.pts - 1, ftm=line.ftm - 1))
    assert game_possessions(g) == possessions(line)
