import datetime as dt

import pytest

from homecourt.model import Dataset, GameRecord, GenderDivision, Location, TeamLine
from homecourt.simulate import LeagueConfig, generate_league

H, A, N = Location.HOME, Location.AWAY, Location.NEUTRAL


def make_line(team, fgm=25, fga=60, tpm=6, tpa=18, ftm=12, fta=16, oreb=10, dreb=25, ast=14,
              blk=3, stl=6, tov=12, pf=18, pts=None):
    if pts is None:
        pts = 2 * (fgm - tpm) + 3 * tpm + ftm
    return TeamLine(team, fgm, fga, tpm, tpa, ftm, fta, oreb, dreb, ast, blk, stl, tov, pf, pts)


def make_game(gid, a, b, loc_a=H, loc_b=A, gd=GenderDivision.MEN_D1, season="2015-2016",
              attendance=1000, date=dt.date(2015, 12, 1)):
    """``a``/``b`` are TeamLines or team ids (then a beats b by default)."""
    if isinstance(a, str):
        a = make_line(a, fgm=27)
    if isinstance(b, str):
        b = make_line(b)
    return GameRecord(gid, season, date, gd, attendance, ((a, loc_a), (b, loc_b)))


def games_from_results(results, gd=GenderDivision.MEN_D1, season="2015-2016"):
    """Home/away games for (winner, loser) pairs; the winner hosts."""
    return Dataset(
        make_game(f"g{i:04d}", make_line(w, fgm=27), make_line(l), gd=gd, season=season)
        for i, (w, l) in enumerate(results)
    )


@pytest.fixture(scope="session")
def small_league():
    ds, truth = generate_league(LeagueConfig(n_teams=20, games_per_team=12, seed=5))
    return ds


@pytest.fixture(scope="session")
def multi_season_league():
    ds, _ = generate_league(LeagueConfig(n_teams=16, games_per_team=10, seasons=("2014-2015", "2015-2016"), seed=9))
    return ds


# ------------------------------------------------------- acceptance reporting

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, text = marker
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if report.when == "call" or failed:
        previous = _CRITERIA.get(number, (text, "PASS"))[1]
        _CRITERIA[number] = (text, "FAIL" if failed or previous == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {text}")
