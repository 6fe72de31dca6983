import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homecourt.errors import EmptySelectionError, NotApplicableError, UnreliableResultError
from homecourt.inference import (
    AttendanceExperiment, attendance_table, bonferroni_alpha, home_advantage, iteration_rng,
    matched_attendance_test, welch_columns, welch_t_test,
)
from homecourt.matching import RpiMatcher
from homecourt.model import GenderDivision, Stat
from homecourt.rpi import RpiCache
from homecourt.simulate import LeagueConfig, generate_league

from conftest import N, make_game, make_line
from oracles import welch_mp

M1 = GenderDivision.MEN_D1


def test_home_advantage_has_no_flip():
    g = make_game("g", make_line("a", ast=20, pf=22, fgm=27), make_line("b", ast=15, pf=18))
    assert home_advantage(g, Stat.AST) == 5
    assert home_advantage(g, Stat.PF) == 4
    same = make_game("s", make_line("a", fgm=27), make_line("b", fgm=27, ftm=11))
    assert home_advantage(same, Stat.BLK) == 0
    with pytest.raises(NotApplicableError):
        home_advantage(make_game("n", "a", "b", N, N), Stat.AST)


def test_welch_trivial_and_degenerate():
    r = welch_t_test([0, 1], [0, 1])
    assert r.t_statistic == 0 and r.p_value == 1
    x = [1.0, 4.0, 2.5, 7.0]
    assert welch_t_test(x, x).p_value == 1
    same = welch_t_test([3, 3, 3], [3, 3])
    assert same.degenerate and same.p_value == 1
    diff = welch_t_test([3, 3, 3], [4, 4])
    assert diff.degenerate and diff.p_value == 0
    with pytest.raises(EmptySelectionError):
        welch_t_test([1.0], [1.0, 2.0])


def test_welch_against_high_precision_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 3), rng.integers(2, 60))
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 3), rng.integers(2, 60))
        r = welch_t_test(a, b)
        t, dof, p = welch_mp(a, b)
        assert r.t_statistic == pytest.approx(t, rel=1e-10)
        assert r.dof == pytest.approx(dof, rel=1e-10)
        assert r.p_value == pytest.approx(p, rel=1e-10, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30), st.lists(st.floats(-100, 100), min_size=2, max_size=30))
def test_welch_antisymmetry(a, b):
    r1, r2 = welch_t_test(a, b), welch_t_test(b, a)
    if r1.degenerate:
        assert r2.degenerate and r1.p_value == r2.p_value
        return
    assert r1.t_statistic == pytest.approx(-r2.t_statistic, rel=1e-12, abs=1e-300)
    assert r1.p_value == pytest.approx(r2.p_value, rel=1e-12, abs=1e-300)
    assert 0 <= r1.p_value <= 1 and r1.dof > 0


def test_welch_columns_matches_scalar_and_ignores_nan():
    rng = np.random.default_rng(2)
    A, B = rng.normal(size=(40, 3)), rng.normal(size=(30, 3))
    A[0, 1] = np.nan
    B[:29, 2] = np.nan
    t, p, diff = welch_columns(A, B)
    r = welch_t_test(A[1:, 1], B[:, 1])
    assert t[1] == pytest.approx(r.t_statistic, rel=1e-12) and p[1] == pytest.approx(r.p_value, rel=1e-12)
    assert np.isnan(p[2])


def test_null_uniformity_and_power():
    rng = np.random.default_rng(3)
    rejections = sum(welch_t_test(rng.normal(size=50), rng.normal(size=70)).p_value < 0.05 for _ in range(2000))
    assert 0.03 <= rejections / 2000 <= 0.07
    power = sum(welch_t_test(rng.normal(0.5, 1, 500), rng.normal(0, 1, 500)).p_value < 0.0006 for _ in range(300))
    assert power / 300 >= 0.99


def test_bonferroni():
    assert bonferroni_alpha(84, 0.05) == 0.05 / 84
    assert f"{bonferroni_alpha(84, 0.05):.1g}" == "0.0006"
    assert bonferroni_alpha(1, 0.05) == 0.05
    assert bonferroni_alpha(2, 0.10) == 0.05
    for bad in ((0, 0.05), (3, 0.0), (3, 1.0)):
        with pytest.raises(ValueError):
            bonferroni_alpha(*bad)


@pytest.fixture(scope="module")
def league():
    ds, _ = generate_league(LeagueConfig(gender_divisions=(M1, GenderDivision.WOMEN_D3), n_teams=40,
                                         games_per_team=20, seed=6))
    return ds


def test_single_iteration_is_one_matched_test(league):
    res = matched_attendance_test(league, M1, Stat.AST, iterations=1, rng=9)
    exp = AttendanceExperiment(league, M1, (Stat.AST,))
    idx = RpiMatcher(exp.low_rpi, exp.high_rpi, 25).draw(iteration_rng(9, M1, 0))
    direct = welch_t_test(exp.high_adv[idx, 0], exp.low_adv[:, 0])
    assert res.mean_abs_p == pytest.approx(direct.p_value, rel=1e-12)
    assert res.sign == (1 if direct.mean_diff >= 0 else -1)
    assert res.iterations == 1


def test_reproducible_and_thread_independent(league):
    a = matched_attendance_test(league, M1, Stat.PF, iterations=40, rng=5)
    b = matched_attendance_test(league, M1, Stat.PF, iterations=40, rng=5)
    assert a == b
    t1 = attendance_table(league, iterations=30, seed=3, threads=1)
    t4 = attendance_table(league, iterations=30, seed=3, threads=4)
    assert t1.to_csv() == t4.to_csv() and t1.to_json() == t4.to_json()
    cell = t1.cells[(Stat.PF, M1)]
    assert cell == matched_attendance_test(league, M1, Stat.PF, iterations=30, rng=3, alpha=t1.alpha)
    assert 0 <= cell.mean_abs_p <= 1 and cell.sign in (1, -1)


def test_sign_follows_improvement_direction(league):
    cell = matched_attendance_test(league, M1, Stat.PF, iterations=20, rng=1)
    improve = -cell.mean_diff
    assert cell.sign == (-1 if improve < 0 else 1)


def test_table_layout(league):
    t = attendance_table(league, iterations=20, seed=1)
    assert t.n_tests == 14 * 2 and t.alpha == 0.05 / 28
    lines = t.to_csv().splitlines()
    assert lines[0].startswith("row,overall,M1,W3")
    assert lines[1].startswith("Low,") and lines[2].startswith("High,")
    assert len(lines) == 3 + 14
    p = lines[3].split(",")[2]
    assert "e" in p and len(p.lstrip("-").split("e")[0].replace(".", "")) == 3
    assert t.significant() == [c for c in t.cells.values() if c.mean_abs_p < t.alpha]


def test_too_many_empty_matchings_is_unreliable(league):
    exp = AttendanceExperiment(league, M1, (Stat.AST,))
    exp.iteration = lambda rng: None
    with pytest.raises(UnreliableResultError):
        exp.run(20, 0, 0.01)
