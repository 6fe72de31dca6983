import json
import math

import numpy as np
import pytest

from homecourt.errors import ConfigError
from homecourt.matching import attendance_cutoffs
from homecourt.metrics import Comparison, percent_increase
from homecourt.model import Dataset, GenderDivision, Stat, parse_dataset, validate_game, write_dataset
from homecourt.simulate import (
    DEFAULT_ATTENDANCE, TABLE3_CUTOFFS, LeagueConfig, generate_league, referee_slope_for_pf_shift, with_bias,
)

M1, W1 = GenderDivision.MEN_D1, GenderDivision.WOMEN_D1


def test_generated_games_are_valid_and_canonical(small_league):
    assert all(validate_game(g) == [] for g in small_league)
    keys = [(g.season, g.date, g.game_id) for g in small_league]
    assert keys == sorted(keys)
    assert len(small_league) == 6 * 20 * 12 // 2
    share = sum(g.is_neutral for g in small_league) / len(small_league)
    assert 0.03 < share < 0.12


def test_seed_determinism():
    cfg = LeagueConfig(n_teams=10, games_per_team=6, seed=3)
    a, ta = generate_league(cfg)
    b, tb = generate_league(cfg)
    assert a == b and ta.to_json() == tb.to_json()
    c, _ = generate_league(LeagueConfig(n_teams=10, games_per_team=6, seed=4))
    assert a != c


def test_blocks_are_independent_of_other_divisions():
    both, _ = generate_league(LeagueConfig(gender_divisions=(M1, W1), n_teams=10, games_per_team=6, seed=2))
    only_w, _ = generate_league(LeagueConfig(gender_divisions=(W1,), n_teams=10, games_per_team=6, seed=2))
    assert [g for g in both if g.gender_division is W1] == list(only_w)


def test_config_validation():
    for bad in (dict(n_teams=3), dict(games_per_team=0), dict(neutral_fraction=1.5), dict(overdispersion=-1)):
        with pytest.raises(ConfigError):
            generate_league(LeagueConfig(**bad))
    with pytest.raises(ConfigError):
        generate_league(with_bias(LeagueConfig(), home_multipliers={Stat.AST: 0.0}))
    with pytest.raises(ConfigError):
        generate_league(with_bias(LeagueConfig(), home_multipliers={Stat.PTS: 1.1}))


def test_means_converge_to_configured_rates():
    cfg = LeagueConfig(gender_divisions=(M1,), n_teams=200, games_per_team=100, seed=7)
    ds, _ = generate_league(cfg)
    t = ds.lines
    assert t.game.size >= 20_000
    sd = cfg.strength_sd
    for stat in (Stat.FGA, Stat.OREB, Stat.DREB, Stat.AST, Stat.BLK, Stat.STL, Stat.TOV, Stat.PF, Stat.FTA):
        effect = cfg.strength_effects[stat]
        # strength difference of two teams ~ N(0, 2 sd^2) -> E exp(e * diff) = exp(e^2 sd^2)
        want = cfg.base_rates[stat] * cfg.gd_multipliers.get(M1, {}).get(stat, 1.0) * cfg.pace_mean
        want *= math.exp(effect ** 2 * sd ** 2)
        got = t.values(stat).mean()
        assert abs(got / want - 1) < 0.02, (stat, got, want)


def test_null_league_summary_is_flat():
    ds, _ = generate_league(LeagueConfig(gender_divisions=(M1,), n_teams=500, games_per_team=80, seed=1))
    assert len(ds) >= 20_000
    for stat in Stat:
        v = percent_increase(ds, stat, M1, None, Comparison.HOME_AWAY).value
        assert abs(v) < 1.5, (stat, v)


def test_home_multiplier_lives_in_home_neutral():
    cfg = with_bias(LeagueConfig(gender_divisions=(M1,), n_teams=200, games_per_team=60, neutral_fraction=0.3,
                                 seed=5), home_multipliers={Stat.AST: 1.12})
    ds, _ = generate_league(cfg)
    hn = percent_increase(ds, Stat.AST, M1, None, Comparison.HOME_NEUTRAL).value
    na = percent_increase(ds, Stat.AST, M1, None, Comparison.NEUTRAL_AWAY).value
    assert 9 < hn < 15
    assert abs(na) < 2


def test_attendance_ordering_follows_divisions():
    ds, _ = generate_league(LeagueConfig(n_teams=60, games_per_team=20, seed=3))
    cut = {gd: attendance_cutoffs(ds, gd) for gd in GenderDivision}
    for g in ("M", "W"):
        d1, d2, d3 = (cut[GenderDivision.from_codes(g, k)] for k in (1, 2, 3))
        assert d1.low_cutoff > d2.low_cutoff > d3.low_cutoff
        assert d1.high_cutoff > d2.high_cutoff > d3.high_cutoff
    m1 = cut[M1]
    assert 0.7 < m1.low_cutoff / TABLE3_CUTOFFS[M1][0] < 1.4
    assert 0.7 < m1.high_cutoff / TABLE3_CUTOFFS[M1][1] < 1.4


def test_attendance_model_quartiles():
    for gd, (lo, hi) in TABLE3_CUTOFFS.items():
        med, lsd = DEFAULT_ATTENDANCE[gd]
        assert med * math.exp(-0.6744897501960817 * lsd) == pytest.approx(lo)
        assert med * math.exp(0.6744897501960817 * lsd) == pytest.approx(hi)


def _pf_gap(ds):
    cut = attendance_cutoffs(ds, M1)
    games = [g for g in ds if not g.is_neutral]
    low = [g.home.pf - g.away.pf for g in games if g.attendance <= cut.low_cutoff]
    high = [g.home.pf - g.away.pf for g in games if g.attendance >= cut.high_cutoff]
    return np.mean(low) - np.mean(high)


def test_referee_slope_moves_pf_gap():
    # strength coupling alone already opens a gap, so compare against the same league without referees
    base = LeagueConfig(gender_divisions=(M1,), n_teams=400, games_per_team=60, seed=8)
    slope = referee_slope_for_pf_shift(1.0, base)
    shifted = _pf_gap(generate_league(with_bias(base, attendance_referee_slope=slope))[0])
    assert shifted - _pf_gap(generate_league(base)[0]) == pytest.approx(1.0, abs=0.35)


def test_write_dataset_cases(tmp_path):
    assert write_dataset(Dataset()).splitlines() == [write_dataset(Dataset()).splitlines()[0]]
    ds, _ = generate_league(LeagueConfig(gender_divisions=(M1,), n_teams=2, games_per_team=1, neutral_fraction=0))
    assert len(write_dataset(ds).splitlines()) == 3
    big, _ = generate_league(LeagueConfig(n_teams=120, games_per_team=28, seed=6))
    assert len(big) >= 10_000
    assert parse_dataset(write_dataset(big)).dataset == big
    with open(tmp_path / "x.csv", "w") as fh:
        write_dataset(big, fh)
    assert (tmp_path / "x.csv").read_text() == write_dataset(big)


def test_ground_truth_json(small_league):
    _, truth = generate_league(with_bias(LeagueConfig(n_teams=4, games_per_team=2), home_multipliers={Stat.BLK: 1.13}))
    doc = json.loads(truth.to_json())
    assert doc["bias"]["home_multipliers"] == {"BLK": 1.13}
    assert len(doc["strengths"]) == 6 * 4
    assert truth.log_home_effect(Stat.BLK) == pytest.approx(math.log(1.13))
