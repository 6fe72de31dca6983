"""Synthetic leagues with known strengths, pace, attendance and injected biases.

Every count is Poisson with a log-linear rate

    base_rate[stat] * gd_multiplier * possessions * exp(strength_effect[stat] * (s - s_opp))
        * home_multiplier[stat] (home lines of home/away games) * referee term (PF, FTA)

so the GLM recovery targets are known exactly. Three-point attempts are a
binomial thinning of field goal attempts, which keeps both counts Poisson.
Makes are binomial given attempts; points are rebuilt from makes. Tied
games are redrawn.

The referee term depends on standardized log-attendance
``z = (log(att) - log(median_gd)) / sigma_gd``: home PF is scaled by
``exp(-slope * z)``, away PF by ``exp(slope * z)``, and FTA the other way
round.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import ConfigError
from .model import COUNT_COLUMNS, GD_ORDER, Dataset, GameRecord, GenderDivision, Location, Stat, TeamLine, write_dataset

__all__ = [
    "BiasSpec", "LeagueConfig", "GroundTruth", "generate_league", "write_dataset",
    "referee_slope_for_pf_shift", "with_bias", "TABLE3_CUTOFFS",
]

# Low/high quartile attendance cutoffs per gender-division (Table 3 of the source study)
TABLE3_CUTOFFS = {
    GenderDivision.MEN_D1: (1507, 7042),
    GenderDivision.WOMEN_D1: (427, 1824),
    GenderDivision.MEN_D2: (281, 897),
    GenderDivision.WOMEN_D2: (181, 527),
    GenderDivision.MEN_D3: (181, 500),
    GenderDivision.WOMEN_D3: (112, 300),
}
_Z75 = 0.6744897501960817  # standard normal 75th percentile


def _lognormal_from_quartiles(lo, hi):
    """(median, sigma) of the log-normal whose quartiles are lo, hi."""
    return math.sqrt(lo * hi), math.log(hi / lo) / (2 * _Z75)


DEFAULT_ATTENDANCE = {gd: _lognormal_from_quartiles(*q) for gd, q in TABLE3_CUTOFFS.items()}

# Per-possession rates for a typical college game of ~70 possessions
DEFAULT_RATES = {
    Stat.FGA: 0.82,
    Stat.THREE_FGA: 0.28,
    Stat.FTA: 0.29,
    Stat.OREB: 0.15,
    Stat.DREB: 0.35,
    Stat.AST: 0.19,
    Stat.BLK: 0.05,
    Stat.STL: 0.095,
    Stat.TOV: 0.19,
    Stat.PF: 0.26,
}

# Log-rate change per unit of latent strength difference
DEFAULT_STRENGTH_EFFECTS = {
    Stat.FGA: 0.05,
    Stat.THREE_FGA: 0.05,
    Stat.FTA: 0.2,
    Stat.OREB: 0.2,
    Stat.DREB: 0.2,
    Stat.AST: 0.3,
    Stat.BLK: 0.3,
    Stat.STL: 0.3,
    Stat.TOV: -0.2,
    Stat.PF: -0.15,
}

# Baseline differences between gender-divisions (women: more TOV/STL/OREB, fewer 3FGA)
DEFAULT_GD_MULTIPLIERS = {
    GenderDivision.WOMEN_D1: {Stat.TOV: 1.12, Stat.STL: 1.15, Stat.OREB: 1.12, Stat.THREE_FGA: 0.9},
    GenderDivision.WOMEN_D2: {Stat.TOV: 1.15, Stat.STL: 1.18, Stat.OREB: 1.12, Stat.THREE_FGA: 0.88},
    GenderDivision.WOMEN_D3: {Stat.TOV: 1.2, Stat.STL: 1.25, Stat.OREB: 1.15, Stat.THREE_FGA: 0.85},
    GenderDivision.MEN_D2: {Stat.BLK: 0.9},
    GenderDivision.MEN_D3: {Stat.BLK: 0.85},
}

MAKE_PROBS = {"two": 0.49, "three": 0.34, "free": 0.69}
MAKE_STRENGTH_EFFECT = 0.4  # logit change per unit strength difference

MODELLED_STATS = tuple(DEFAULT_RATES)


@dataclass(frozen=True)
class BiasSpec:
    home_multipliers: dict[Stat, float] = field(default_factory=dict)
    attendance_referee_slope: float = 0.0
    neutral_home_bias: bool = False  # apply home multipliers to the first line of neutral games

    def multiplier(self, stat: Stat) -> float:
        return self.home_multipliers.get(stat, 1.0)


@dataclass(frozen=True)
class LeagueConfig:
    gender_divisions: tuple[GenderDivision, ...] = GD_ORDER
    n_teams: int = 60
    games_per_team: int = 28
    seasons: tuple[str, ...] = ("2015-2016",)
    neutral_fraction: float = 0.075
    base_rates: dict[Stat, float] = field(default_factory=lambda: dict(DEFAULT_RATES))
    strength_effects: dict[Stat, float] = field(default_factory=lambda: dict(DEFAULT_STRENGTH_EFFECTS))
    gd_multipliers: dict[GenderDivision, dict[Stat, float]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GD_MULTIPLIERS.items()}
    )
    make_probs: dict[str, float] = field(default_factory=lambda: dict(MAKE_PROBS))
    make_strength_effect: float = MAKE_STRENGTH_EFFECT
    pace_mean: float = 70.0
    pace_sd: float = 5.0
    strength_sd: float = 0.3
    attendance: dict[GenderDivision, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_ATTENDANCE))
    attendance_strength_coupling: float = 0.25  # correlation of log-attendance with home strength
    neutral_attendance_shift: float = -0.2  # log-attendance offset for neutral games
    bias: BiasSpec = field(default_factory=BiasSpec)
    overdispersion: float = 0.0  # gamma frailty variance; 0 = pure Poisson
    seed: int = 0

    def validate(self) -> None:
        if self.n_teams < 2 or self.n_teams % 2:
            raise ConfigError("n_teams must be an even number >= 2")
        if self.games_per_team < 1:
            raise ConfigError("games_per_team must be >= 1")
        if not 0 <= self.neutral_fraction <= 1:
            raise ConfigError("neutral_fraction must lie in [0, 1]")
        if any(r < 0 for r in self.base_rates.values()):
            raise ConfigError("rates must be non-negative")
        if self.base_rates.get(Stat.FGA, 0) <= 0:
            raise ConfigError("FGA rate must be positive or games cannot be decided")
        if self.base_rates.get(Stat.THREE_FGA, 0) > self.base_rates[Stat.FGA]:
            raise ConfigError("3FGA rate cannot exceed FGA rate")
        for s, m in self.bias.home_multipliers.items():
            if m <= 0:
                raise ConfigError("home multipliers must be positive")
            if s not in MODELLED_STATS:
                raise ConfigError(f"cannot inject a home multiplier on {s.value}")
        if not 0 <= self.attendance_strength_coupling <= 1:
            raise ConfigError("attendance_strength_coupling must lie in [0, 1]")
        if self.overdispersion < 0:
            raise ConfigError("overdispersion must be >= 0")
        missing = [gd for gd in self.gender_divisions if gd not in self.attendance]
        if missing:
            raise ConfigError(f"no attendance model for {missing}")


@dataclass
class GroundTruth:
    config: LeagueConfig
    strengths: dict[str, float]  # team_id -> latent strength (per season)

    def log_home_effect(self, stat: Stat) -> float:
        return math.log(self.config.bias.multiplier(stat))

    def to_json(self) -> str:
        cfg = self.config
        doc = {
            "seed": cfg.seed,
            "gender_divisions": [gd.code for gd in cfg.gender_divisions],
            "n_teams": cfg.n_teams,
            "games_per_team": cfg.games_per_team,
            "seasons": list(cfg.seasons),
            "neutral_fraction": cfg.neutral_fraction,
            "base_rates": {s.value: r for s, r in cfg.base_rates.items()},
            "strength_effects": {s.value: r for s, r in cfg.strength_effects.items()},
            "gd_multipliers": {gd.code: {s.value: m for s, m in d.items()} for gd, d in cfg.gd_multipliers.items()},
            "make_probs": cfg.make_probs,
            "make_strength_effect": cfg.make_strength_effect,
            "pace": {"mean": cfg.pace_mean, "sd": cfg.pace_sd},
            "strength_sd": cfg.strength_sd,
            "attendance": {gd.code: {"median": m, "log_sd": s} for gd, (m, s) in cfg.attendance.items()},
            "attendance_strength_coupling": cfg.attendance_strength_coupling,
            "bias": {
                "home_multipliers": {s.value: m for s, m in cfg.bias.home_multipliers.items()},
                "attendance_referee_slope": cfg.bias.attendance_referee_slope,
                "neutral_home_bias": cfg.bias.neutral_home_bias,
            },
            "overdispersion": cfg.overdispersion,
            "strengths": dict(sorted(self.strengths.items())),
        }
        return json.dumps(doc, indent=2) + "\n"


def referee_slope_for_pf_shift(shift_fouls: float, config: LeagueConfig | None = None) -> float:
    """Slope giving roughly ``shift_fouls`` fewer home-minus-away PF between attendance quartile groups.

    Mean standardized log-attendance in the top quarter of a normal is
    phi(z75)/0.25 = 1.2711, so the quartile groups sit 2.5422 apart. For a
    small slope the home-minus-away PF mean moves by about
    ``2 * slope * mean_pf`` per unit of z.
    """
    cfg = config or LeagueConfig()
    mean_pf = cfg.base_rates[Stat.PF] * cfg.pace_mean
    gap = 2 * math.exp(-_Z75 ** 2 / 2) / math.sqrt(2 * math.pi) / 0.25
    return shift_fouls / (2 * mean_pf * gap)


def season_start(label: str) -> dt.date:
    try:
        year = int(label[:4])
    except ValueError:
        year = 2015
    return dt.date(year, 11, 10)


def generate_league(config: LeagueConfig) -> tuple[Dataset, GroundTruth]:
    """Draw a full league; identical config (including seed) gives an identical dataset."""
    config.validate()
    games: list[GameRecord] = []
    strengths: dict[str, float] = {}
    root = np.random.SeedSequence(config.seed)
    for si, season in enumerate(config.seasons):
        for gd in config.gender_divisions:
            ss = np.random.SeedSequence(root.entropy, spawn_key=(si, GD_ORDER.index(gd)))
            rng = np.random.default_rng(ss)
            block, st = _generate_block(config, season, gd, rng)
            games.extend(block)
            strengths.update(st)
    games.sort(key=lambda g: (g.season, g.date, g.game_id))
    return Dataset(games), GroundTruth(config, strengths)


def _schedule(cfg: LeagueConfig, rng):
    """Rounds of random perfect matchings: (round, team_a, team_b, neutral, a_is_home)."""
    n = cfg.n_teams
    rows = []
    for r in range(cfg.games_per_team):
        perm = rng.permutation(n)
        for k in range(0, n, 2):
            rows.append((r, perm[k], perm[k + 1]))
    rows = np.array(rows, dtype=np.int64)
    neutral = rng.random(len(rows)) < cfg.neutral_fraction
    a_home = rng.random(len(rows)) < 0.5
    return rows[:, 0], rows[:, 1], rows[:, 2], neutral, a_home


def _generate_block(cfg: LeagueConfig, season: str, gd: GenderDivision, rng):
    n = cfg.n_teams
    team_ids = [f"{gd.code}-{season[:4]}-T{t:03d}" for t in range(n)]
    strength = rng.normal(0.0, cfg.strength_sd, size=n)
    rnd, ta, tb, neutral, a_home = _schedule(cfg, rng)
    g = len(rnd)
    # line 0 is the home team of home/away games
    home_t = np.where(a_home, ta, tb)
    away_t = np.where(a_home, tb, ta)
    s0, s1 = strength[home_t], strength[away_t]

    med, lsd = cfg.attendance[gd]
    rho = cfg.attendance_strength_coupling
    host_z = np.where(neutral, 0.5 * (s0 + s1), s0) / cfg.strength_sd if cfg.strength_sd > 0 else np.zeros(g)
    z_att = rho * host_z + math.sqrt(1 - rho * rho) * rng.normal(size=g)
    log_att = math.log(med) + lsd * z_att + np.where(neutral, cfg.neutral_attendance_shift, 0.0)
    attendance = np.maximum(0, np.rint(np.exp(log_att))).astype(np.int64)
    ref_z = (np.log(np.maximum(attendance, 1)) - math.log(med)) / lsd
    pace = np.maximum(cfg.pace_mean + cfg.pace_sd * rng.normal(size=g), 20.0)

    lines = []
    for side, (s_own, s_opp) in enumerate(((s0, s1), (s1, s0))):
        is_home = ~neutral if side == 0 else np.zeros(g, dtype=bool)
        if cfg.bias.neutral_home_bias and side == 0:
            is_home = np.ones(g, dtype=bool)
        ref = np.where(neutral, 0.0, ref_z)
        ref_sign = -1.0 if side == 0 else 1.0
        lines.append(_draw_lines(cfg, gd, rng, pace, s_own - s_opp, is_home, ref_sign * ref))

    # redraw ties until none remain
    for _ in range(1000):
        tied = np.flatnonzero(lines[0]["pts"] == lines[1]["pts"])
        if tied.size == 0:
            break
        for side, (s_own, s_opp) in enumerate(((s0, s1), (s1, s0))):
            is_home = (~neutral if side == 0 else np.zeros(g, dtype=bool))[tied]
            if cfg.bias.neutral_home_bias and side == 0:
                is_home = np.ones(tied.size, dtype=bool)
            ref = np.where(neutral, 0.0, ref_z)[tied] * (-1.0 if side == 0 else 1.0)
            redraw = _draw_lines(cfg, gd, rng, pace[tied], (s_own - s_opp)[tied], is_home, ref)
            for c in COUNT_COLUMNS:
                lines[side][c][tied] = redraw[c]
    else:
        raise ConfigError("could not break tied scores")

    start = season_start(season)
    out = []
    for k in range(g):
        loc0, loc1 = (Location.NEUTRAL, Location.NEUTRAL) if neutral[k] else (Location.HOME, Location.AWAY)
        tl = [
            TeamLine(team_ids[t], *(int(lines[side][c][k]) for c in COUNT_COLUMNS))
            for side, t in ((0, home_t[k]), (1, away_t[k]))
        ]
        out.append(GameRecord(
            game_id=f"{season[:4]}-{gd.code}-{k:05d}",
            season=season,
            date=start + dt.timedelta(days=int(rnd[k]) * 3),
            gender_division=gd,
            attendance=int(attendance[k]),
            lines=((tl[0], loc0), (tl[1], loc1)),
        ))
    return out, {team_ids[t]: float(strength[t]) for t in range(n)}


def _draw_lines(cfg: LeagueConfig, gd, rng, pace, diff, is_home, ref_z) -> dict[str, np.ndarray]:
    """Counts for one side of ``len(pace)`` games; ``ref_z`` already carries the side's sign."""
    g = len(pace)
    gd_mult = cfg.gd_multipliers.get(gd, {})
    frailty = (
        rng.gamma(1.0 / cfg.overdispersion, cfg.overdispersion, size=g) if cfg.overdispersion > 0 else np.ones(g)
    )
    slope = cfg.bias.attendance_referee_slope

    def rate(stat):
        r = cfg.base_rates[stat] * gd_mult.get(stat, 1.0) * pace * np.exp(cfg.strength_effects.get(stat, 0.0) * diff)
        r = r * np.where(is_home, cfg.bias.multiplier(stat), 1.0)
        if stat is Stat.PF:
            r = r * np.exp(slope * ref_z)
        elif stat is Stat.FTA:
            r = r * np.exp(-slope * ref_z)
        return r * frailty

    fga_rate = rate(Stat.FGA)
    fga = rng.poisson(fga_rate)
    share = np.clip(rate(Stat.THREE_FGA) / fga_rate, 0.0, 1.0)
    tpa = rng.binomial(fga, share)
    shift = cfg.make_strength_effect * diff
    p2 = special.expit(special.logit(cfg.make_probs["two"]) + shift)
    p3 = special.expit(special.logit(cfg.make_probs["three"]) + shift)
    pft = cfg.make_probs["free"]
    fta = rng.poisson(rate(Stat.FTA))
    fg2m = rng.binomial(fga - tpa, p2)
    tpm = rng.binomial(tpa, p3)
    ftm = rng.binomial(fta, pft)
    out = {
        "fgm": fg2m + tpm, "fga": fga, "tpm": tpm, "tpa": tpa, "ftm": ftm, "fta": fta,
        "oreb": rng.poisson(rate(Stat.OREB)),
        "dreb": rng.poisson(rate(Stat.DREB)),
        "ast": rng.poisson(rate(Stat.AST)),
        "blk": rng.poisson(rate(Stat.BLK)),
        "stl": rng.poisson(rate(Stat.STL)),
        "tov": rng.poisson(rate(Stat.TOV)),
        "pf": rng.poisson(rate(Stat.PF)),
    }
    out["pts"] = 2 * fg2m + 3 * tpm + ftm
    return {c: np.asarray(out[c], dtype=np.int64) for c in COUNT_COLUMNS}


def with_bias(config: LeagueConfig, **bias) -> LeagueConfig:
    return replace(config, bias=BiasSpec(**bias))

