"""Attendance tests on home advantages: Welch t-tests over repeated RPI' matchings."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import (
    DegenerateError, EmptyMatchError, EmptySelectionError, NotApplicableError, UndefinedValueError,
    UnreliableResultError,
)
from .matching import AttendanceCutoffs, RpiMatcher, attendance_cutoffs, partition_by_attendance
from .model import GD_ORDER, Dataset, GameRecord, GenderDivision, Stat, stat_value
from .rpi import RpiCache

ITERATIONS = 1000
FAMILY_ALPHA = 0.05
MAX_SKIPPED_FRACTION = 0.10


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    dof: float
    p_value: float
    mean_diff: float
    n1: int
    n2: int
    degenerate: bool = False


def home_advantage(game: GameRecord, stat: Stat) -> float:
    """Home minus away value; no sign flip for lower-is-better stats."""
    if game.is_neutral:
        raise NotApplicableError(f"game {game.game_id} is at a neutral site")
    return stat_value(game.home, stat) - stat_value(game.away, stat)


def welch_t_test(a, b) -> TTestResult:
    """Two-sided Welch test of mean(a) - mean(b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise EmptySelectionError("Welch test needs at least two observations per sample")
    (m1, v1), (m2, v2) = _moments(a), _moments(b)
    t, dof, p, degenerate = _welch(m1 - m2, v1, v2, a.size, b.size)
    return TTestResult(t, dof, p, m1 - m2, a.size, b.size, degenerate)


def _moments(x):
    m = math.fsum(x) / x.size
    return m, math.fsum((x - m) ** 2) / (x.size - 1)


def _welch(diff, v1, v2, n1, n2):
    s1, s2 = v1 / n1, v2 / n2
    se2 = s1 + s2
    if se2 == 0:
        if diff == 0:
            return 0.0, float(n1 + n2 - 2), 1.0, True
        return math.copysign(math.inf, diff), float(n1 + n2 - 2), 0.0, True
    t = diff / math.sqrt(se2)
    r1, r2 = s1 / se2, s2 / se2  # scale-free form; squaring tiny variances would underflow
    dof = 1.0 / (r1 * r1 / (n1 - 1) + r2 * r2 / (n2 - 1))
    p = float(2.0 * special.stdtr(dof, -abs(t)))
    return t, dof, min(1.0, p), False


def welch_columns(A, B, b_moments=None):
    """Column-wise Welch tests of A[:, k] vs B[:, k], ignoring NaN entries.

    Each column is reduced on its own with compensated sums, so a column's
    result never depends on the other columns. ``b_moments`` may carry
    precomputed :func:`column_moments` of ``B``. Returns ``(t, p, mean_diff)``
    arrays; columns with fewer than two defined values on either side give NaN.
    """
    k = A.shape[1]
    bm = b_moments if b_moments is not None else column_moments(B)
    am = column_moments(A)
    t = np.full(k, np.nan)
    p = np.full(k, np.nan)
    diff = np.full(k, np.nan)
    for j in range(k):
        (n1, m1, v1), (n2, m2, v2) = am[j], bm[j]
        if n1 >= 1 and n2 >= 1:
            diff[j] = m1 - m2
        if n1 >= 2 and n2 >= 2:
            t[j], _, p[j], _ = _welch(m1 - m2, v1, v2, n1, n2)
    return t, p, diff


def column_moments(X) -> list[tuple[int, float, float]]:
    """(n, mean, sample variance) per column over the non-NaN entries."""
    out = []
    for j in range(X.shape[1]):
        x = X[:, j]
        x = x[~np.isnan(x)]
        if x.size >= 2:
            out.append((x.size, *_moments(x)))
        elif x.size == 1:
            out.append((1, float(x[0]), math.nan))
        else:
            out.append((0, math.nan, math.nan))
    return out


def bonferroni_alpha(n_tests: int, family_alpha: float = FAMILY_ALPHA) -> float:
    if n_tests < 1:
        raise ValueError("n_tests must be >= 1")
    if not 0 < family_alpha < 1:
        raise ValueError("family_alpha must lie in (0, 1)")
    return family_alpha / n_tests


@dataclass(frozen=True)
class SignedMeanP:
    stat: Stat
    gender_division: GenderDivision
    mean_abs_p: float
    sign: int
    iterations: int
    significant: bool
    alpha: float
    skipped: int = 0
    mean_diff: float = 0.0  # mean over iterations of matched-high minus low mean advantage
    direction_agreement: float = 1.0  # share of iterations whose diff has the reported sign

    @property
    def signed_p(self) -> float:
        return self.sign * self.mean_abs_p


def iteration_rng(master_seed: int, gd: GenderDivision, iteration: int) -> np.random.Generator:
    """Independent stream per (gender-division, iteration), fixed by the master seed."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(GD_ORDER.index(gd), iteration))
    return np.random.default_rng(ss)


class AttendanceExperiment:
    """Everything the repeated test needs for one gender-division, computed once.

    The low sample is fixed; every iteration re-matches the high sample and
    tests all requested statistics on that matching.
    """

    def __init__(self, dataset: Dataset, gender_division: GenderDivision, stats=tuple(Stat),
                 n_bins: int = 25, rpi_cache: RpiCache | None = None):
        self.gender_division = gender_division
        self.stats = tuple(stats)
        self.cutoffs: AttendanceCutoffs = attendance_cutoffs(dataset, gender_division)
        low, high = partition_by_attendance(dataset, gender_division, self.cutoffs)
        if not low or not high:
            raise EmptySelectionError(f"empty attendance group for {gender_division.label}")
        cache = rpi_cache or RpiCache(dataset)
        self.low_rpi = np.array([cache.advantage(g) for g in low])
        self.high_rpi = np.array([cache.advantage(g) for g in high])
        self.low_adv = _advantage_matrix(low, self.stats)
        self.high_adv = _advantage_matrix(high, self.stats)
        self.low_moments = column_moments(self.low_adv)
        self.n_bins = n_bins
        self.n_low, self.n_high = len(low), len(high)
        try:
            self.matcher = RpiMatcher(self.low_rpi, self.high_rpi, n_bins)
        except EmptyMatchError:
            self.matcher = None

    def iteration(self, rng):
        """(p, mean_diff) arrays over stats for one matching; None when the match is empty."""
        if self.matcher is None:
            return None
        idx = self.matcher.draw(rng)
        if idx.size < 2:
            return None
        _, p, diff = welch_columns(self.high_adv[idx], self.low_adv, self.low_moments)
        return p, diff

    def run(self, iterations: int, master_seed: int, alpha: float, threads: int = 1) -> list[SignedMeanP]:
        def one(i):
            return self.iteration(iteration_rng(master_seed, self.gender_division, i))

        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                results = list(ex.map(one, range(iterations)))
        else:
            results = [one(i) for i in range(iterations)]
        ok = [r for r in results if r is not None]
        skipped = iterations - len(ok)
        if skipped > MAX_SKIPPED_FRACTION * iterations:
            raise UnreliableResultError(
                f"{self.gender_division.label}: {skipped} of {iterations} matchings were empty"
            )
        P = np.array([r[0] for r in ok])
        D = np.array([r[1] for r in ok])
        out = []
        for k, stat in enumerate(self.stats):
            pk, dk = P[:, k], D[:, k]
            good = ~np.isnan(pk)
            if not good.any():
                continue
            mean_p = math.fsum(pk[good]) / good.sum()
            mean_d = math.fsum(dk[good]) / good.sum()
            improve = -mean_d if stat.lower_is_better else mean_d
            sign = -1 if improve < 0 else 1
            agree = float(np.mean(np.sign(-dk[good] if stat.lower_is_better else dk[good]) == sign))
            out.append(SignedMeanP(
                stat, self.gender_division, mean_p, sign, int(good.sum()), bool(mean_p < alpha), alpha,
                skipped + int((~good).sum()), mean_d, agree,
            ))
        return out


def _advantage_matrix(games, stats) -> np.ndarray:
    out = np.empty((len(games), len(stats)))
    for i, g in enumerate(games):
        for k, s in enumerate(stats):
            try:
                out[i, k] = home_advantage(g, s)
            except UndefinedValueError:
                out[i, k] = np.nan
    return out


def matched_attendance_test(
    dataset: Dataset,
    gender_division: GenderDivision,
    stat: Stat,
    iterations: int = ITERATIONS,
    rng: int = 0,
    alpha: float | None = None,
    n_bins: int = 25,
) -> SignedMeanP:
    """Mean Welch p-value over ``iterations`` matchings for one stat and gender-division.

    ``rng`` is the master seed; iteration ``i`` uses the stream given by
    :func:`iteration_rng`, so the result equals the matching cell of
    :func:`attendance_table` run with the same seed.
    """
    if alpha is None:
        alpha = bonferroni_alpha(len(Stat) * len(GD_ORDER))
    exp = AttendanceExperiment(dataset, gender_division, (stat,), n_bins)
    res = exp.run(iterations, rng, alpha)
    if not res:
        raise UndefinedValueError(f"{stat.value} undefined in every matched sample")
    return res[0]


@dataclass
class AttendanceTable:
    alpha: float
    family_alpha: float
    n_tests: int
    iterations: int
    seed: int
    stats: tuple[Stat, ...]
    gender_divisions: tuple[GenderDivision, ...]
    cutoffs: dict[GenderDivision, AttendanceCutoffs] = field(default_factory=dict)
    cells: dict[tuple[Stat, GenderDivision], SignedMeanP] = field(default_factory=dict)
    errors: dict[GenderDivision, str] = field(default_factory=dict)

    def overall(self, stat: Stat) -> float | None:
        vals = [self.cells[(stat, gd)].mean_abs_p for gd in self.gender_divisions if (stat, gd) in self.cells]
        return math.fsum(vals) / len(vals) if vals else None

    def significant(self) -> list[SignedMeanP]:
        return [c for c in self.cells.values() if c.significant]

    def ordered_stats(self) -> list[Stat]:
        return sorted(self.stats, key=lambda s: (self.overall(s) is None, self.overall(s) or 0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        gds = self.gender_divisions
        w.writerow(["row", "overall"] + [gd.code for gd in gds] + [f"{gd.code}_significant" for gd in gds])
        for name, attr in (("Low", "low_cutoff"), ("High", "high_cutoff")):
            vals = [getattr(self.cutoffs[gd], attr) for gd in gds if gd in self.cutoffs]
            overall = f"{math.fsum(vals) / len(vals):.6g}" if vals else ""
            w.writerow([name, overall] + [
                getattr(self.cutoffs[gd], attr) if gd in self.cutoffs else "" for gd in gds
            ] + [""] * len(gds))
        for stat in self.ordered_stats():
            cells = [self.cells.get((stat, gd)) for gd in gds]
            ov = self.overall(stat)
            w.writerow(
                [stat.value, _fmt_p(ov) if ov is not None else ""]
                + [_fmt_p(c.signed_p) if c else "" for c in cells]
                + [int(c.significant) if c else "" for c in cells]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "alpha": self.alpha,
            "family_alpha": self.family_alpha,
            "n_tests": self.n_tests,
            "iterations": self.iterations,
            "seed": self.seed,
            "cutoffs": {gd.code: {"low": c.low_cutoff, "high": c.high_cutoff} for gd, c in self.cutoffs.items()},
            "errors": {gd.code: e for gd, e in self.errors.items()},
            "cells": [
                {
                    "stat": c.stat.value,
                    "gender_division": c.gender_division.code,
                    "signed_mean_p": float(_fmt_p(c.signed_p)),
                    "significant": c.significant,
                    "iterations": c.iterations,
                    "skipped": c.skipped,
                    "mean_diff": float(f"{c.mean_diff:.6g}"),
                    "direction_agreement": float(f"{c.direction_agreement:.6g}"),
                }
                for s in self.ordered_stats()
                for gd in self.gender_divisions
                if (c := self.cells.get((s, gd))) is not None
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def _fmt_p(p: float) -> str:
    return f"{p:.2e}"


def attendance_table(
    dataset: Dataset,
    iterations: int = ITERATIONS,
    seed: int = 0,
    stats=tuple(Stat),
    gender_divisions=None,
    family_alpha: float = FAMILY_ALPHA,
    n_bins: int = 25,
    threads: int = 1,
) -> AttendanceTable:
    """Signed mean p-values for every stat x gender-division, Bonferroni-corrected."""
    gds = tuple(gender_divisions) if gender_divisions is not None else tuple(dataset.gender_divisions)
    stats = tuple(stats)
    n_tests = len(stats) * len(gds)
    alpha = bonferroni_alpha(n_tests, family_alpha)
    table = AttendanceTable(alpha, family_alpha, n_tests, iterations, seed, stats, gds)
    cache = RpiCache(dataset)
    for gd in gds:
        try:
            exp = AttendanceExperiment(dataset, gd, stats, n_bins, cache)
            table.cutoffs[gd] = exp.cutoffs
            for cell in exp.run(iterations, seed, alpha, threads):
                table.cells[(cell.stat, gd)] = cell
        except (EmptySelectionError, DegenerateError, UnreliableResultError) as exc:
            table.errors[gd] = str(exc)
    return table
