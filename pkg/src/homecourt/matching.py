"""Attendance quartiles, binned RPI' matching and the two-sample KS test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .errors import DegenerateError, EmptyMatchError, EmptySelectionError
from .model import Dataset, GameRecord, GenderDivision

N_BINS = 25
KS_ALPHA = 0.05


@dataclass(frozen=True)
class AttendanceCutoffs:
    gender_division: GenderDivision | None
    low_cutoff: int
    high_cutoff: int
    n_games: int


def nearest_rank(sorted_values, pct: float):
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    n = len(sorted_values)
    if n == 0:
        raise EmptySelectionError("percentile of an empty collection")
    rank = max(1, math.ceil(pct / 100.0 * n - 1e-9))
    return sorted_values[rank - 1]


def home_away_games(dataset: Dataset, gender_division: GenderDivision | None) -> list[GameRecord]:
    games = dataset.by_gender_division(gender_division) if gender_division is not None else list(dataset)
    return [g for g in games if not g.is_neutral]


def attendance_cutoffs(dataset: Dataset, gender_division: GenderDivision | None) -> AttendanceCutoffs:
    games = home_away_games(dataset, gender_division)
    if not games:
        raise EmptySelectionError(f"no home/away games for {gender_division}")
    att = sorted(g.attendance for g in games)
    return AttendanceCutoffs(gender_division, nearest_rank(att, 25), nearest_rank(att, 75), len(att))


def partition_by_attendance(
    dataset: Dataset, gender_division: GenderDivision | None, cutoffs: AttendanceCutoffs
) -> tuple[list[GameRecord], list[GameRecord]]:
    """Low (attendance <= low cutoff) and high (>= high cutoff) home/away games."""
    games = home_away_games(dataset, gender_division)
    low = [g for g in games if g.attendance <= cutoffs.low_cutoff]
    high = [g for g in games if g.attendance >= cutoffs.high_cutoff]
    if cutoffs.low_cutoff >= cutoffs.high_cutoff and low:
        both = {g.game_id for g in low} & {g.game_id for g in high}
        if len(both) > 0.5 * len(low):
            raise DegenerateError(
                f"{len(both)} of {len(low)} low-attendance games are also high-attendance games"
            )
    return low, high


@dataclass(frozen=True)
class MatchedPair:
    """Indices into the low / high inputs; ``high_matched`` are drawn with replacement."""

    low: np.ndarray
    high_matched: np.ndarray
    bin_edges: np.ndarray
    low_counts: np.ndarray  # n_i
    matched_counts: np.ndarray  # |H_i|
    matched_bins: np.ndarray  # source bin of every matched draw
    seed: int | None = None
    gender_division: GenderDivision | None = None


class RpiMatcher:
    """Precomputed binning of low/high RPI' values; each :meth:`draw` is one matching."""

    def __init__(self, low_values, high_values, n_bins: int = N_BINS):
        low = np.asarray(low_values, dtype=float)
        high = np.asarray(high_values, dtype=float)
        if low.size == 0 or high.size == 0:
            raise EmptySelectionError("matching needs non-empty low and high samples")
        if n_bins < 1:
            raise ValueError("n_bins must be positive")
        lo, hi = float(low.min()), float(low.max())
        self.low_values, self.high_values = low, high
        if lo == hi:
            self.edges = np.array([lo, hi])
            low_bin = np.zeros(low.size, dtype=np.int64)
            high_bin = np.where(high == lo, 0, -1)
        else:
            self.edges = np.linspace(lo, hi, n_bins + 1)
            low_bin = self.assign(low)
            high_bin = self.assign(high)
        nb = len(self.edges) - 1
        self.low_counts = np.bincount(low_bin, minlength=nb)
        self.pools = [np.flatnonzero(high_bin == i) for i in range(nb)]
        self.low_bin, self.high_bin = low_bin, high_bin
        self.matched_counts = np.array(
            [self.low_counts[i] if self.pools[i].size else 0 for i in range(nb)], dtype=np.int64
        )
        if self.matched_counts.sum() == 0:
            raise EmptyMatchError("no high-attendance game falls in any occupied low-attendance bin")

    def assign(self, x):
        """Bin index per value: left-closed bins, the last one closed; -1 outside the range."""
        edges = self.edges
        nb = len(edges) - 1
        idx = np.searchsorted(edges, x, side="right") - 1
        idx = np.where(x == edges[-1], nb - 1, idx)
        return np.where((x < edges[0]) | (x > edges[-1]), -1, idx)

    def draw(self, rng) -> np.ndarray:
        parts = []
        for pool, n in zip(self.pools, self.matched_counts):
            if n:
                parts.append(pool[rng.integers(0, pool.size, size=n)])
        return np.concatenate(parts)

    def match(self, rng, seed=None, gender_division=None) -> MatchedPair:
        idx = self.draw(rng)
        return MatchedPair(
            low=np.arange(self.low_values.size),
            high_matched=idx,
            bin_edges=self.edges,
            low_counts=self.low_counts,
            matched_counts=self.matched_counts,
            matched_bins=self.high_bin[idx],
            seed=seed,
            gender_division=gender_division,
        )


def as_generator(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), rng


def match_rpi(low_values, high_values, n_bins: int = N_BINS, rng=None, gender_division=None) -> MatchedPair:
    """Resample high-attendance games so their RPI' histogram matches the low games'.

    ``rng`` is a :class:`numpy.random.Generator` or an integer seed.
    """
    gen, seed = as_generator(rng)
    return RpiMatcher(low_values, high_values, n_bins).match(gen, seed, gender_division)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int

    def significant(self, alpha: float = KS_ALPHA) -> bool:
        return self.p_value < alpha


def ks_two_sample(a, b) -> KsResult:
    """Two-sample KS with the asymptotic Kolmogorov p-value at n1*n2/(n1+n2)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptySelectionError("KS test needs two non-empty samples")
    d = kernels.ks_statistic(a, b)
    en = a.size * b.size / (a.size + b.size)
    p = float(special.kolmogorov(math.sqrt(en) * d))
    return KsResult(d, min(1.0, max(0.0, p)), int(a.size), int(b.size))


def diagnose(low_values, high_values, n_bins: int = N_BINS, rng=None) -> dict:
    """Bins, per-bin counts, KS before/after and the three distributions."""
    pair = match_rpi(low_values, high_values, n_bins, rng)
    low = np.asarray(low_values, dtype=float)
    high = np.asarray(high_values, dtype=float)
    matched = high[pair.high_matched]
    pre, post = ks_two_sample(low, high), ks_two_sample(low, matched)
    return {
        "bins": [float(e) for e in pair.bin_edges],
        "low_counts": [int(c) for c in pair.low_counts],
        "matched_counts": [int(c) for c in pair.matched_counts],
        "ks_pre": _ks_dict(pre),
        "ks_post": _ks_dict(post),
        "distributions": {
            "low": _describe(low),
            "high": _describe(high),
            "matched_high": _describe(matched),
        },
        "values": {"low": low.tolist(), "high": high.tolist(), "matched_high": matched.tolist()},
    }


def _ks_dict(r: KsResult) -> dict:
    return {"statistic": r.statistic, "p_value": r.p_value, "n1": r.n1, "n2": r.n2}


def _describe(x) -> dict:
    return {"n": int(x.size), "mean": float(np.mean(x)), "sd": float(np.std(x, ddof=1)) if x.size > 1 else 0.0}
