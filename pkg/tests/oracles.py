"""Independent reference implementations used only by the tests.

None of these import the code under test.
"""
import itertools
from collections import Counter
from fractions import Fraction

import mpmath
import numpy as np

# ------------------------------------------------------------------ RPI


def rpi_fraction(results, exclude_reference=True):
    """Exact RPI per team from (winner, loser) pairs, spelled out game by game."""
    teams = sorted({t for pair in results for t in pair})
    out = {}

    def record(team, ignoring=None):
        w = g = 0
        for winner, loser in results:
            if team not in (winner, loser):
                continue
            if ignoring is not None and ignoring in (winner, loser):
                continue
            g += 1
            w += winner == team
        return w, g

    def opponents(team):
        return [loser if winner == team else winner for winner, loser in results if team in (winner, loser)]

    def owp(team):
        vals = []
        for opp in opponents(team):
            w, g = record(opp, team if exclude_reference else None)
            vals.append(Fraction(w, g) if g else Fraction(1, 2))
        return sum(vals) / len(vals)

    owps = {t: owp(t) for t in teams}
    for t in teams:
        w, g = record(t)
        opps = opponents(t)
        oowp = sum(owps[o] for o in opps) / len(opps)
        wp = Fraction(w, g)
        out[t] = (wp, owps[t], oowp, wp / 4 + owps[t] / 2 + oowp / 4)
    return out


def rpi_matrix(C):
    """Vectorised RPI for a batch of win-count matrices ``C[b, i, j]`` (wins of i over j).

    Returns (B, T) arrays wp, owp, oowp, rpi with NaN for teams without games.
    """
    C = np.asarray(C, dtype=float)
    G = C + np.swapaxes(C, 1, 2)
    W = C.sum(axis=2)
    P = G.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        wp = W / P
        # opponent o's record with games against t removed: index [b, t, o]
        num = W[:, None, :] - np.swapaxes(C, 1, 2)
        den = P[:, None, :] - G
        wpx = np.where(den > 0, num / np.where(den > 0, den, 1), 0.5)
        owp = (G * wpx).sum(axis=2) / P
        oowp = (G * np.nan_to_num(owp)[:, None, :]).sum(axis=2) / P
    return wp, owp, oowp, 0.25 * wp + 0.5 * owp + 0.25 * oowp


def league_orbit_representatives(n_teams=4, max_games=12):
    """Win-count matrices of every league up to ``max_games`` games, one or more per relabelling orbit.

    A league is a multiset of ordered (winner, loser) pairs. Relabelling teams
    permutes RPI values, so only leagues whose teams appear in non-increasing
    (games played, wins) order are kept; every orbit contains at least one.
    """
    pairs = [(i, j) for i in range(n_teams) for j in range(n_teams) if i != j]
    mats = []
    for k in range(1, max_games + 1):
        combos = np.array(list(itertools.combinations_with_replacement(range(len(pairs)), k)), dtype=np.int8)
        counts = np.zeros((len(combos), len(pairs)), dtype=np.int8)
        rows = np.repeat(np.arange(len(combos)), k)
        np.add.at(counts, (rows, combos.ravel()), 1)
        C = np.zeros((len(combos), n_teams, n_teams), dtype=np.int8)
        for p, (i, j) in enumerate(pairs):
            C[:, i, j] = counts[:, p]
        wins = C.sum(axis=2).astype(np.int64)
        played = wins + C.sum(axis=1)
        key = played * 64 + wins
        keep = np.all(key[:, :-1] >= key[:, 1:], axis=1)
        mats.append(C[keep])
    return np.concatenate(mats)


def results_from_matrix(C, names="abcdefgh"):
    return [(names[i], names[j]) for i, j in zip(*np.nonzero(C)) for _ in range(int(C[i, j]))]


# ------------------------------------------------------------------- KS


def ks_brute(a, b):
    """max |F_a - F_b| over every sample point, ECDFs by direct counting."""
    a, b = list(a), list(b)
    best = 0.0
    for x in a + b:
        fa = sum(v <= x for v in a) / len(a)
        fb = sum(v <= x for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


def kolmogorov_sf(x, terms=200):
    """P(K > x) for the Kolmogorov distribution, alternating series in 50-digit precision."""
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        if x <= 0:
            return 1.0
        if x < mpmath.mpf("0.2"):
            # the alternating series converges slowly here; use the theta-function form of the CDF
            cdf = mpmath.sqrt(2 * mpmath.pi) / x * mpmath.nsum(
                lambda k: mpmath.exp(-((2 * k - 1) ** 2) * mpmath.pi ** 2 / (8 * x ** 2)), [1, mpmath.inf])
            return float(1 - cdf)
        s = mpmath.nsum(lambda k: (-1) ** (k - 1) * mpmath.exp(-2 * k ** 2 * x ** 2), [1, mpmath.inf])
        return float(2 * s)


# ---------------------------------------------------------------- Welch


def welch_mp(a, b, dps=50):
    """Welch t, dof and two-sided p in high precision (p via the regularised incomplete beta)."""
    with mpmath.workdps(dps):
        a = [mpmath.mpf(float(v)) for v in a]
        b = [mpmath.mpf(float(v)) for v in b]
        n1, n2 = len(a), len(b)
        m1, m2 = mpmath.fsum(a) / n1, mpmath.fsum(b) / n2
        v1 = mpmath.fsum((x - m1) ** 2 for x in a) / (n1 - 1)
        v2 = mpmath.fsum((x - m2) ** 2 for x in b) / (n2 - 1)
        s1, s2 = v1 / n1, v2 / n2
        t = (m1 - m2) / mpmath.sqrt(s1 + s2)
        dof = (s1 + s2) ** 2 / (s1 ** 2 / (n1 - 1) + s2 ** 2 / (n2 - 1))
        p = mpmath.betainc(dof / 2, mpmath.mpf(1) / 2, 0, dof / (dof + t ** 2), regularized=True)
        return float(t), float(dof), float(p)


# ------------------------------------------------------------------ GLM


def irls_poisson(X, y, iters=100):
    """Unpenalised Poisson regression with intercept by Newton / IRLS on the normal equations."""
    Z = np.column_stack([np.ones(len(y)), X])
    beta = np.zeros(Z.shape[1])
    beta[0] = np.log(np.mean(y))
    for _ in range(iters):
        mu = np.exp(Z @ beta)
        step = np.linalg.solve(Z.T @ (mu[:, None] * Z), Z.T @ (y - mu))
        beta += step
        if np.max(np.abs(step)) < 1e-14:
            break
    return beta[0], beta[1:]


def poisson_objective(X, y, b0, b, lam):
    eta = b0 + X @ b
    return float(np.mean(np.exp(eta) - y * eta) + lam * np.sum(np.abs(b)))


def result_counter(results):
    return Counter(results)
