"""LASSO Poisson regressions of team-line counts on home, division, strength and pace.

The objective for one statistic is

    mean_i( exp(b0 + x_i'b) - y_i (b0 + x_i'b) ) + lam * sum_j |b_j|

with the intercept unpenalized. It is minimised by proximal Newton steps: each
outer iteration forms the weighted Gram matrix of the Poisson quadratic
approximation and solves the L1 subproblem by coordinate descent on that Gram
matrix, followed by a backtracking step that never increases the objective.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError, DivergenceError, EmptySelectionError, UnsupportedStatError
from .model import GD_ORDER, Dataset, Location, Stat, game_possessions, stat_value
from .rpi import RpiCache, standardize

# Table 4 columns
ELIGIBLE_STATS = (
    Stat.BLK, Stat.AST, Stat.TOV, Stat.STL, Stat.DREB, Stat.OREB, Stat.THREE_FGA, Stat.FGA,
)

HOME = "home"
RPI_ADV = "rpi_adv"
POSSESSIONS = "possessions"
FEATURES = (
    (HOME,)
    + tuple(f"home:{gd.code}" for gd in GD_ORDER)
    + tuple(f"gd:{gd.code}" for gd in GD_ORDER)
    + (RPI_ADV, POSSESSIONS)
)

N_FOLDS = 100
N_LAMBDAS = 100
LAMBDA_MIN_RATIO = 1e-4
TOL = 1e-8
MAX_ITER = 10_000
DIVERGENCE_BOUND = 30.0


@dataclass(frozen=True)
class Design:
    """Two rows per home/away game: one per team line."""

    stat: Stat
    season: str | None
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    rpi_mean: float
    rpi_sd: float
    possessions_mean: float
    possessions_sd: float
    raw_rpi_adv: np.ndarray = field(repr=False)

    @property
    def n_rows(self) -> int:
        return len(self.y)


def check_eligible(stat: Stat) -> None:
    if stat.is_percentage:
        raise UnsupportedStatError(f"{stat.value}: no models for percentage statistics")
    if stat in (Stat.PF, Stat.FTA):
        raise UnsupportedStatError(f"{stat.value}: referee-driven statistics are excluded")
    if stat not in ELIGIBLE_STATS:
        raise UnsupportedStatError(f"{stat.value} is not modelled")


def build_design(dataset: Dataset, season: str | None, stat: Stat, rpi_cache: RpiCache | None = None) -> Design:
    check_eligible(stat)
    games = [g for g in (dataset.by_season(season) if season is not None else dataset) if not g.is_neutral]
    if not games:
        raise EmptySelectionError(f"no home/away games in season {season!r}")
    cache = rpi_cache or RpiCache(dataset)
    p = len(FEATURES)
    X = np.zeros((2 * len(games), p))
    y = np.empty(2 * len(games), dtype=np.int64)
    rpi_adv = np.empty(2 * len(games))
    poss = np.empty(2 * len(games))
    for i, g in enumerate(games):
        table = cache.table(g.season, g.gender_division)
        gd_k = GD_ORDER.index(g.gender_division)
        pace = game_possessions(g)
        (a, la), (b, lb) = g.lines
        for r, (line, loc, opp) in enumerate(((a, la, b), (b, lb, a))):
            row = 2 * i + r
            y[row] = stat_value(line, stat)
            rpi_adv[row] = table.rpi(line.team_id) - table.rpi(opp.team_id)
            poss[row] = pace
            X[row, 7 + gd_k] = 1.0
            if loc is Location.HOME:
                X[row, 0] = 1.0
                X[row, 1 + gd_k] = 1.0
    z_rpi, rm, rs = standardize(rpi_adv)
    z_poss, pm, ps = standardize(poss)
    X[:, 13] = z_rpi
    X[:, 14] = z_poss
    return Design(stat, season, X, y, FEATURES, rm, rs, pm, ps, rpi_adv)


# --------------------------------------------------------------------------
# solver


@dataclass
class LassoFit:
    intercept: float
    coef: np.ndarray
    lam: float
    n_iter: int
    objective_trace: list[float]
    kkt_residual: float
    converged: bool = True


def objective(X, y, intercept, coef, lam) -> float:
    eta = intercept + X @ coef
    return float(np.mean(np.exp(eta) - y * eta) + lam * np.sum(np.abs(coef)))


def score(X, y, intercept, coef) -> np.ndarray:
    """Gradient of the smooth part, w.r.t. (intercept, coef)."""
    eta = intercept + X @ coef
    r = np.exp(eta) - y
    return np.concatenate([[r.mean()], X.T @ r / len(y)])


def lambda_max(X, y) -> float:
    """Smallest penalty at which every penalized coefficient is zero."""
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(X.T @ (y - y.mean()))) / len(y))


def kkt_residual(X, y, intercept, coef, lam) -> float:
    g = score(X, y, intercept, coef)
    res = abs(g[0])
    gp = g[1:]
    zero = coef == 0
    if zero.any():
        res = max(res, float(np.max(np.maximum(np.abs(gp[zero]) - lam, 0.0))))
    if (~zero).any():
        res = max(res, float(np.max(np.abs(gp[~zero] + lam * np.sign(coef[~zero])))))
    return res


class _Problem:
    """Design with an intercept column, prepared for the selected kernel backend."""

    def __init__(self, X, y, backend=None):
        X = np.asarray(X, dtype=float)
        self.X = X
        self.y = np.asarray(y, dtype=float)
        self.n, self.p = X.shape
        if self.n == 0:
            raise EmptySelectionError("no rows to fit")
        if np.any(self.y < 0):
            raise ValueError("counts must be non-negative")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        self.ybar = self.y.mean()
        if self.ybar <= 0:
            raise DivergenceError("all counts are zero: intercept diverges to -inf")
        self.backend = backend
        self.ops = kernels.design_ops(np.column_stack([np.ones(self.n), X]), backend)
        self.null_lambda = lambda_max(X, self.y) if self.p else 0.0

    def fit(self, lam, tol=TOL, max_iter=MAX_ITER, start=None, inner_tol=1e-13) -> LassoFit:
        n, p, y = self.n, self.p, self.y
        ops = self.ops
        if p and lam >= self.null_lambda:
            # analytic optimum: every penalized coefficient is zero, intercept = ln(mean y)
            intercept, coef = math.log(self.ybar), np.zeros(p)
            F = objective(self.X, y, intercept, coef, lam)
            return LassoFit(intercept, coef, float(lam), 0, [F], self.kkt(intercept, coef, lam), True)
        theta = np.zeros(p + 1)
        if start is None:
            theta[0] = math.log(self.ybar)
        else:
            theta[:] = start
        pen = np.full(p + 1, float(lam))
        pen[0] = 0.0
        eta = ops.dot(theta)
        mu = np.exp(eta)

        def full_obj(th, et, m):
            return float(np.sum(m - y * et) / n + lam * np.sum(np.abs(th[1:])))

        def decrease(th, m, cand, m_c, ed_t):
            # objective change as a sum of differences: stays resolvable when the total is not
            smooth = (np.sum(m_c - m) - np.dot(y, ed_t)) / n
            return float(smooth + lam * (np.sum(np.abs(cand[1:])) - np.sum(np.abs(th[1:]))))

        F = full_obj(theta, eta, mu)
        trace = [F]
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            g = ops.rdot(mu - y) / n
            H = ops.gram(mu) / n
            new = self._newton_step(H, g - H @ theta, theta, pen, inner_tol)
            d = new - theta
            step_size = float(np.max(np.abs(d)))
            if step_size == 0.0:
                converged = True
                break
            ed = ops.dot(d)
            t = 1.0
            accepted = False
            for _ in range(60):
                cand = theta + t * d
                eta_c = eta + t * ed
                mu_c = np.exp(eta_c)
                dF = decrease(theta, mu, cand, mu_c, t * ed)
                if dF <= 0.0:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                # no decrease representable in floating point: at the optimum
                converged = True
                break
            if np.max(np.abs(cand[1:])) > DIVERGENCE_BOUND:
                raise DivergenceError(
                    f"coefficients exceed {DIVERGENCE_BOUND} (separation?)", coef=cand,
                    kkt_residual=self.kkt(cand[0], cand[1:], lam, mu_c),
                )
            theta, eta, mu = cand, eta_c, mu_c
            F = F + dF
            trace.append(F)
            if t * step_size < tol:
                converged = True
                break
        intercept, coef = float(theta[0]), theta[1:].copy()
        kkt = self.kkt(intercept, coef, lam, mu)
        if not converged:
            raise ConvergenceError(
                f"no convergence after {max_iter} iterations (KKT residual {kkt:.3g})",
                coef=theta, kkt_residual=kkt,
            )
        return LassoFit(intercept, coef, float(lam), it, trace, kkt, converged)

    def _newton_step(self, H, c, theta, pen, inner_tol):
        """Minimise the quadratic model 0.5 t'Ht + c't + pen|t| with the intercept eliminated.

        The unpenalized intercept is solved for exactly, leaving coordinate
        descent on the Schur complement; this is weighted centering and keeps
        descent fast when the intercept and a feature are nearly collinear.
        """
        h00, h = H[0, 0], H[0, 1:]
        S = H[1:, 1:] - np.outer(h, h) / h00
        cs = c[1:] - h * (c[0] / h00)
        flat = np.diag(S) <= 1e-14 * np.diag(H)[1:]  # constant features: nothing left to identify
        S[flat, :] = 0.0
        S[:, flat] = 0.0
        coef = theta[1:].copy()
        kernels.cd_quadratic(S, cs, coef, pen[1:], inner_tol, backend=self.backend)
        return np.concatenate([[-(c[0] + h @ coef) / h00], coef])

    def kkt(self, intercept, coef, lam, mu=None):
        if mu is None:
            mu = np.exp(self.ops.dot(np.concatenate([[intercept], coef])))
        g = self.ops.rdot(mu - self.y) / self.n
        res = abs(g[0])
        gp = g[1:]
        zero = coef == 0
        if zero.any():
            res = max(res, float(np.max(np.maximum(np.abs(gp[zero]) - lam, 0.0))))
        if (~zero).any():
            res = max(res, float(np.max(np.abs(gp[~zero] + lam * np.sign(coef[~zero])))))
        return res

    def lambda_max(self) -> float:
        g = self.ops.rdot(self.y - self.ybar) / self.n
        return float(np.max(np.abs(g[1:]))) if self.p else 0.0


def fit_lasso_poisson(X, y, lam: float, tolerance: float = TOL, max_iterations: int = MAX_ITER,
                      start=None, backend: str | None = None) -> LassoFit:
    """L1-penalized Poisson regression with an unpenalized intercept.

    ``start`` optionally warm-starts from ``[intercept, *coef]``.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return _Problem(X, y, backend).fit(lam, tolerance, max_iterations, start)


def lambda_path(X, y, n: int = N_LAMBDAS, min_ratio: float = LAMBDA_MIN_RATIO) -> np.ndarray:
    """Log-spaced, strictly decreasing penalties starting at ``lambda_max``."""
    lmax = lambda_max(X, y)
    if lmax <= 0:
        raise EmptySelectionError("degenerate design: lambda_max is zero")
    if n == 1:
        return np.array([lmax])
    return np.exp(np.linspace(math.log(lmax), math.log(lmax * min_ratio), n))


def fit_path(X, y, lambdas, tolerance: float = TOL, backend: str | None = None) -> list[LassoFit]:
    prob = _Problem(X, y, backend)
    fits, start = [], None
    for lam in lambdas:
        f = prob.fit(lam, tolerance, start=start)
        fits.append(f)
        start = np.concatenate([[f.intercept], f.coef])
    return fits


def poisson_deviance(y, mu) -> float:
    """Mean unit Poisson deviance."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(np.mean(2.0 * (term - (y - mu))))


@dataclass
class CvResult:
    lambdas: np.ndarray
    mean_deviance: np.ndarray
    se_deviance: np.ndarray
    best_lambda: float
    lambda_1se: float
    n_folds: int
    fold_ids: np.ndarray = field(repr=False)

    @property
    def best_index(self) -> int:
        return int(np.flatnonzero(self.lambdas == self.best_lambda)[0])


def assign_folds(n_rows: int, n_folds: int, rng) -> np.ndarray:
    if n_folds > n_rows:
        raise ValueError(f"{n_folds} folds for {n_rows} rows")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    ids = np.empty(n_rows, dtype=np.int64)
    ids[gen.permutation(n_rows)] = np.arange(n_rows) % n_folds
    return ids


def cross_validate_lambda(
    X, y, n_folds: int = N_FOLDS, path=None, rng=0, folds=None, tolerance: float = TOL,
    threads: int = 1, backend: str | None = None,
) -> CvResult:
    """K-fold CV of mean held-out Poisson deviance along a penalty path.

    ``folds`` overrides the random fold assignment (an id per row). The best
    penalty is the deviance minimiser; ``lambda_1se`` is the largest penalty
    within one standard error of it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lambdas = lambda_path(X, y) if path is None else np.asarray(path, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("penalty path must be strictly decreasing")
    if folds is None:
        folds = assign_folds(len(y), n_folds, rng)
    else:
        folds = np.asarray(folds)
    ks = np.unique(folds)
    if len(ks) != n_folds or np.any(np.bincount(folds.astype(np.int64), minlength=n_folds) == 0):
        raise ValueError("every fold must contain at least one row")

    def run_fold(k):
        test = folds == k
        fits = fit_path(X[~test], y[~test], lambdas, tolerance, backend)
        Xt, yt = X[test], y[test]
        return [poisson_deviance(yt, np.exp(f.intercept + Xt @ f.coef)) for f in fits]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            dev = np.array(list(ex.map(run_fold, range(n_folds))))
    else:
        dev = np.array([run_fold(k) for k in range(n_folds)])
    mean = dev.mean(axis=0)
    se = dev.std(axis=0, ddof=1) / math.sqrt(n_folds) if n_folds > 1 else np.zeros(len(lambdas))
    best = int(np.argmin(mean))
    within = np.flatnonzero(mean <= mean[best] + se[best])
    return CvResult(lambdas, mean, se, float(lambdas[best]), float(lambdas[within.min()]), n_folds, folds)


# --------------------------------------------------------------------------
# per-stat fits and the report table


@dataclass
class GlmFit:
    stat: Stat
    season: str | None
    intercept: float
    coefficients: dict[str, float]
    lam: float
    cv_folds: int
    lambdas: list[float]
    deviance_path: list[float]
    kkt_residual: float
    n_rows: int
    possessions_sd: float
    lambda_rule: str = "min"

    @property
    def percent_impacts(self) -> dict[str, float | None]:
        return percent_impact(self)

    def selected(self) -> list[str]:
        return [k for k, v in self.coefficients.items() if v != 0.0]


def percent_impact(fit: GlmFit) -> dict[str, float | None]:
    """100 (e^b - 1) per feature, None for unselected ones.

    The possessions coefficient is per standard deviation of game possessions;
    its impact is converted to a per-possession effect.
    """
    out = {}
    for name, b in fit.coefficients.items():
        if b == 0.0:
            out[name] = None
            continue
        if name == POSSESSIONS:
            b = b / fit.possessions_sd
        out[name] = 100.0 * math.expm1(b)
    return out


def report_impacts(fit: GlmFit) -> dict[str, float | None]:
    """Impacts in the improvement direction (TOV negated)."""
    raw = percent_impact(fit)
    if fit.stat.lower_is_better:
        return {k: (-v if v is not None else None) for k, v in raw.items()}
    return raw


def fit_stat(
    dataset: Dataset, season: str | None, stat: Stat, n_folds: int = N_FOLDS, n_lambdas: int = N_LAMBDAS,
    seed: int = 0, rule: str = "min", threads: int = 1, rpi_cache: RpiCache | None = None,
    backend: str | None = None,
) -> GlmFit:
    design = build_design(dataset, season, stat, rpi_cache)
    X, y = design.X, design.y.astype(float)
    path = lambda_path(X, y, n_lambdas)
    cv = cross_validate_lambda(X, y, n_folds, path, seed, threads=threads, backend=backend)
    lam = cv.best_lambda if rule == "min" else cv.lambda_1se
    stop = int(np.flatnonzero(path == lam)[0])
    final = fit_path(X, y, path[: stop + 1], backend=backend)[-1]
    return GlmFit(
        stat, season, final.intercept, dict(zip(design.feature_names, map(float, final.coef))),
        lam, n_folds, [float(v) for v in path], [float(v) for v in cv.mean_deviance],
        final.kkt_residual, design.n_rows, design.possessions_sd, rule,
    )


@dataclass
class GlmTable:
    season: str | None
    fits: list[GlmFit]
    errors: dict[Stat, str] = field(default_factory=dict)

    ROWS = (
        ("Home", "Overall", HOME),
        *(("Home", gd.label, f"home:{gd.code}") for gd in GD_ORDER),
        *(("Division", gd.label, f"gd:{gd.code}") for gd in GD_ORDER),
        ("", "RPI'", RPI_ADV),
        ("", "Possessions", POSSESSIONS),
    )

    def columns(self) -> list[Stat]:
        return [f.stat for f in self.fits]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "factor"] + [s.value for s in self.columns()])
        impacts = [report_impacts(f) for f in self.fits]
        for group, label, key in self.ROWS:
            w.writerow([group, label] + [f"{imp[key]:.6g}" if imp[key] is not None else "" for imp in impacts])
        return buf.getvalue()

    def to_json(self) -> str:
        impacts = [report_impacts(f) for f in self.fits]
        rows = []
        for group, label, key in self.ROWS:
            rows.append({
                "group": group, "factor": label,
                **{f.stat.value: (float(f"{imp[key]:.6g}") if imp[key] is not None else None)
                   for f, imp in zip(self.fits, impacts)},
            })
        return json.dumps({"season": self.season, "columns": [s.value for s in self.columns()], "rows": rows},
                          indent=2) + "\n"

    def sidecar(self) -> str:
        doc = {
            "season": self.season,
            "fits": [
                {
                    "stat": f.stat.value,
                    "lambda": f.lam,
                    "lambda_rule": f.lambda_rule,
                    "cv_folds": f.cv_folds,
                    "lambdas": f.lambdas,
                    "cv_deviance": f.deviance_path,
                    "kkt_residual": f.kkt_residual,
                    "intercept": f.intercept,
                    "coefficients": f.coefficients,
                    "n_rows": f.n_rows,
                }
                for f in self.fits
            ],
            "errors": {s.value: e for s, e in self.errors.items()},
        }
        return json.dumps(doc, indent=2) + "\n"


def fit_all(
    dataset: Dataset, season: str | None, n_folds: int = N_FOLDS, n_lambdas: int = N_LAMBDAS, seed: int = 0,
    rule: str = "min", threads: int = 1, stats=ELIGIBLE_STATS, backend: str | None = None,
) -> GlmTable:
    """One fit per eligible statistic, columns sorted by overall home impact (improvement direction)."""
    cache = RpiCache(dataset)
    fits, errors = [], {}
    for stat in stats:
        try:
            fits.append(fit_stat(dataset, season, stat, n_folds, n_lambdas, seed, rule, threads, cache, backend))
        except (ConvergenceError, EmptySelectionError, UnsupportedStatError, ValueError) as exc:
            errors[stat] = str(exc)
    fits.sort(key=lambda f: -(report_impacts(f)[HOME] or 0.0))
    return GlmTable(season, fits, errors)
