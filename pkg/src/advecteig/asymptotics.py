"""Alpha sweeps against the refined expansions, drift, and log-log rate fits."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .corrections import CorrectionSet, ExpansionCoeffs, expansion_coefficients, solve_corrections
from .eigensolver import SolveStats, principal_eigenpair
from .grid import Grid, GridField, GridMismatchError, build_grid, inner_product
from .limiting import LimitSolution, solve_limit, truncation_radius
from .model import Scenario
from .operators import OperatorForm, assemble, trial_upper_bound


@dataclass(frozen=True)
class GridParams:
    node_count: int = 511
    radius: float | None = None
    tol: float = 1e-14
    inner: str = "auto"
    tail_tol: float = 1e-10


@dataclass(eq=False)
class AlphaSolution:
    """Principal eigenpair at one alpha, solved in rescaled coordinates.

    ``lam_gap`` is ``lam - alpha**(2/p) * lambda_hat`` evaluated with the
    two-sided quotient ``<w, (W_alpha - W_lim) u_hat> / <w, u_hat>``, which
    is exact for exact eigenvectors and keeps full relative accuracy where
    the plain difference of two large eigenvalues would cancel.
    """

    alpha: float
    lam: float
    field: GridField
    lam_gap: float
    stats: SolveStats
    on_limit_grid: bool

    def __iter__(self):
        # (lambda, w_tilde) unpacking
        return iter((self.lam, self.field))


def alpha_ladder(alpha_min: float, alpha_max: float, points_per_decade: int) -> list[float]:
    """Geometric ladder with exact powers of ten at decade boundaries."""
    if not (alpha_min > 0 and alpha_max > 0) or points_per_decade < 1:
        raise ValueError("alpha bounds must be positive and points_per_decade >= 1")
    lo = math.log10(alpha_min) * points_per_decade
    hi = math.log10(alpha_max) * points_per_decade
    k0, k1 = math.ceil(lo - 1e-9), math.floor(hi + 1e-9)
    return [10.0 ** (k / points_per_decade) for k in range(k0, k1 + 1)]


def _rescaled_grid(s: Scenario, alpha: float, R: float, n: int) -> tuple[Grid, bool]:
    scaled = [alpha ** (1.0 / s.p) * a for a in s.domain.half_widths]
    if all(R <= L for L in scaled):
        return build_grid(s.dim, R, n), True
    return build_grid(s.dim, [min(R, L) for L in scaled], n), False


def compute_lambda(s: Scenario, alpha: float, params: GridParams = GridParams(),
                   limit: LimitSolution | None = None) -> AlphaSolution:
    """lambda(alpha) and the rescaled eigenfunction w_tilde on the truncation box.

    When the box does not fit inside ``alpha**(1/p) * Omega`` it is
    intersected with it; the solution then lives on its own grid and the gap
    falls back to the plain difference.
    """
    if limit is not None:
        R = limit.radius
        n = limit.grid.counts[0]
    else:
        R = params.radius if params.radius is not None else truncation_radius(s, params.tail_tol)
        n = params.node_count
    grid, fits = _rescaled_grid(s, alpha, R, n)
    if limit is not None and fits:
        grid = limit.grid
    op = assemble(OperatorForm.rescaled(alpha), s, grid)
    start = limit.u_hat if (limit is not None and fits) else None
    eig = principal_eigenpair(op, tol=params.tol, inner=params.inner, start=start)
    scale = alpha ** (2.0 / s.p)
    lam = scale * eig.value
    if limit is not None and fits:
        w, u = eig.field.values, limit.u_hat.values
        lim_op = assemble(OperatorForm.limit(), s, grid)
        dW = op.W - lim_op.W
        gap = scale * float(np.vdot(w, dW * u) / np.vdot(w, u))
    elif limit is not None:
        gap = lam - scale * limit.lambda_hat
    else:
        gap = math.nan
    return AlphaSolution(alpha, lam, eig.field, gap, eig.stats, fits and limit is not None)


def predicted_lambda(coeffs: ExpansionCoeffs, alpha: float, order: int) -> float:
    """Truncated expansion of lambda(alpha) through ``order`` (0, 1 or 2)."""
    return alpha ** (2.0 / coeffs.p) * coeffs.lambda_hat + predicted_gap(coeffs, alpha, order)


def predicted_gap(coeffs: ExpansionCoeffs, alpha: float, order: int) -> float:
    """Expansion terms beyond alpha**(2/p) * lambda_hat."""
    top = max_order(coeffs.mode)
    if order < 0 or order > top:
        raise ValueError(f"order {order} not available in {coeffs.mode} mode (max {top})")
    p = coeffs.p
    val = 0.0
    if coeffs.mode == "smooth_refined":
        if order >= 1:
            val += coeffs.v0
        if order >= 2:
            val += alpha ** (-2.0 / p) * coeffs.c2
    elif coeffs.mode == "homogeneous_refined":
        q = coeffs.q_hat
        if order >= 1:
            val += alpha ** (-q / p) * coeffs.m0
        if order >= 2:
            val += alpha ** (-(2 * q + 2) / p) * coeffs.m1
    return val


def max_order(mode: str) -> int:
    return 0 if mode == "leading" else 2


def expansion_field(limit: LimitSolution, corrections: CorrectionSet | None, coeffs: ExpansionCoeffs,
                    alpha: float, order: int) -> GridField:
    top = max_order(coeffs.mode)
    if order < 0 or order > top:
        raise ValueError(f"order {order} not available in {coeffs.mode} mode (max {top})")
    p = coeffs.p
    approx = limit.u_hat.copy()
    if coeffs.mode == "smooth_refined":
        if order >= 1:
            approx = approx + alpha ** (-3.0 / p) * corrections[1]
        if order >= 2:
            approx = approx + alpha ** (-4.0 / p) * corrections[2]
    elif coeffs.mode == "homogeneous_refined":
        q = coeffs.q_hat
        if order >= 1:
            approx = approx + alpha ** (-(q + 2) / p) * corrections[3]
        if order >= 2:
            top_term = corrections[4] - 0.5 * coeffs.psi3_sq * limit.u_hat
            approx = approx + alpha ** (-(2 * q + 4) / p) * top_term
    return approx


def eigenfunction_residual(w: GridField, limit: LimitSolution, corrections: CorrectionSet | None,
                           alpha: float, order: int, coeffs: ExpansionCoeffs | None = None,
                           norm: str = "sup") -> float:
    if not w.grid.same_as(limit.grid):
        raise GridMismatchError("w_tilde and the corrections live on different grids")
    if coeffs is None:
        coeffs = expansion_coefficients(limit.scenario, limit, corrections) if corrections else \
            ExpansionCoeffs("leading", limit.scenario.p, limit.lambda_hat)
    diff = w - expansion_field(limit, corrections, coeffs, alpha, order)
    if norm == "sup":
        return diff.sup()
    return math.sqrt(inner_product(w.grid, diff, diff))


class DriftError(RuntimeError):
    pass


def max_point_drift(w: GridField, alpha: float | None = None) -> float:
    """|argmax w_tilde| in rescaled coordinates, refined by a 3-point parabola per axis.

    In rescaled coordinates this already equals ``alpha**(1/p) |x_alpha|``;
    ``alpha`` is accepted for symmetry with the other diagnostics.
    """
    g = w.grid
    v = w.values
    idx = np.unravel_index(int(np.argmax(v)), v.shape)
    loc = []
    for ax, (i, n, h) in enumerate(zip(idx, g.counts, g.spacing)):
        if i == 0 or i == n - 1:
            raise DriftError("maximum sits on the truncation boundary")
        sl = list(idx)
        sl[ax] = i - 1
        fm = v[tuple(sl)]
        sl[ax] = i + 1
        fp = v[tuple(sl)]
        f0 = v[idx]
        den = fm - 2 * f0 + fp
        off = 0.5 * (fm - fp) / den * h if den < 0 else 0.0
        loc.append(g.axes[ax][i] + off)
    return float(np.linalg.norm(loc))


@dataclass
class RateReport:
    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    n_points: int

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "window": list(self.window), "n_points": self.n_points}


def fit_rate(pairs, window: tuple[float, float] | None = None) -> RateReport:
    """Least-squares slope of log(value) against log(alpha)."""
    pairs = [(float(a), float(v)) for a, v in pairs
             if window is None or window[0] * (1 - 1e-12) <= a <= window[1] * (1 + 1e-12)]
    if len(pairs) < 4:
        raise ValueError(f"rate fit needs at least 4 points, got {len(pairs)}")
    a = np.array([p[0] for p in pairs])
    v = np.array([p[1] for p in pairs])
    if np.any(~(v > 0)):
        raise ValueError("rate fit needs strictly positive values")
    res = stats.linregress(np.log(a), np.log(v))
    return RateReport(float(res.slope), float(res.intercept), float(res.stderr),
                      (float(a.min()), float(a.max())), len(a))


@dataclass
class SweepRow:
    alpha: float
    lam: float
    lam_gap: float
    lam_pred: list[float]
    lam_err: list[float]
    eig_res: list[float]
    eig_res_l2: list[float]
    drift: float
    upper_bound: float
    iterations: int
    residual: float


@dataclass(eq=False)
class SweepTable:
    scenario: Scenario
    rows: list[SweepRow] = field(default_factory=list)
    limit: LimitSolution | None = None
    corrections: CorrectionSet | None = None
    coeffs: ExpansionCoeffs | None = None

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r.alpha for r in self.rows])

    def column(self, name: str, k: int | None = None) -> np.ndarray:
        vals = [getattr(r, name) if k is None else getattr(r, name)[k] for r in self.rows]
        return np.array(vals, dtype=float)


def default_window(alphas) -> tuple[float, float] | None:
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size == 0:
        return None
    top = float(alphas.max())
    return (top / 10.0, top)


def _row(s, alpha, params, limit, corrections, coeffs) -> SweepRow:
    sol = compute_lambda(s, alpha, params, limit)
    K = max_order(coeffs.mode)
    scale = alpha ** (2.0 / s.p)
    preds, errs, res, res2 = [], [], [], []
    for k in range(K + 1):
        g_k = predicted_gap(coeffs, alpha, k)
        preds.append(scale * coeffs.lambda_hat + g_k)
        errs.append(abs(sol.lam_gap - g_k))
        if sol.on_limit_grid:
            res.append(eigenfunction_residual(sol.field, limit, corrections, alpha, k, coeffs))
            res2.append(eigenfunction_residual(sol.field, limit, corrections, alpha, k, coeffs, norm="l2"))
        else:
            res.append(math.nan)
            res2.append(math.nan)
    try:
        drift = max_point_drift(sol.field, alpha)
    except DriftError:
        drift = math.nan
    ub = trial_upper_bound(s, alpha, limit)
    return SweepRow(alpha, sol.lam, sol.lam_gap, preds, errs, res, res2, drift, ub,
                    sol.stats.iterations, float(sol.stats.residual))


def prepare(s: Scenario, params: GridParams = GridParams()):
    """Limit solution, corrections and coefficients shared by every alpha."""
    limit = solve_limit(s, params.node_count, params.radius, params.tail_tol, tol=params.tol,
                        inner=params.inner)
    corrections = solve_corrections(limit) if s.mode != "leading" else None
    coeffs = expansion_coefficients(s, limit, corrections)
    return limit, corrections, coeffs


def sweep(s: Scenario, alphas, params: GridParams = GridParams(), threads: int = 1,
          prepared=None) -> SweepTable:
    alphas = [float(a) for a in alphas]
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha list must be strictly increasing")
    limit, corrections, coeffs = prepared or prepare(s, params)
    table = SweepTable(s, [], limit, corrections, coeffs)
    if not alphas:
        return table
    work = lambda a: _row(s, a, params, limit, corrections, coeffs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table.rows = list(pool.map(work, alphas))
    else:
        table.rows = [work(a) for a in alphas]
    return table


def error_columns(table: SweepTable) -> dict[str, np.ndarray]:
    """Named positive quantities whose decay rates are reported."""
    cols = {}
    if not table.rows:
        return cols
    K = len(table.rows[0].lam_err) - 1
    for k in range(K + 1):
        cols[f"lambda_err_{k}"] = table.column("lam_err", k)
        cols[f"eigres_{k}"] = table.column("eig_res", k)
    return cols


def rate_reports(alphas, columns: dict[str, np.ndarray], window=None) -> dict[str, RateReport | None]:
    """Fit every column over ``window`` (default: top decade); None when unavailable."""
    alphas = np.asarray(alphas, dtype=float)
    window = window or default_window(alphas)
    out = {}
    for name, vals in columns.items():
        pairs = [(a, v) for a, v in zip(alphas, vals) if np.isfinite(v) and v > 0]
        try:
            out[name] = fit_rate(pairs, window)
        except ValueError:
            out[name] = None
    return out


def refinement_check(s: Scenario, alpha: float, params: GridParams = GridParams(),
                     max_node_count: int = 4095) -> dict:
    """Halve h until the gap changes by < 1% of the smallest expansion term.

    Returns the node count reached, the last relative change and whether the
    target was achieved within ``max_node_count``.
    """
    n = params.node_count
    prev = None
    rel = math.inf
    while True:
        p_n = GridParams(n, params.radius, params.tol, params.inner, params.tail_tol)
        limit, corr, co = prepare(s, p_n)
        gap = compute_lambda(s, alpha, p_n, limit).lam_gap
        K = max_order(co.mode)
        smallest = abs(predicted_gap(co, alpha, K) - predicted_gap(co, alpha, K - 1)) if K else \
            abs(alpha ** (2.0 / s.p) * co.lambda_hat)
        if prev is not None:
            rel = abs(gap - prev) / smallest if smallest > 0 else math.inf
            if rel < 0.01:
                return {"node_count": n, "relative_change": rel, "achieved": True}
        if 2 * n + 1 > max_node_count:
            return {"node_count": n, "relative_change": rel, "achieved": False}
        prev = gap
        n = 2 * n + 1
