"""The limiting problem on a decay-truncated box and moments of its ground state."""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .eigensolver import EigenPair, principal_eigenpair
from .grid import Grid, GridField, GridMismatchError, build_grid, inner_product
from .model import MultiIndex, Scenario
from .operators import OperatorForm, OperatorHandle, assemble

RADIUS_LADDER = (6.0, 8.0, 12.0, 16.0, 24.0)


class TruncationError(RuntimeError):
    pass


def _limit_potential_radial(s: Scenario, r):
    p, c0, eps = s.p, s.c0, s.epsilon
    r = np.asarray(r, dtype=float)
    return (p * p * c0 * c0 / eps) * r ** (2 * p - 2) + p * c0 * (s.dim + p - 2) * r ** (p - 2)


def gaussian_trial_bound(s: Scenario) -> float:
    """Rayleigh quotient of exp(-c0 |x|^2 / eps) for the limit form (radial quadrature)."""
    a = s.c0 / s.epsilon
    n = s.dim
    u = lambda r: math.exp(-a * r * r)
    du = lambda r: -2 * a * r * math.exp(-a * r * r)
    num = integrate.quad(
        lambda r: (s.epsilon * du(r) ** 2 + float(_limit_potential_radial(s, r)) * u(r) ** 2) * r ** (n - 1),
        0, np.inf)[0]
    den = integrate.quad(lambda r: u(r) ** 2 * r ** (n - 1), 0, np.inf)[0]
    return num / den


def decay_bound(s: Scenario, R: float, lam_bar: float | None = None) -> float:
    """exp(-int_{R/2}^{R} sqrt(max(W(r) - lam_bar, 1) / eps) dr)."""
    lam_bar = gaussian_trial_bound(s) if lam_bar is None else lam_bar
    f = lambda r: math.sqrt(max(float(_limit_potential_radial(s, r)) - lam_bar, 1.0) / s.epsilon)
    val = integrate.quad(f, 0.5 * R, R, limit=200)[0]
    return math.exp(-val)


def truncation_radius(s: Scenario, tail_tol: float = 1e-10) -> float:
    if not 0 < tail_tol < 1:
        raise ValueError("tail_tol must lie in (0, 1)")
    lam_bar = gaussian_trial_bound(s)
    for R in RADIUS_LADDER:
        if decay_bound(s, R, lam_bar) <= tail_tol:
            return R
    raise TruncationError(f"no radius in {RADIUS_LADDER} meets tail_tol={tail_tol:g}")


@dataclass(eq=False)
class LimitSolution:
    scenario: Scenario
    lambda_hat: float
    u_hat: GridField
    radius: float
    eig: EigenPair | None = None
    checks: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def grid(self) -> Grid:
        return self.u_hat.grid

    def shifted_operator(self) -> OperatorHandle:
        """Discrete version of L = limit form - lambda_hat (shift = computed lambda_hat)."""
        return assemble(OperatorForm.limit_shifted(), self.scenario, self.grid, self.lambda_hat)

    def moment(self, key, field: GridField | None = None) -> float:
        return moment(self, key, field)


def _check_invariants(sol: LimitSolution) -> dict:
    u = sol.u_hat.values
    g = sol.grid
    checks = {}
    checks["lambda_hat_positive"] = bool(sol.lambda_hat > 0)
    checks["u_hat_positive"] = bool(np.min(u) > 0)
    checks["unit_norm"] = bool(abs(inner_product(g, sol.u_hat, sol.u_hat) - 1) <= 1e-12)
    # boundary layer: outermost 5% of the half-width on any axis
    layer = np.zeros(g.shape, dtype=bool)
    for ax, L in enumerate(g.extents):
        layer |= np.abs(g.points[..., ax]) >= 0.95 * L
    checks["tail_small"] = bool(np.max(u[layer]) <= 1e-8 * np.max(u))
    # radial monotonicity along every coordinate axis through the origin and the diagonal
    mono = True
    centre = tuple((n - 1) // 2 for n in g.counts)
    for ax in range(g.dim):
        idx = list(centre)
        idx[ax] = slice(None)
        line = u[tuple(idx)]
        c = centre[ax]
        mono &= bool(np.all(np.diff(line[c:]) <= 1e-14 * u.max()))
        mono &= bool(np.all(np.diff(line[: c + 1]) >= -1e-14 * u.max()))
    if g.dim == 2 and g.counts[0] == g.counts[1]:
        d = np.diagonal(u)
        c = centre[0]
        mono &= bool(np.all(np.diff(d[c:]) <= 1e-14 * u.max()))
    checks["radially_monotone"] = mono
    # weakened decay check: u(boundary layer) / u(R/2) <= exp(-R/4)
    half = np.abs(g.radius - 0.5 * sol.radius)
    u_half = u.ravel()[np.argmin(half)]
    checks["super_exponential_tail"] = bool(np.max(u[layer]) / u_half <= math.exp(-sol.radius / 4))
    return checks


def solve_limit(s: Scenario, node_count=511, radius: float | None = None, tail_tol: float = 1e-10,
                tol: float = 1e-13, inner: str = "auto") -> LimitSolution:
    """Principal eigenpair of the limit form on [-R, R]^N."""
    R = truncation_radius(s, tail_tol) if radius is None else float(radius)
    grid = build_grid(s.dim, R, node_count)
    op = assemble(OperatorForm.limit(), s, grid)
    eig = principal_eigenpair(op, tol=tol, inner=inner)
    sol = LimitSolution(s, eig.value, eig.field, R, eig)
    sol.checks = _check_invariants(sol)
    return sol


def moment(limit: LimitSolution, key, field: GridField | None = None) -> float:
    """Quadrature moments of u_hat.

    ``key`` is a multi-index (x^sigma u_hat^2), ``"h_hat"`` (h u_hat^2) or
    ``"h_hat_pair"`` (h u_hat * field).  Multi-index and h_hat values are cached.
    """
    g = limit.grid
    u = limit.u_hat.values
    if key == "h_hat_pair":
        if field is None:
            raise ValueError("h_hat_pair needs a field")
        if not g.same_as(field.grid):
            raise GridMismatchError("paired field is not on the limiting grid")
        return g.weight * float(np.sum(limit.scenario.V(g.points) * u * field.values))
    if key == "h_hat":
        if limit.scenario.v.kind != "homogeneous":
            raise ValueError("h_hat moment needs a homogeneous V")
        ck = "h_hat"
        integrand = lambda: limit.scenario.V(g.points) * u * u
    else:
        mi = key if isinstance(key, MultiIndex) else MultiIndex(tuple(key))
        if len(mi) != g.dim:
            raise ValueError("multi-index length differs from the grid dimension")
        ck = ("x", mi.sigma)
        integrand = lambda: mi(g.points) * u * u
    with limit._lock:
        if ck not in limit._cache:
            limit._cache[ck] = g.weight * float(np.sum(integrand()))
        return limit._cache[ck]
