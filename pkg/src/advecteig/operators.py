"""Symmetric operators ``-eps Lap + (W - shift)`` in the four forms used here.

Forms
-----
schrodinger(alpha)
    Gauge-transformed problem in original coordinates,
    ``W = (alpha^2/eps)|grad m|^2 + alpha Lap m + V``.
rescaled(alpha)
    The same problem in ``y = alpha**(1/p) x`` divided by ``alpha**(2/p)``.
limit
    ``W = (p^2 c0^2/eps)|y|^(2p-2) + p c0 (N+p-2)|y|^(p-2)``.
limit_shifted
    The limit form minus its principal eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .grid import Grid, GridField, GridMismatchError, inner_product
from .model import Scenario

FORM_NAMES = ("schrodinger", "rescaled", "limit", "limit_shifted")


@dataclass(frozen=True)
class OperatorForm:
    name: str
    alpha: float | None = None

    def __post_init__(self):
        if self.name not in FORM_NAMES:
            raise ValueError(f"unknown operator form {self.name!r}")
        if self.name in ("schrodinger", "rescaled"):
            if self.alpha is None or not self.alpha > 0:
                raise ValueError(f"{self.name} form needs alpha > 0")

    @classmethod
    def schrodinger(cls, alpha):
        return cls("schrodinger", float(alpha))

    @classmethod
    def rescaled(cls, alpha):
        return cls("rescaled", float(alpha))

    @classmethod
    def limit(cls):
        return cls("limit")

    @classmethod
    def limit_shifted(cls):
        return cls("limit_shifted")


def potential_values(form: OperatorForm, s: Scenario, pts) -> np.ndarray:
    """Diagonal potential at points ``pts`` (trailing axis = dim), vectorised."""
    pts = np.asarray(pts, dtype=float)
    p, eps = s.p, s.epsilon
    r = np.linalg.norm(pts, axis=-1)
    if form.name in ("limit", "limit_shifted"):
        c0 = s.c0
        return (p * p * c0 * c0 / eps) * r ** (2 * p - 2) + p * c0 * (s.dim + p - 2) * r ** (p - 2)
    a = form.alpha
    if form.name == "schrodinger":
        G, D = s.radial_brackets(pts)
        return (a * a / eps) * r ** (2 * p - 2) * G + a * r ** (p - 2) * D + s.V(pts)
    # rescaled: pts are y, the coefficients are evaluated at x = alpha^(-1/p) y
    x = pts * a ** (-1.0 / p)
    G, D = s.radial_brackets(x)
    return r ** (2 * p - 2) * G / eps + r ** (p - 2) * D + a ** (-2.0 / p) * s.V(x)


def potential_value(form: OperatorForm, s: Scenario, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(potential_values(form, s, x[None, :])[0])


@dataclass(eq=False)
class OperatorHandle:
    """``apply(f) = -eps Lap f + (W - shift) f`` on the interior nodes of ``grid``."""

    grid: Grid
    W: np.ndarray
    eps: float
    shift: float = 0.0
    form: OperatorForm | None = None

    @cached_property
    def inv_h2(self) -> tuple[float, ...]:
        return tuple(1.0 / h**2 for h in self.grid.spacing)

    def apply(self, f: GridField) -> GridField:
        if not self.grid.same_as(f.grid):
            raise GridMismatchError("field does not live on the operator grid")
        return GridField(self.grid, kernels.apply(f.values, self.W, self.eps, self.inv_h2, self.shift))

    def __matmul__(self, f: GridField) -> GridField:
        return self.apply(f)

    def diagonal(self) -> np.ndarray:
        return self.W - self.shift + 2.0 * self.eps * sum(self.inv_h2)

    def norm_bound(self) -> float:
        """Gershgorin bound on the operator 2-norm."""
        return float(np.max(np.abs(self.W - self.shift)) + 4.0 * self.eps * sum(self.inv_h2))

    def with_shift(self, shift: float) -> "OperatorHandle":
        return OperatorHandle(self.grid, self.W, self.eps, float(shift), self.form)

    def with_potential(self, W) -> "OperatorHandle":
        return OperatorHandle(self.grid, np.asarray(W, dtype=float), self.eps, self.shift, self.form)

    def to_sparse(self, extra_shift: float = 0.0) -> sp.csc_matrix:
        """Sparse matrix of ``A - extra_shift I`` (C-order unknowns)."""
        mats = []
        n_all = self.grid.counts
        for ax, (n, c) in enumerate(zip(n_all, self.inv_h2)):
            t = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) * (self.eps * c)
            left = sp.identity(int(np.prod(n_all[:ax])))
            right = sp.identity(int(np.prod(n_all[ax + 1:])))
            mats.append(sp.kron(sp.kron(left, t), right))
        lap = mats[0]
        for m in mats[1:]:
            lap = lap + m
        diag = sp.diags((self.W - self.shift - extra_shift).ravel())
        return (lap + diag).tocsc()

    def banded_upper(self, extra_shift: float = 0.0) -> np.ndarray:
        """Upper banded storage (1D only) for ``scipy.linalg`` banded Cholesky."""
        if self.grid.dim != 1:
            raise ValueError("banded storage is one-dimensional")
        n = self.grid.counts[0]
        c = self.eps * self.inv_h2[0]
        ab = np.zeros((2, n))
        ab[0, 1:] = -c
        ab[1] = self.W - self.shift - extra_shift + 2.0 * c
        return ab


def assemble(form: OperatorForm, s: Scenario, grid: Grid, lambda_hat: float | None = None) -> OperatorHandle:
    if grid.dim != s.dim:
        raise GridMismatchError("grid dimension differs from the scenario")
    if form.name == "limit_shifted":
        if lambda_hat is None:
            raise ValueError("limit_shifted form needs the limiting eigenvalue lambda_hat")
        shift = float(lambda_hat)
    else:
        shift = 0.0
    W = potential_values(form, s, grid.points)
    if not np.all(np.isfinite(W)):
        raise ValueError("potential is not finite at every interior node")
    return OperatorHandle(grid, W, s.epsilon, shift, form)


def rayleigh_quotient(op: OperatorHandle, f: GridField) -> float:
    ff = inner_product(op.grid, f, f)
    if ff == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    return inner_product(op.grid, f, op.apply(f)) / ff


def _central_gradient(f: np.ndarray, spacing) -> list[np.ndarray]:
    padded = np.pad(f, 1)
    grads = []
    for ax, h in enumerate(spacing):
        hi = [slice(1, -1)] * f.ndim
        lo = [slice(1, -1)] * f.ndim
        hi[ax] = slice(2, None)
        lo[ax] = slice(0, -2)
        grads.append((padded[tuple(hi)] - padded[tuple(lo)]) / (2.0 * h))
    return grads


def gauge_residual(s: Scenario, alpha: float, eigpair, grid: Grid, lam: float | None = None) -> float:
    """Residual of the advection equation for ``phi = exp(-alpha m / eps) u``.

    ``eigpair`` is a principal eigenpair of the schrodinger form on ``grid``.
    The max-norm of ``-eps Lap phi - 2 alpha grad m . grad phi + (V - lam) phi``
    is returned relative to ``max |phi|``.  ``lam`` overrides the eigenvalue.
    """
    u = eigpair.field
    if not grid.same_as(u.grid):
        raise GridMismatchError("eigenfunction does not live on this grid")
    lam = eigpair.value if lam is None else lam
    pts = grid.points
    r = grid.radius
    p, eps = s.p, s.epsilon
    m = s.g.value(r) * r**p
    phi = np.exp(-alpha * m / eps) * u.values
    grad_m = ((p * s.g.value(r) + s.g.x_dot_grad(r)) * r ** (p - 2))[..., None] * pts
    lap_phi = -kernels.apply(phi, np.zeros(grid.shape), 1.0, tuple(1 / h**2 for h in grid.spacing), 0.0)
    grads = _central_gradient(phi, grid.spacing)
    adv = sum(grad_m[..., i] * gi for i, gi in enumerate(grads))
    res = -eps * lap_phi - 2.0 * alpha * adv + (s.V(pts) - lam) * phi
    return float(np.max(np.abs(res)) / np.max(np.abs(phi)))


def smooth_cutoff(r, r0: float) -> np.ndarray:
    """C-infinity cutoff: 1 for r <= r0/2, 0 for r >= r0, built from exp(-1/t)."""
    t = (np.asarray(r, dtype=float) - 0.5 * r0) / (0.5 * r0)
    t = np.clip(t, 0.0, 1.0)

    def bump(v):
        with np.errstate(divide="ignore"):
            return np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)

    a, b = bump(t), bump(1.0 - t)
    return b / (a + b)


def trial_upper_bound(s: Scenario, alpha: float, limit, cutoff: bool = True) -> float:
    """Rayleigh quotient of the cut-off, rescaled limiting profile.

    Evaluated in rescaled coordinates on the limiting grid and mapped back by
    the factor ``alpha**(2/p)`` (change of variables); by the variational
    principle it bounds the principal eigenvalue from above.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    grid = limit.u_hat.grid
    op = assemble(OperatorForm.rescaled(alpha), s, grid)
    trial = limit.u_hat.values.copy()
    if cutoff:
        x_radius = grid.radius * alpha ** (-1.0 / s.p)
        trial = trial * smooth_cutoff(x_radius, s.domain.inscribed_radius)
    if not np.any(trial):
        raise ValueError("cutoff removes the whole trial function")
    return alpha ** (2.0 / s.p) * rayleigh_quotient(op, GridField(grid, trial))
