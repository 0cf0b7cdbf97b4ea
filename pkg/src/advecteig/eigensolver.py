"""Principal eigenpair of a symmetric OperatorHandle by shifted inverse iteration."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import kernels
from .grid import GridField
from .operators import OperatorHandle, rayleigh_quotient


class EigenSolverError(RuntimeError):
    pass


class ConvergenceError(EigenSolverError):
    """Iteration budget exhausted; ``partial`` holds the last iterate."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class IndefiniteSystemError(EigenSolverError):
    pass


@dataclass
class SolveStats:
    iterations: int = 0
    residual: float = np.inf
    inner_iterations: int = 0
    inner: str = ""
    floor_limited: bool = False


@dataclass(eq=False)
class EigenPair:
    value: float
    field: GridField
    stats: SolveStats = field(default_factory=SolveStats)


def _start_vector(grid) -> np.ndarray:
    return np.exp(-grid.radius**2)


class _DirectSolver:
    """Factorisation of ``A - sigma I`` (banded Cholesky in 1D, sparse LU otherwise)."""

    def __init__(self, op: OperatorHandle, sigma: float):
        self.shape = op.grid.shape
        if op.grid.dim == 1:
            try:
                self.cb = sla.cholesky_banded(op.banded_upper(sigma), lower=False)
            except np.linalg.LinAlgError as exc:
                raise IndefiniteSystemError("shifted operator is not positive definite") from exc
            self.lu = None
        else:
            self.cb = None
            self.lu = spla.splu(op.to_sparse(sigma))

    def __call__(self, b, tol):
        if self.cb is not None:
            return sla.cho_solve_banded((self.cb, False), b), 0
        return self.lu.solve(b.ravel()).reshape(self.shape), 0


class _CGSolver:
    def __init__(self, op: OperatorHandle, sigma: float, maxiter: int = 100000):
        self.op, self.sigma, self.maxiter = op, sigma, maxiter
        self.x = None

    def __call__(self, b, tol):
        op = self.op
        x, it, _, brk = kernels.pcg(b, op.W, op.eps, op.inv_h2, op.shift + self.sigma,
                                    x0=self.x, tol=tol, maxiter=self.maxiter)
        if brk:
            raise IndefiniteSystemError("CG breakdown: shifted operator is not positive definite")
        self.x = x
        return x, it


def principal_eigenpair(op: OperatorHandle, tol: float = 1e-10, max_iter: int = 500,
                        start: GridField | None = None, inner: str = "auto") -> EigenPair:
    """Smallest eigenpair with a positive, unit-L2 eigenfield.

    Inverse iteration on ``A - sigma I`` with ``sigma = min(W - shift) - 1``,
    which is positive definite because ``-Lap >= 0``.  Converged when the
    eigen-residual in the grid L2 norm, divided by ``|lambda|``, is below
    ``tol``; if ``tol`` lies under the round-off floor of the operator the
    iteration stops once the residual stalls there.

    ``inner`` selects the inner solver: ``"direct"`` (banded Cholesky in 1D,
    sparse LU otherwise), ``"cg"`` (Jacobi-PCG with tolerance tied to the
    outer residual) or ``"auto"`` (direct).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    grid = op.grid
    sigma = float(np.min(op.W - op.shift)) - 1.0
    kind = "direct" if inner == "auto" else inner
    if kind == "direct":
        solve = _DirectSolver(op, sigma)
    elif kind == "cg":
        solve = _CGSolver(op, sigma)
    else:
        raise ValueError(f"unknown inner solver {inner!r}")

    x = (_start_vector(grid) if start is None else np.array(start.values, dtype=float))
    x = x / np.sqrt(grid.weight * np.vdot(x, x))
    floor = 64.0 * np.finfo(float).eps * op.norm_bound()
    stats = SolveStats(inner=kind)
    history = []
    lam = np.nan
    for it in range(1, max_iter + 1):
        inner_tol = max(1e-2 * min(history[-1], 1.0), 1e-15) if history else 1e-4
        y, n_inner = solve(x, inner_tol)
        stats.inner_iterations += n_inner
        nrm = np.sqrt(grid.weight * np.vdot(y, y))
        if not np.isfinite(nrm) or nrm == 0.0:
            raise EigenSolverError("inverse iteration produced a degenerate iterate")
        x = y / nrm
        if x.sum() < 0:
            x = -x
        f = GridField(grid, x)
        ax = op.apply(f).values
        lam = grid.weight * np.vdot(x, ax)
        res = np.sqrt(grid.weight * np.vdot(ax - lam * x, ax - lam * x))
        scale = max(abs(lam), np.finfo(float).tiny)
        rel = res / scale
        history.append(rel)
        stats.iterations, stats.residual = it, rel
        if rel <= tol:
            break
        # round-off floor: accept once the residual stops improving there
        if res <= floor and len(history) >= 2 and rel > 0.5 * history[-2]:
            stats.floor_limited = True
            break
    else:
        raise ConvergenceError(
            f"inverse iteration did not reach tol={tol:g} in {max_iter} iterations "
            f"(residual {history[-1]:.3e})",
            EigenPair(lam, GridField(grid, x), stats),
        )
    field_ = GridField(grid, x)
    return EigenPair(rayleigh_quotient(op, field_), field_, stats)
