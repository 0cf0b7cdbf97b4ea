"""Correction fields from the Fredholm-constrained limiting problem.

Every correction solves ``L psi = F`` with ``<psi, u_hat> = 0`` where
``L = limit form - lambda_hat``.  ``L`` is positive semidefinite with kernel
spanned by ``u_hat``, so a CG deflated against ``u_hat`` solves it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .grid import GridField, GridMismatchError, inner_product, norm
from .limiting import LimitSolution, moment


class FredholmError(ValueError):
    """Right-hand side is not orthogonal to the kernel of L."""


class StagnationError(RuntimeError):
    pass


@dataclass(eq=False)
class CorrectionSet:
    which: tuple[int, ...]
    fields: dict[int, GridField]
    rhs: dict[int, GridField]
    fredholm_defects: dict[int, float]
    residuals: dict[int, float] = field(default_factory=dict)

    def __getitem__(self, i) -> GridField:
        return self.fields[i]


@dataclass
class ExpansionCoeffs:
    mode: str
    p: float
    lambda_hat: float
    # smooth_refined
    v0: float = 0.0
    c2: float = 0.0
    # homogeneous_refined
    q_hat: float | None = None
    m0: float = 0.0
    m1: float = 0.0
    psi3_sq: float = 0.0
    exponents: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"mode": self.mode, "p": self.p, "lambda_hat": self.lambda_hat}
        if self.mode == "smooth_refined":
            out.update(v0=self.v0, c2=self.c2)
        elif self.mode == "homogeneous_refined":
            out.update(q_hat=self.q_hat, m0=self.m0, m1=self.m1, psi3_sq=self.psi3_sq)
        out["exponents"] = {k: str(v) for k, v in self.exponents.items()}
        return out


def _required(mode: str) -> tuple[int, ...]:
    return {"smooth_refined": (1, 2), "homogeneous_refined": (3, 4)}.get(mode, ())


def build_rhs(i: int, limit: LimitSolution, scenario=None, psi3: GridField | None = None) -> GridField:
    s = scenario or limit.scenario
    g = limit.grid
    u = limit.u_hat.values
    pts = g.points
    if i in (1, 2):
        if s.v.kind != "smooth":
            raise ValueError(f"F_{i} needs a smooth V (smooth_refined mode)")
        if i == 1:
            grad = s.v.gradient_at_origin(s.dim)
            return GridField(g, -(pts @ grad) * u)
        vals = np.zeros(g.shape)
        for mi, coef in s.v.second_order_terms(s.dim):
            vals += coef * (-mi(pts) + moment(limit, mi))
        return GridField(g, vals * u)
    if i in (3, 4):
        if s.v.kind != "homogeneous":
            raise ValueError(f"F_{i} needs a homogeneous V (homogeneous_refined mode)")
        h = s.V(pts)
        m0 = moment(limit, "h_hat")
        if i == 3:
            return GridField(g, -h * u + m0 * u)
        if psi3 is None:
            raise ValueError("F_4 needs psi_3 solved first")
        m1 = moment(limit, "h_hat_pair", psi3)
        return GridField(g, -h * psi3.values + m1 * u + m0 * psi3.values)
    raise ValueError(f"no right-hand side with index {i}")


def solve_constrained(limit: LimitSolution, F: GridField, tol: float = 1e-11,
                      fredholm_tol: float = 1e-8, x0: GridField | None = None,
                      maxiter: int | None = None) -> GridField:
    """Unique psi with L psi = F and <psi, u_hat> = 0."""
    g = limit.grid
    if not g.same_as(F.grid):
        raise GridMismatchError("right-hand side is not on the limiting grid")
    u = limit.u_hat
    fn = norm(F)
    if fn == 0.0:
        return g.zeros()
    defect = inner_product(g, F, u)
    if abs(defect) > fredholm_tol * fn:
        raise FredholmError(f"<F, u_hat> = {defect:.3e} exceeds {fredholm_tol:g} * ||F||")
    z = u.values / np.linalg.norm(u.values)
    op = limit.shifted_operator()
    b = F.values - np.vdot(z, F.values) * z
    maxiter = maxiter or 20 * g.size
    x, it, rel, brk = kernels.pcg(b, op.W, op.eps, op.inv_h2, op.shift,
                                  x0=None if x0 is None else x0.values, z=z, tol=tol, maxiter=maxiter)
    if brk:
        raise StagnationError("deflated CG broke down (operator not semidefinite on u_hat's complement)")
    if rel > tol:
        raise StagnationError(f"deflated CG stalled at relative residual {rel:.3e} after {it} iterations")
    x = x - np.vdot(z, x) * z
    return GridField(g, x)


def correction_residual(limit: LimitSolution, psi: GridField, F: GridField) -> float:
    """||L psi - F_perp|| / ||F_perp|| in the grid L2 norm."""
    u = limit.u_hat
    fp = F - inner_product(limit.grid, F, u) * u
    r = limit.shifted_operator().apply(psi) - fp
    den = norm(fp)
    return norm(r) / den if den > 0 else norm(r)


def solve_corrections(limit: LimitSolution, which=None, tol: float = 1e-11) -> CorrectionSet:
    s = limit.scenario
    which = tuple(which) if which is not None else _required(s.mode)
    fields, rhs, defects, res = {}, {}, {}, {}
    for i in sorted(which):
        F = build_rhs(i, limit, s, psi3=fields.get(3))
        psi = solve_constrained(limit, F, tol=tol)
        fields[i], rhs[i] = psi, F
        defects[i] = abs(inner_product(limit.grid, F, limit.u_hat))
        res[i] = correction_residual(limit, psi, F)
    return CorrectionSet(tuple(sorted(which)), fields, rhs, defects, res)


def expansion_coefficients(scenario, limit: LimitSolution, corrections: CorrectionSet | None = None) -> ExpansionCoeffs:
    s = scenario
    p = Fraction(s.p).limit_denominator(10**6)
    co = ExpansionCoeffs(mode=s.mode, p=s.p, lambda_hat=limit.lambda_hat)
    # powers of alpha multiplying each term
    co.exponents["lambda_0"] = Fraction(2) / p
    if s.mode == "smooth_refined":
        if corrections is None or not {1, 2} <= set(corrections.fields):
            raise ValueError("smooth_refined coefficients need psi_1 and psi_2")
        co.v0 = s.v.value_at_origin()
        co.c2 = sum(c * moment(limit, mi) for mi, c in s.v.second_order_terms(s.dim))
        co.exponents.update(lambda_1=Fraction(0), lambda_2=Fraction(-2) / p,
                            psi_1=Fraction(-3) / p, psi_2=Fraction(-4) / p)
    elif s.mode == "homogeneous_refined":
        if corrections is None or not {3, 4} <= set(corrections.fields):
            raise ValueError("homogeneous_refined coefficients need psi_3 and psi_4")
        q = Fraction(s.v.q_hat).limit_denominator(10**6)
        co.q_hat = s.v.q_hat
        co.m0 = moment(limit, "h_hat")
        co.m1 = moment(limit, "h_hat_pair", corrections[3])
        co.psi3_sq = inner_product(limit.grid, corrections[3], corrections[3])
        co.exponents.update(lambda_1=-q / p, lambda_2=-(2 * q + 2) / p,
                            psi_3=-(q + 2) / p, psi_4=-(2 * q + 4) / p)
    return co
