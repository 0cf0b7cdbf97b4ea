"""Scenario data for the large-advection eigenvalue problem.

The advection potential is ``m(x) = g(x) |x|**p`` with the radial family
``g(x) = c0 + beta |x|**s``; the zeroth-order potential ``V`` is either a
polynomial (exact Taylor data at the origin) or an anisotropic homogeneous
power ``c_h (x^T Q x)**(q_hat/2)``.

Points are arrays whose last axis has length ``dim``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MODES = ("leading", "smooth_refined", "homogeneous_refined")


@dataclass(frozen=True)
class MultiIndex:
    sigma: tuple[int, ...]

    def __post_init__(self):
        if any(int(k) != k or k < 0 for k in self.sigma):
            raise ValueError(f"multi-index entries must be nonnegative integers: {self.sigma}")
        object.__setattr__(self, "sigma", tuple(int(k) for k in self.sigma))

    @property
    def order(self) -> int:
        return sum(self.sigma)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(k) for k in self.sigma)

    def __len__(self):
        return len(self.sigma)

    def __call__(self, x):
        """Evaluate the monomial x**sigma at points ``x`` (last axis = dim)."""
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for i, k in enumerate(self.sigma):
            if k:
                out = out * x[..., i] ** k
        return out


@dataclass(frozen=True)
class GSpec:
    """g(x) = c0 + beta |x|**s."""

    c0: float
    beta: float = 0.0
    s: float = 8.0

    @property
    def l_exponent(self) -> float:
        # |grad g| <= C |x|**(s-1) near the origin
        return self.s - 1.0

    def value(self, r):
        return self.c0 + self.beta * np.asarray(r, dtype=float) ** self.s

    def x_dot_grad(self, r):
        """x . grad g as a function of r = |x|."""
        return self.beta * self.s * np.asarray(r, dtype=float) ** self.s

    def r2_grad_sq(self, r):
        """|x|**2 |grad g|**2."""
        return (self.beta * self.s) ** 2 * np.asarray(r, dtype=float) ** (2 * self.s)

    def r2_lap(self, r, dim):
        """|x|**2 * Laplacian(g)."""
        return self.beta * self.s * (self.s + dim - 2) * np.asarray(r, dtype=float) ** self.s

    def lap(self, r, dim):
        return self.beta * self.s * (self.s + dim - 2) * np.asarray(r, dtype=float) ** (self.s - 2)


@dataclass(frozen=True)
class SmoothV:
    """Polynomial V(x) = sum_k coef_k x**sigma_k."""

    monomials: tuple[tuple[MultiIndex, float], ...] = ()

    kind = "smooth"

    @classmethod
    def from_terms(cls, terms, dim=None):
        mons = []
        for sigma, coef in terms:
            mi = sigma if isinstance(sigma, MultiIndex) else MultiIndex(tuple(sigma))
            if dim is not None and len(mi) != dim:
                raise ValueError(f"multi-index {mi.sigma} does not match dim {dim}")
            mons.append((mi, float(coef)))
        return cls(tuple(mons))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for mi, coef in self.monomials:
            out = out + coef * mi(x)
        return out

    def _coef(self, sigma):
        return sum(c for mi, c in self.monomials if mi.sigma == tuple(sigma))

    def value_at_origin(self) -> float:
        return sum(c for mi, c in self.monomials if mi.order == 0)

    def gradient_at_origin(self, dim) -> np.ndarray:
        grad = np.zeros(dim)
        for mi, c in self.monomials:
            if mi.order == 1:
                grad[mi.sigma.index(1)] += c
        return grad

    def second_order_terms(self, dim) -> list[tuple[MultiIndex, float]]:
        """Pairs (sigma, D^sigma V(0) / sigma!) for |sigma| = 2.

        For a polynomial this ratio is just the monomial coefficient.
        """
        acc: dict[tuple[int, ...], float] = {}
        for mi, c in self.monomials:
            if mi.order == 2:
                acc[mi.sigma] = acc.get(mi.sigma, 0.0) + c
        return [(MultiIndex(s), c) for s, c in sorted(acc.items())]

    def derivative_at_origin(self, sigma) -> float:
        mi = MultiIndex(tuple(sigma))
        return mi.factorial * self._coef(mi.sigma)


@dataclass(frozen=True)
class HomogeneousV:
    """h(x) = c_h (x^T Q x)**(q_hat / 2), homogeneous of degree q_hat."""

    c_h: float
    q_hat: float
    Q: tuple[tuple[float, ...], ...]

    kind = "homogeneous"

    @property
    def matrix(self) -> np.ndarray:
        Q = np.array(self.Q, dtype=float)
        if Q.ndim == 1:
            # flat row-major entries
            k = int(round(np.sqrt(Q.size)))
            Q = Q.reshape(k, k) if k * k == Q.size else Q.reshape(1, -1)
        return Q

    def value(self, x):
        x = np.asarray(x, dtype=float)
        quad = np.einsum("...i,ij,...j->...", x, self.matrix, x)
        return self.c_h * np.maximum(quad, 0.0) ** (0.5 * self.q_hat)

    def value_at_origin(self) -> float:
        return 0.0


@dataclass(frozen=True)
class DomainSpec:
    half_widths: tuple[float, ...]

    @property
    def inscribed_radius(self) -> float:
        return min(self.half_widths)


@dataclass(frozen=True)
class Scenario:
    dim: int
    epsilon: float
    p: float
    g: GSpec
    v: SmoothV | HomogeneousV = field(default_factory=SmoothV)
    domain: DomainSpec | None = None
    mode: str = "leading"

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", DomainSpec((2.0,) * self.dim))

    @property
    def c0(self) -> float:
        return self.g.c0

    def radial_brackets(self, x):
        """Return (G, D) with |grad m|^2 = G |x|^(2p-2) and Lap m = D |x|^(p-2).

        G = p^2 g^2 + 2p g (x.grad g) + |x|^2 |grad g|^2
        D = |x|^2 Lap g + 2p (x.grad g) + p (N+p-2) g
        """
        p, n = self.p, self.dim
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        g = self.g.value(r)
        xg = self.g.x_dot_grad(r)
        G = p * p * g * g + 2 * p * g * xg + self.g.r2_grad_sq(r)
        D = self.g.r2_lap(r, n) + 2 * p * xg + p * (n + p - 2) * g
        return G, D

    def V(self, x):
        return self.v.value(x)


def eval_coefficients(s: Scenario, x) -> dict:
    """Closed-form m, grad m, Laplacian m and V at a single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (s.dim,):
        raise ValueError(f"point must have shape ({s.dim},)")
    p, n = s.p, s.dim
    r = float(np.linalg.norm(x))
    g = float(s.g.value(r))
    # 0**0 == 1 gives the p = 2 (and s = 2) limits at the origin
    rp2 = r ** (p - 2)
    m = g * r**p
    grad_m = (p * g + float(s.g.x_dot_grad(r))) * rp2 * x
    lap_m = r**p * float(s.g.lap(r, n))
    lap_m += (2 * p * float(s.g.x_dot_grad(r)) + p * (n + p - 2) * g) * rp2
    return {"m": m, "grad_m": grad_m, "lap_m": lap_m, "V": float(s.V(x))}


def _in_refined_set(p: float) -> bool:
    return p == 2 or p > 3


def _sample_box(domain: DomainSpec, per_axis: int = 201) -> np.ndarray:
    axes = [np.linspace(-a, a, per_axis) for a in domain.half_widths]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, len(axes))


def validate_scenario(s: Scenario) -> list[str]:
    """Return the list of violated assumptions (empty when well posed)."""
    report = []
    if s.dim < 1:
        report.append("dim must be a positive integer")
        return report
    if not s.epsilon > 0:
        report.append("epsilon > 0 violated")
    if not s.p >= 2:
        report.append("p >= 2 violated")
    if s.mode not in MODES:
        report.append(f"unknown mode {s.mode!r}")
    elif s.mode != "leading" and not _in_refined_set(s.p):
        report.append("p outside {2}∪(3,∞) for refined mode")
    if not s.g.c0 > 0:
        report.append("c0 > 0 violated for the advection potential")
    if s.g.beta < 0:
        report.append("beta >= 0 violated for the advection potential")
    if s.g.s < 2:
        report.append("s >= 2 violated for the advection potential")
    if s.domain is None or len(s.domain.half_widths) != s.dim:
        report.append("domain dimension does not match dim")
        return report
    if any(not a > 0 for a in s.domain.half_widths):
        report.append("origin not interior: box half-widths must be positive")
        return report

    if s.v.kind == "smooth":
        for mi, _ in s.v.monomials:
            if len(mi) != s.dim:
                report.append(f"multi-index {mi.sigma} does not match dim")
                return report
    else:
        Q = s.v.matrix
        if Q.shape != (s.dim, s.dim):
            report.append("anisotropy matrix Q has wrong shape")
            return report
        if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() <= 0:
            report.append("anisotropy matrix Q must be symmetric positive definite")
        if not s.v.c_h > 0 or not s.v.q_hat > 0:
            report.append("homogeneous V needs c_h > 0 and q_hat > 0")

    if s.v.kind == "smooth" or s.v.matrix.shape == (s.dim, s.dim):
        pts = _sample_box(s.domain, 201 if s.dim == 1 else 61)
        if np.min(s.V(pts)) < -1e-14:
            report.append("V ≥ 0 violated")

    if s.mode == "smooth_refined":
        if s.v.kind != "smooth":
            report.append("smooth_refined mode requires a smooth (polynomial) V")
        if s.g.beta > 0 and not s.g.l_exponent > 3:
            report.append("l = s-1 > 3 violated for smooth_refined mode")
    elif s.mode == "homogeneous_refined":
        if s.v.kind != "homogeneous":
            report.append("homogeneous_refined mode requires a homogeneous V")
        elif s.g.beta > 0 and not s.g.l_exponent > 2 * s.v.q_hat + 3:
            report.append("l = s-1 > 2*q_hat+3 violated for homogeneous_refined mode")
    return report


def canonical_smooth(beta: float = 0.01, s: float = 5.0, dim: int = 1) -> Scenario:
    """V = 1 + x + x**2 on (-2, 2) with m = (1 + beta |x|**s) |x|**2."""
    if dim != 1:
        raise ValueError("the canonical smooth scenario is one-dimensional")
    return Scenario(
        dim=1, epsilon=1.0, p=2.0, g=GSpec(1.0, beta, s),
        v=SmoothV.from_terms([((0,), 1.0), ((1,), 1.0), ((2,), 1.0)]),
        domain=DomainSpec((2.0,)), mode="smooth_refined",
    )


def canonical_homogeneous(q_hat: float = 1.0, c_h: float = 1.0, beta: float = 0.0,
                          s: float = 8.0, dim: int = 1,
                          Q: Sequence[Sequence[float]] | None = None) -> Scenario:
    Q = tuple(tuple(float(v) for v in row) for row in (Q if Q is not None else np.eye(dim)))
    return Scenario(
        dim=dim, epsilon=1.0, p=2.0, g=GSpec(1.0, beta, s),
        v=HomogeneousV(c_h, q_hat, Q), domain=DomainSpec((2.0,) * dim),
        mode="homogeneous_refined",
    )
