import math

import numpy as np
import pytest
import scipy.linalg as sla

from advecteig.eigensolver import ConvergenceError, IndefiniteSystemError, principal_eigenpair, _DirectSolver
from advecteig.grid import build_grid, inner_product, norm
from advecteig.model import canonical_homogeneous
from advecteig.operators import OperatorForm, OperatorHandle, assemble, rayleigh_quotient
from advecteig.verify import gaussian_scenario


def _dirichlet_interval(n):
    g = build_grid(1, math.pi / 2, n)  # [0, pi] shifted to be symmetric about 0
    return OperatorHandle(g, np.zeros(g.shape), 1.0)


@pytest.mark.parametrize("inner", ["direct", "cg"])
def test_interval_first_eigenvalue(inner):
    errs = []
    for n in (63, 127):
        op = _dirichlet_interval(n)
        eig = principal_eigenpair(op, tol=1e-12, inner=inner)
        errs.append(abs(eig.value - 1.0))
        x = op.grid.axes[0]
        ref = np.cos(x) / math.sqrt(math.pi / 2)
        assert np.max(np.abs(eig.field.values - ref)) < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_harmonic_oscillator_fine():
    s = gaussian_scenario()
    op = assemble(OperatorForm.limit(), s, build_grid(1, 8.0, 4095))
    assert abs(principal_eigenpair(op, tol=1e-12).value - 4.0) <= 1e-5


def test_shift_identity():
    s = gaussian_scenario()
    g = build_grid(1, 6.0, 255)
    op = assemble(OperatorForm.limit(), s, g)
    a = principal_eigenpair(op, tol=1e-13)
    b = principal_eigenpair(op.with_potential(op.W + 3.5), tol=1e-13)
    assert b.value - a.value == pytest.approx(3.5, abs=1e-11)
    assert np.max(np.abs(a.field.values - b.field.values)) < 1e-10


@pytest.mark.parametrize("dim,n", [(1, 255), (2, 47)])
def test_contract(dim, n):
    s = gaussian_scenario(dim=dim) if dim == 1 else canonical_homogeneous(q_hat=1.0, dim=2)
    g = build_grid(dim, 5.0, n)
    op = assemble(OperatorForm.limit(), s, g)
    eig = principal_eigenpair(op, tol=1e-11)
    f = eig.field
    assert abs(inner_product(g, f, f) - 1) <= 1e-12
    assert np.min(f.values) > 0
    assert rayleigh_quotient(op, f) == pytest.approx(eig.value, rel=1e-13)
    res = norm(op.apply(f) - eig.value * f)
    assert res <= 1e-10 * abs(eig.value)
    rng = np.random.default_rng(7)
    for _ in range(20):
        trial = g.field(rng.standard_normal(g.shape))
        assert rayleigh_quotient(op, trial) >= eig.value - 1e-11


def test_matches_dense_solver():
    s = canonical_homogeneous(q_hat=1.5)
    g = build_grid(1, 6.0, 101)
    op = assemble(OperatorForm.limit(), s, g)
    dense = op.to_sparse().toarray()
    ref = sla.eigh(dense, eigvals_only=True, subset_by_index=[0, 0])[0]
    assert principal_eigenpair(op, tol=1e-13).value == pytest.approx(ref, rel=1e-12)


def test_deterministic():
    s = gaussian_scenario()
    op = assemble(OperatorForm.limit(), s, build_grid(1, 6.0, 511))
    a, b = principal_eigenpair(op, tol=1e-12), principal_eigenpair(op, tol=1e-12)
    assert a.value == b.value and np.array_equal(a.field.values, b.field.values)


def test_budget_exhausted():
    op = _dirichlet_interval(255)
    with pytest.raises(ConvergenceError) as info:
        principal_eigenpair(op, tol=1e-14, max_iter=1, start=op.grid.field(np.ones(255)))
    assert info.value.partial is not None


def test_bad_arguments():
    op = _dirichlet_interval(15)
    with pytest.raises(ValueError):
        principal_eigenpair(op, tol=0.0)
    with pytest.raises(ValueError):
        principal_eigenpair(op, inner="qr")


def test_indefinite_inner_system_detected():
    op = _dirichlet_interval(31)
    with pytest.raises(IndefiniteSystemError):
        _DirectSolver(op, 5.0)
