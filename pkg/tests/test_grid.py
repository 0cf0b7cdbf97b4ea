import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from advecteig.grid import (GridField, GridMismatchError, build_grid, inner_product, interpolate,
                            laplacian_apply, norm)


def test_three_node_grid():
    g = build_grid(1, 1.0, 3)
    assert np.allclose(g.axes[0], [-0.5, 0.0, 0.5])
    assert g.spacing == (0.5,)


def test_fine_spacing_is_power_of_two():
    assert build_grid(1, 8.0, 4095).spacing[0] == 2.0**-8


def test_tensor_count():
    g = build_grid(2, (4.0, 4.0), (255, 255))
    assert g.size == 255**2 and g.points.shape == (255, 255, 2)


@pytest.mark.parametrize("ext,n", [(0.0, 5), (-1.0, 5), (1.0, 2)])
def test_rejects_bad_grids(ext, n):
    with pytest.raises(ValueError):
        build_grid(1, ext, n)


def test_nodes_symmetric_and_origin_is_node():
    g = build_grid(1, 3.0, 101)
    x = g.axes[0]
    assert np.array_equal(x, -x[::-1])
    assert x[50] == 0.0


def test_laplacian_of_quadratic():
    g = build_grid(1, 2.0, 31)
    lap = laplacian_apply(g, g.sample(lambda p: p[..., 0] ** 2)).values
    assert np.allclose(lap[1:-1], 2.0, atol=1e-10)


def test_laplacian_of_zero():
    g = build_grid(2, 1.0, 9)
    assert np.all(laplacian_apply(g, g.zeros()).values == 0)


def test_laplacian_sine_second_order():
    errs = []
    L = 1.5
    for n in (63, 127, 255):
        g = build_grid(1, L, n)
        f = g.sample(lambda p: np.sin(math.pi * (p[..., 0] + L) / (2 * L)))
        k2 = (math.pi / (2 * L)) ** 2
        errs.append(np.max(np.abs(laplacian_apply(g, f).values + k2 * f.values)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("n", [3, 10, 101])
def test_quadrature_of_one(n):
    g = build_grid(1, 1.0, n)
    one = g.field(np.ones(g.shape))
    assert inner_product(g, one, one) == pytest.approx(2 - g.spacing[0], rel=1e-14)


def test_quadrature_odd_even():
    g = build_grid(1, 4.0, 201)
    x = g.axes[0]
    assert abs(inner_product(g, g.field(x**3), g.field(np.cos(x)))) < 1e-13


def test_gaussian_quadrature():
    g = build_grid(1, 8.0, 4095)
    f = g.sample(lambda p: np.exp(-p[..., 0] ** 2))
    assert inner_product(g, f, f) == pytest.approx(math.sqrt(math.pi / 2), abs=1e-10)


def test_quadrature_exact_for_piecewise_linear():
    # trapezoid with zero boundary equals the exact integral of the hat interpolant
    rng = np.random.default_rng(1)
    g = build_grid(1, 1.0, 17)
    f = g.field(rng.standard_normal(17))
    padded = np.pad(f.values, 1)
    exact = sum(0.5 * (a + b) * g.spacing[0] for a, b in zip(padded[:-1], padded[1:]))
    one = g.field(np.ones(17))
    assert inner_product(g, f, one) == pytest.approx(exact, rel=1e-13)


def test_mismatch_raises():
    g1, g2 = build_grid(1, 1.0, 5), build_grid(1, 1.0, 7)
    with pytest.raises(GridMismatchError):
        inner_product(g1, g1.zeros(), g2.zeros())
    with pytest.raises(GridMismatchError):
        laplacian_apply(g1, g2.zeros())


def test_interpolation():
    g = build_grid(1, 2.0, 39)
    f = g.sample(lambda p: p[..., 0])
    assert interpolate(f, [g.axes[0][7]]) == pytest.approx(g.axes[0][7])
    assert interpolate(f, [0.3]) == pytest.approx(0.3, abs=1e-14)
    h = build_grid(1, 1.0, 3)
    step = h.field([0.0, 0.0, 1.0])
    assert interpolate(step, [0.25]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        interpolate(f, [2.5])


def test_interpolation_2d_bilinear_exact():
    g = build_grid(2, (1.0, 2.0), (9, 11))
    f = g.sample(lambda p: 1 + 2 * p[..., 0] - p[..., 1] + 0.5 * p[..., 0] * p[..., 1])
    x = np.array([0.13, -0.41])
    assert interpolate(f, x) == pytest.approx(1 + 2 * x[0] - x[1] + 0.5 * x[0] * x[1], abs=1e-13)


fields = arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(3, 12)),
                elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(fields, st.integers(0, 2**31 - 1))
def test_laplacian_symmetric_and_nsd(a, seed):
    g = build_grid(2, (1.0, 0.7), a.shape)
    b = np.random.default_rng(seed).standard_normal(a.shape)
    f, h = g.field(a), g.field(b)
    lf, lh = laplacian_apply(g, f), laplacian_apply(g, h)
    scale = (norm(lf) + 1) * (norm(h) + 1)
    assert abs(inner_product(g, lf, h) - inner_product(g, f, lh)) <= 1e-12 * scale
    assert inner_product(g, f, lf) <= 1e-12 * scale


def test_field_arithmetic():
    g = build_grid(1, 1.0, 5)
    f = g.field(np.arange(5.0))
    assert np.array_equal((2 * f - f).values, f.values)
    assert (-f).sup() == 4.0
    with pytest.raises(GridMismatchError):
        f + build_grid(1, 1.0, 7).zeros()
    with pytest.raises(ValueError):
        GridField(g, np.zeros(4))
