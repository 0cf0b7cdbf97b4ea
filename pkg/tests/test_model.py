import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advecteig.model import (DomainSpec, GSpec, HomogeneousV, MultiIndex, Scenario, SmoothV,
                             canonical_homogeneous, canonical_smooth, eval_coefficients, validate_scenario)


def _m(s, x):
    r = np.linalg.norm(x)
    return float(s.g.value(r)) * r**s.p


def test_canonical_scenarios_validate():
    assert validate_scenario(canonical_smooth()) == []
    assert validate_scenario(canonical_homogeneous(q_hat=2.0)) == []


def test_eval_coefficients_pure_quadratic():
    s = Scenario(1, 1.0, 2.0, GSpec(1.0), SmoothV.from_terms([((0,), 0.0)]))
    c = eval_coefficients(s, [0.5])
    assert c["m"] == pytest.approx(0.25)
    assert c["grad_m"][0] == pytest.approx(1.0)
    assert c["lap_m"] == pytest.approx(2.0)


def test_eval_coefficients_at_origin_p2():
    s = canonical_smooth()
    c = eval_coefficients(s, [0.0])
    assert c["m"] == 0.0 and c["grad_m"][0] == 0.0
    assert c["lap_m"] == pytest.approx(2.0)
    assert c["V"] == pytest.approx(1.0)


def test_point_shape_checked():
    with pytest.raises(ValueError):
        eval_coefficients(canonical_smooth(), [0.1, 0.2])


@pytest.mark.parametrize("dim,p,beta,s", [(1, 2.0, 0.01, 5.0), (2, 2.0, 0.3, 4.0), (2, 4.0, 0.5, 3.0), (3, 3.5, 1.0, 2.0)])
def test_derivatives_match_finite_differences(dim, p, beta, s):
    sc = Scenario(dim, 1.0, p, GSpec(1.3, beta, s), SmoothV.from_terms([((0,) * dim, 1.0)], dim))
    x = np.linspace(0.3, 0.7, dim)
    c = eval_coefficients(sc, x)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        grad = np.zeros(dim)
        lap = 0.0
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            fp, f0, fm = _m(sc, x + e), _m(sc, x), _m(sc, x - e)
            grad[i] = (fp - fm) / (2 * h)
            lap += (fp - 2 * f0 + fm) / h**2
        errs.append(max(np.max(np.abs(grad - c["grad_m"])), abs(lap - c["lap_m"])))
    # second order: error ratio close to 4 under halving
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


@settings(max_examples=50, deadline=None)
@given(beta=st.floats(0, 5), s=st.floats(2, 10), r=st.floats(0, 3), dim=st.integers(1, 3))
def test_g_is_radially_nondecreasing_and_subharmonic(beta, s, r, dim):
    g = GSpec(1.0, beta, s)
    assert g.x_dot_grad(r) >= 0
    assert g.lap(r, dim) >= -1e-12


@settings(max_examples=50, deadline=None)
@given(q=st.floats(0.2, 4), x=st.lists(st.floats(-3, 3), min_size=2, max_size=2), a=st.floats(0.1, 3))
def test_homogeneous_v_scaling(q, x, a):
    v = HomogeneousV(1.0, q, (2.0, 0.5, 0.5, 1.0))
    x = np.array(x)
    assert v.value(2 * x) == pytest.approx(2**q * v.value(x), rel=1e-12, abs=1e-300)
    assert v.value(a * x) == pytest.approx(a**q * v.value(x), rel=1e-12, abs=1e-300)


def test_smooth_v_taylor_data():
    v = SmoothV.from_terms([((0, 0), 1.0), ((1, 0), 2.0), ((0, 1), -1.0), ((2, 0), 3.0), ((1, 1), 0.5)], 2)
    assert v.value_at_origin() == 1.0
    assert np.allclose(v.gradient_at_origin(2), [2.0, -1.0])
    terms = {mi.sigma: c for mi, c in v.second_order_terms(2)}
    assert terms == {(2, 0): 3.0, (1, 1): 0.5}


def test_multi_index():
    mi = MultiIndex((2, 1))
    assert mi.order == 3 and mi.factorial == 2
    assert mi(np.array([2.0, 3.0])) == 12.0


@pytest.mark.parametrize("kwargs,message", [
    (dict(epsilon=0.0), "epsilon > 0 violated"),
    (dict(p=1.5), "p >= 2 violated"),
    (dict(p=2.5, mode="smooth_refined"), "p outside {2}∪(3,∞) for refined mode"),
])
def test_validation_messages(kwargs, message):
    base = dict(dim=1, epsilon=1.0, p=2.0, g=GSpec(1.0), v=SmoothV.from_terms([((0,), 1.0)]),
                domain=DomainSpec((2.0,)), mode="leading")
    base.update(kwargs)
    assert message in validate_scenario(Scenario(**base))


def test_negative_potential_rejected():
    s = Scenario(1, 1.0, 2.0, GSpec(1.0), SmoothV.from_terms([((0,), 0.0), ((1,), 1.0)]))
    assert "V ≥ 0 violated" in validate_scenario(s)


def test_bad_g_and_q():
    s = Scenario(2, 1.0, 2.0, GSpec(-1.0, -0.1, 1.0), HomogeneousV(1.0, 1.0, (1.0, 2.0, 2.0, 1.0)),
                 mode="homogeneous_refined")
    msgs = " | ".join(validate_scenario(s))
    assert "c0 > 0" in msgs and "beta >= 0" in msgs and "s >= 2" in msgs
    assert "symmetric positive definite" in msgs


def test_refined_mode_exponent_condition():
    s = Scenario(1, 1.0, 2.0, GSpec(1.0, 0.1, 3.0), SmoothV.from_terms([((0,), 1.0)]), mode="smooth_refined")
    assert any("l = s-1 > 3" in m for m in validate_scenario(s))
    # beta = 0 removes the condition
    s0 = Scenario(1, 1.0, 2.0, GSpec(1.0, 0.0, 3.0), SmoothV.from_terms([((0,), 1.0)]), mode="smooth_refined")
    assert validate_scenario(s0) == []


def test_mode_kind_mismatch():
    s = Scenario(1, 1.0, 2.0, GSpec(1.0), SmoothV.from_terms([((0,), 1.0)]), mode="homogeneous_refined")
    assert any("requires a homogeneous V" in m for m in validate_scenario(s))
