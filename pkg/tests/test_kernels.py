import numpy as np
import pytest

from advecteig import kernels

needs_ext = pytest.mark.skipif(kernels._ext is None, reason="compiled kernels not built")


def _problem(shape, seed=0):
    rng = np.random.default_rng(seed)
    axes = [np.linspace(-5, 5, n + 2)[1:-1] for n in shape]
    r2 = sum(x**2 for x in np.meshgrid(*axes, indexing="ij"))
    w = 4 * r2 + 2 * len(shape)
    inv_h2 = tuple(1 / (a[1] - a[0]) ** 2 for a in axes)
    return rng.standard_normal(shape), w, inv_h2, np.exp(-r2)


@needs_ext
@pytest.mark.parametrize("shape", [(7,), (1023,), (9, 13), (64, 64)])
def test_apply_backends_agree(shape):
    f, w, inv_h2, _ = _problem(shape)
    a = kernels.apply(f, w, 0.7, inv_h2, 1.3, backend="cython")
    b = kernels.apply(f, w, 0.7, inv_h2, 1.3, backend="python")
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13 * np.abs(b).max())


@needs_ext
@pytest.mark.parametrize("shape", [(255,), (31, 31)])
@pytest.mark.parametrize("deflate", [False, True])
def test_pcg_backends_agree(shape, deflate):
    f, w, inv_h2, u = _problem(shape)
    z = u / np.linalg.norm(u) if deflate else None
    mu = 0.0
    if deflate:
        f = f - np.vdot(z, f) * z
    xa, ia, ra, ba = kernels.pcg(f, w, 1.0, inv_h2, mu, z=z, tol=1e-12, backend="cython")
    xb, ib, rb, bb = kernels.pcg(f, w, 1.0, inv_h2, mu, z=z, tol=1e-12, backend="python")
    assert not ba and not bb
    assert abs(ia - ib) <= 2
    assert np.allclose(xa, xb, atol=1e-9 * np.abs(xb).max())


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_pcg_solves_spd_system(backend):
    f, w, inv_h2, _ = _problem((201,))
    x, it, rel, brk = kernels.pcg(f, w, 1.0, inv_h2, 0.0, tol=1e-12, backend=backend)
    r = kernels.apply(x, w, 1.0, inv_h2, 0.0) - f
    assert not brk and rel <= 1e-12
    assert np.linalg.norm(r) <= 1e-11 * np.linalg.norm(f)


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_pcg_reports_breakdown_on_indefinite(backend):
    f, w, inv_h2, _ = _problem((101,))
    *_, brk = kernels.pcg(f, w, 1.0, inv_h2, 1e4, tol=1e-12, maxiter=500, backend=backend)
    assert brk


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_pcg_zero_rhs(backend):
    _, w, inv_h2, _ = _problem((11,))
    x, it, rel, brk = kernels.pcg(np.zeros(11), w, 1.0, inv_h2, 0.0, backend=backend)
    assert it == 0 and not np.any(x)


def test_three_dimensional_uses_numpy():
    f, w, inv_h2, _ = _problem((5, 6, 7))
    out = kernels.apply(f, w, 1.0, inv_h2, 0.0)
    assert out.shape == f.shape
    assert np.allclose(out, kernels.apply_py(f, w, 1.0, inv_h2, 0.0))


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys
    env = dict(os.environ, ADVECTEIG_KERNELS="python")
    code = ("from advecteig import kernels, verify; assert kernels.BACKEND == 'python'; "
            "r = verify.criterion_1(); print(r.passed)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "True"
