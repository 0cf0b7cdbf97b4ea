"""Hot loops: stencil operator apply and (deflated) Jacobi-PCG.

The compiled extension ``_kernels`` is used when importable and the arrays
are one- or two-dimensional; otherwise the numpy versions below run.  Set
``ADVECTEIG_KERNELS=python`` to force the fallback.

The operator is ``A f = -eps * Lap f + (w - mu) f`` with zero Dirichlet
data outside the array.
"""
from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("ADVECTEIG_KERNELS", "").lower() == "python":
        raise ImportError("compiled kernels disabled by environment")
    from . import _kernels as _ext
    BACKEND = "cython"
except ImportError:
    _ext = None
    BACKEND = "python"


def apply_py(f, w, eps, inv_h2, mu):
    f = np.asarray(f, dtype=float)
    out = (w - mu) * f
    for ax, c in enumerate(inv_h2):
        c = eps * c
        out += 2.0 * c * f
        lo = [slice(None)] * f.ndim
        hi = [slice(None)] * f.ndim
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        out[tuple(hi)] -= c * f[tuple(lo)]
        out[tuple(lo)] -= c * f[tuple(hi)]
    return out


def _as2d(a):
    a = np.ascontiguousarray(a, dtype=float)
    return a.reshape(a.shape[0], 1) if a.ndim == 1 else a


def _coefs(eps, inv_h2):
    ex = eps * inv_h2[0]
    ey = eps * inv_h2[1] if len(inv_h2) > 1 else 0.0
    return ex, ey


def apply(f, w, eps, inv_h2, mu, backend=None):
    backend = backend or BACKEND
    f = np.asarray(f, dtype=float)
    if backend == "cython" and _ext is not None and f.ndim <= 2:
        ex, ey = _coefs(eps, inv_h2)
        out = np.empty_like(_as2d(f))
        _ext.apply(_as2d(f), _as2d(w), ex, ey, float(mu), out)
        return out.reshape(f.shape)
    return apply_py(f, w, eps, inv_h2, mu)


def pcg_py(b, w, eps, inv_h2, mu, x0=None, z=None, tol=1e-10, maxiter=10000,
           precondition=True):
    """Jacobi-preconditioned CG, optionally deflated against unit vector ``z``.

    With ``z`` given every iterate, residual and search direction is kept
    orthogonal to ``z`` (Euclidean), which solves a consistent singular
    system whose kernel is spanned by ``z``.
    Returns ``(x, iterations, relative residual, breakdown)``.
    """
    b = np.asarray(b, dtype=float)
    shape = b.shape
    b = b.ravel()
    zz = None if z is None else np.asarray(z, dtype=float).ravel()

    def proj(v):
        if zz is not None:
            v -= np.dot(zz, v) * zz
        return v

    w2 = np.asarray(w, dtype=float).reshape(shape)
    A = lambda v: apply_py(v.reshape(shape), w2, eps, inv_h2, mu).ravel()
    diag = (np.asarray(w, dtype=float).ravel() - mu) + 2.0 * eps * sum(inv_h2)
    use_m = precondition and np.all(diag > 0)
    minv = 1.0 / diag if use_m else None

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    x = proj(x)
    r = proj(b - A(x))
    bnorm = np.linalg.norm(proj(b.copy()))
    if bnorm == 0.0:
        return np.zeros(shape), 0, 0.0, False
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        return x.reshape(shape), 0, rnorm / bnorm, False
    s = proj(r * minv) if use_m else r.copy()
    p = s.copy()
    rs = np.dot(r, s)
    it = 0
    while it < maxiter:
        ap = proj(A(p))
        pap = np.dot(p, ap)
        if pap <= 0.0:
            return x.reshape(shape), it, rnorm / bnorm, True
        a = rs / pap
        x += a * p
        r -= a * ap
        it += 1
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            break
        s = proj(r * minv) if use_m else r.copy()
        rs_new = np.dot(r, s)
        p = s + (rs_new / rs) * p
        rs = rs_new
    return proj(x).reshape(shape), it, rnorm / bnorm, False


def pcg(b, w, eps, inv_h2, mu, x0=None, z=None, tol=1e-10, maxiter=10000,
        precondition=True, backend=None):
    backend = backend or BACKEND
    b = np.asarray(b, dtype=float)
    if backend == "cython" and _ext is not None and b.ndim <= 2:
        ex, ey = _coefs(eps, inv_h2)
        x = np.zeros_like(_as2d(b)) if x0 is None else _as2d(np.array(x0, dtype=float))
        zz = np.zeros((0, 0)) if z is None else _as2d(z)
        it, rel, brk = _ext.pcg(_as2d(b), _as2d(w), ex, ey, float(mu), x, zz,
                                float(tol), int(maxiter), bool(precondition))
        return x.reshape(b.shape), it, rel, bool(brk)
    return pcg_py(b, w, eps, inv_h2, mu, x0, z, tol, maxiter, precondition)
