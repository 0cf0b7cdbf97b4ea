# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil apply and deflated Jacobi-PCG for 1D (as nx x 1) and 2D arrays."""
from libc.math cimport sqrt
from libc.stdlib cimport malloc, free


cdef void _apply(const double[:, ::1] f, const double[:, ::1] w, double ex, double ey,
                 double mu, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1], i, j
    cdef double d = 2.0 * ex + 2.0 * ey
    cdef double acc
    if ny == 1:
        # 1D: branch-free interior
        for i in range(nx):
            out[i, 0] = (w[i, 0] - mu + d) * f[i, 0]
        for i in range(1, nx):
            out[i, 0] -= ex * f[i - 1, 0]
            out[i - 1, 0] -= ex * f[i, 0]
        return
    for i in range(nx):
        for j in range(ny):
            acc = (w[i, j] - mu + d) * f[i, j]
            if i > 0:
                acc -= ex * f[i - 1, j]
            if i < nx - 1:
                acc -= ex * f[i + 1, j]
            if j > 0:
                acc -= ey * f[i, j - 1]
            if j < ny - 1:
                acc -= ey * f[i, j + 1]
            out[i, j] = acc


def apply(const double[:, ::1] f, const double[:, ::1] w, double ex, double ey, double mu,
          double[:, ::1] out):
    with nogil:
        _apply(f, w, ex, ey, mu, out)


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    # four partial sums break the add dependency chain
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t k, m = n - n % 4
    for k in range(0, m, 4):
        s0 += a[k] * b[k]
        s1 += a[k + 1] * b[k + 1]
        s2 += a[k + 2] * b[k + 2]
        s3 += a[k + 3] * b[k + 3]
    for k in range(m, n):
        s0 += a[k] * b[k]
    return (s0 + s1) + (s2 + s3)


cdef inline void _proj(double* v, const double* z, Py_ssize_t n) noexcept nogil:
    cdef double c = _dot(z, v, n)
    cdef Py_ssize_t k
    for k in range(n):
        v[k] -= c * z[k]


def pcg(const double[:, ::1] b, const double[:, ::1] w, double ex, double ey, double mu,
        double[:, ::1] x, const double[:, ::1] z, double tol, int maxiter, bint precondition):
    """Solve in place into ``x``; returns (iterations, relative residual, breakdown)."""
    cdef Py_ssize_t nx = b.shape[0], ny = b.shape[1], n = nx * ny, k
    cdef bint deflate = z.shape[0] == nx and z.shape[1] == ny
    cdef double d = 2.0 * ex + 2.0 * ey
    cdef double *r = <double*> malloc(n * sizeof(double))
    cdef double *s = <double*> malloc(n * sizeof(double))
    cdef double *p = <double*> malloc(n * sizeof(double))
    cdef double *ap = <double*> malloc(n * sizeof(double))
    cdef double *minv = <double*> malloc(n * sizeof(double))
    cdef double[:, ::1] pv, apv
    cdef double *xp = &x[0, 0]
    cdef const double *bp = &b[0, 0]
    cdef const double *zp = NULL
    cdef double bnorm, rnorm, rs, rs_new, pap, a, beta
    cdef int it = 0
    cdef bint brk = False, use_m = precondition
    if deflate:
        zp = &z[0, 0]
    try:
        pv = <double[:nx, :ny]> p
        apv = <double[:nx, :ny]> ap
        with nogil:
            for k in range(n):
                minv[k] = w[k // ny, k % ny] - mu + d
                if minv[k] <= 0.0:
                    use_m = False
            for k in range(n):
                minv[k] = 1.0 / minv[k] if use_m else 1.0
            if deflate:
                _proj(xp, zp, n)
            # r = b - A x
            for k in range(n):
                p[k] = xp[k]
            _apply(pv, w, ex, ey, mu, apv)
            for k in range(n):
                r[k] = bp[k] - ap[k]
                s[k] = bp[k]
            if deflate:
                _proj(r, zp, n)
                _proj(s, zp, n)
            bnorm = sqrt(_dot(s, s, n))
            rnorm = sqrt(_dot(r, r, n))
            if bnorm == 0.0:
                for k in range(n):
                    xp[k] = 0.0
                rnorm = 0.0
                bnorm = 1.0
            elif rnorm > tol * bnorm:
                for k in range(n):
                    s[k] = r[k] * minv[k]
                if deflate:
                    _proj(s, zp, n)
                for k in range(n):
                    p[k] = s[k]
                rs = _dot(r, s, n)
                while it < maxiter:
                    _apply(pv, w, ex, ey, mu, apv)
                    if deflate:
                        _proj(ap, zp, n)
                    pap = _dot(p, ap, n)
                    if pap <= 0.0:
                        brk = True
                        break
                    a = rs / pap
                    for k in range(n):
                        xp[k] += a * p[k]
                        r[k] -= a * ap[k]
                    it += 1
                    rnorm = sqrt(_dot(r, r, n))
                    if rnorm <= tol * bnorm:
                        break
                    for k in range(n):
                        s[k] = r[k] * minv[k]
                    if deflate:
                        _proj(s, zp, n)
                    rs_new = _dot(r, s, n)
                    beta = rs_new / rs
                    for k in range(n):
                        p[k] = s[k] + beta * p[k]
                    rs = rs_new
                if deflate:
                    _proj(xp, zp, n)
    finally:
        free(r); free(s); free(p); free(ap); free(minv)
    return it, rnorm / bnorm, brk
