"""Compare the compiled and numpy kernels on operator apply and deflated PCG.

    python3 benchmarks/bench_kernels.py [--sizes 1023 4095 16383] [--repeat 5]
"""
import argparse
import time

import numpy as np

from advecteig import kernels


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def problem(shape):
    axes = [np.linspace(-6, 6, n + 2)[1:-1] for n in shape]
    h = [a[1] - a[0] for a in axes]
    r2 = sum(x**2 for x in np.meshgrid(*axes, indexing="ij"))
    w = 4.0 * r2 + 2.0 * len(shape)
    inv_h2 = tuple(1 / hi**2 for hi in h)
    u = np.exp(-r2)
    return w, inv_h2, u


def bench(shape, repeat):
    w, inv_h2, u = problem(shape)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(shape)
    z = u / np.linalg.norm(u)
    b = f - np.vdot(z, f) * z
    lam = 2.0 * len(shape)  # near the bottom of the spectrum: singular after deflation
    rows = []
    if kernels._ext is None:
        backends = ["python"]
    else:
        backends = ["cython", "python"]
    for be in backends:
        t_apply = _best(lambda: kernels.apply(f, w, 1.0, inv_h2, 0.0, backend=be), repeat)
        res = {}
        t_pcg = _best(lambda: res.update(out=kernels.pcg(b, w, 1.0, inv_h2, lam, z=z, tol=1e-10,
                                                         maxiter=50000, backend=be)), max(1, repeat // 2))
        rows.append((be, t_apply, t_pcg, res["out"][1]))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1023, 4095, 16383])
    ap.add_argument("--grid2d", type=int, nargs="+", default=[63, 127])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'shape':>12} {'backend':>8} {'apply [ms]':>11} {'pcg [ms]':>10} {'pcg its':>8}")
    shapes = [(n,) for n in args.sizes] + [(n, n) for n in args.grid2d]
    for shape in shapes:
        rows = bench(shape, args.repeat)
        for be, ta, tp, it in rows:
            print(f"{'x'.join(map(str, shape)):>12} {be:>8} {1e3 * ta:11.3f} {1e3 * tp:10.2f} {it:8d}")
        if len(rows) == 2:
            print(f"{'':>12} {'speedup':>8} {rows[1][1] / rows[0][1]:11.1f} {rows[1][2] / rows[0][2]:10.1f}")


if __name__ == "__main__":
    main()
