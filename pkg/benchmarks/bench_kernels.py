"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--elements 20000] [--repeat 5]

Both backends are run on identical inputs; the script reports best-of
timings, speedups and the largest relative disagreement of the outputs.
"""
import argparse
import time

import numpy as np

from facetflow import _kernels_py, mesh

try:
    from facetflow import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _rel(a, b):
    if a is None:
        return 0.0
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--elements", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--N", type=int, default=1)
    args = ap.parse_args(argv)

    cells = int(np.sqrt(args.elements / 2))
    m = mesh.rectangle(nx=cells, ny=cells)
    rng = np.random.default_rng(0)
    T, N = m.n_triangles, args.N
    Du0 = rng.standard_normal((T, N, 2))
    Du1 = Du0 + 1e-3 * rng.standard_normal((T, N, 2))
    x1 = rng.standard_normal((200_000, 9))
    x2 = x1 + 1e-3 * rng.standard_normal(x1.shape)
    b, p, eps = 0.5, 3.0, 0.05

    cases = {
        "element_terms(hessian)": lambda k: k.element_terms(Du0, m.grads, m.element_area, b, p, eps, True),
        "element_terms(grad)": lambda k: k.element_terms(Du0, m.grads, m.element_area, b, p, eps, False),
        "energy_change": lambda k: k.energy_change(Du0, Du1, b, p, eps),
        "truncation_quotients": lambda k: k.truncation_quotients(x1, x2, 1.0, 0.2),
    }
    print(f"{T} elements, N={N}; compiled backend {'available' if _compiled else 'missing'}")
    print(f"{'kernel':26s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, run in cases.items():
        tp, outp = _best(lambda: run(_kernels_py), args.repeat)
        if _compiled is None:
            print(f"{name:26s} {1e3 * tp:12.2f} {'-':>14s} {'-':>8s} {'-':>13s}")
            continue
        tc, outc = _best(lambda: run(_compiled), args.repeat)
        outs_p = outp if isinstance(outp, tuple) else (outp,)
        outs_c = outc if isinstance(outc, tuple) else (outc,)
        diff = max(_rel(c, q) for c, q in zip(outs_c, outs_p) if q is not None)
        print(f"{name:26s} {1e3 * tp:12.2f} {1e3 * tc:14.2f} {tp / tc:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
