"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on the same inputs through both paths and prints a
timing table plus a bit-exactness check. The public API picks one backend
per process (LOFIQ_BACKEND); this script calls the private twins directly
so both are measured in a single run.

Usage: python benchmarks/bench_backends.py [--size 4096] [--repeat 3]
"""

import argparse
import time

import numpy as np

from lofiq import codebook as cbm
from lofiq import hif4 as h4
from lofiq import hif8 as h8
from lofiq import mx as mxm
from lofiq import nvfp4 as nvm
from lofiq._accel import HAVE_NUMBA


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=4096, help="square tensor edge length")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare against")

    rng = np.random.default_rng(0)
    n = args.size
    x = rng.normal(0.0, 0.02, n * n)
    blocked32 = np.ascontiguousarray(x.reshape(-1, 32))
    blocked16 = np.ascontiguousarray(x.reshape(-1, 16))
    blocked64 = np.ascontiguousarray(x.reshape(-1, 64))
    e4m3 = mxm.resolve_element("e4m3")
    e2m1 = mxm.resolve_element("e2m1")

    rows = []

    def record(name, numba_fn, numpy_fn, same):
        numba_fn()  # JIT warmup
        t_nb, out_nb = _best_of(numba_fn, args.repeat)
        t_np, out_np = _best_of(numpy_fn, args.repeat)
        rows.append((name, t_nb, t_np, same(out_nb, out_np)))

    # codebook projection
    def proj_nb():
        out = np.empty_like(x)
        cbm._project_numba(e4m3.values, e4m3.codes, e4m3._mids, x, out)
        return out

    record("project e4m3", proj_nb,
           lambda: cbm._project_numpy(e4m3.values, e4m3.codes, e4m3._mids, x),
           np.array_equal)

    # adaptive 8-bit elementwise map
    def hif8_nb():
        out = np.empty_like(x)
        h8._hif8_numba(x, out)
        return out

    record("hif8 map", hif8_nb, lambda: h8._hif8_numpy(x), np.array_equal)

    # block scaling, 32-wide blocks
    def mx_nb():
        e = np.empty(blocked32.shape[0], dtype=np.int64)
        codes = np.empty_like(blocked32)
        mxm._quantize_numba(blocked32, e4m3.values, e4m3.codes, e4m3._mids,
                            e4m3.max_finite, e, codes)
        return e, codes

    record("mx e4m3 k=32", mx_nb, lambda: mxm._quantize_numpy(blocked32, e4m3),
           lambda a, b: np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]))

    # two-level 4-bit, 16-wide blocks
    amax = float(np.abs(x).max())
    s2 = amax / nvm.V_MAX
    while amax / s2 > nvm.V_MAX:
        s2 = np.nextafter(s2, np.inf)

    def nv_nb():
        s1 = np.empty(blocked16.shape[0])
        codes = np.empty_like(blocked16)
        over = np.empty(blocked16.shape[0])
        nvm._quantize_numba(blocked16, s2, e4m3.values, e4m3.codes, e4m3._mids,
                            e2m1.values, e2m1.codes, e2m1._mids, s1, codes, over)
        return s1, codes

    record("nvfp4 blocks", nv_nb, lambda: nvm._quantize_numpy(blocked16, s2, e4m3, e2m1)[:2],
           lambda a, b: np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]))

    # three-level hierarchical blocks
    B = blocked64.shape[0]

    def h4_nb():
        e1 = np.empty(B, dtype=np.int64)
        m1 = np.empty(B, dtype=np.int64)
        e2 = np.empty((B, 8), dtype=np.int64)
        e3 = np.empty((B, 8, 2), dtype=np.int64)
        sg = np.empty((B, 8, 2, 4), dtype=np.int8)
        xh = np.empty((B, 8, 2, 4), dtype=np.uint8)
        h4._quantize_numba(blocked64, False, e1, m1, e2, e3, sg, xh)
        return e1, m1, e2, e3, sg, xh

    record("hif4 blocks", h4_nb,
           lambda: h4._quantize_numpy(blocked64.reshape(B, 8, 2, 4), False),
           lambda a, b: all(np.array_equal(p, q) for p, q in zip(a, b)))

    print(f"\n{n}x{n} float64 tensor, best of {args.repeat}\n")
    print(f"{'kernel':<16}{'numba':>10}{'numpy':>10}{'speedup':>9}  identical")
    for name, t_nb, t_np, same in rows:
        print(f"{name:<16}{t_nb:>9.3f}s{t_np:>9.3f}s{t_np / t_nb:>8.1f}x  {same}")
    if not all(r[3] for r in rows):
        raise SystemExit("backend mismatch detected")


if __name__ == "__main__":
    main()
