"""Benchmark the compiled divisor-scan kernels against the numpy fallback.

Usage:  python3 benchmarks/bench_kernels.py [--samples N] [--kmax K]

Times the two hot reductions on realistic shapes (the survivor-sweep
batch scan and the small-divisor sum) with both backends and prints a
speedup table.  Results from the two backends are cross-checked before
timing.
"""

import argparse
import time

import numpy as np

from kamtori._kernels import _ref, lattice_shell, norms

try:
    from kamtori._kernels import _core
except ImportError:
    _core = None

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def _time(fn, *args, repeat=3):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_batch_scan(samples, kmax):
    rng = np.random.default_rng(0)
    kvecs = lattice_shell(2, 0.0, float(kmax)).astype(float)
    k2, _ = norms(kvecs)
    kpow = np.ascontiguousarray(k2 ** 1.5)
    omegas = np.ascontiguousarray(rng.uniform(0.5, 2.5, size=(samples, 2)))
    mre = np.ascontiguousarray(np.tile([0.0, -1.0], (samples, 1)))
    mim = np.ascontiguousarray(np.zeros((samples, 2)))
    args = (np.ascontiguousarray(kvecs), kpow, omegas, mre, mim)

    t_ref, out_ref = _time(_ref.min_divisor_ratio_batch, *args)
    rows = [("batch divisor scan", "numpy", t_ref,
             samples * len(kvecs) * 2 / t_ref / 1e6)]
    if _core is not None:
        t_core, out_core = _time(_core.min_divisor_ratio_batch, *args)
        assert np.allclose(out_core[0], out_ref[0], rtol=1e-12)
        rows.append(("batch divisor scan", "cython", t_core,
                     samples * len(kvecs) * 2 / t_core / 1e6))
    return rows, len(kvecs)


def bench_divisor_sum(kmax, cases=50):
    kvecs = lattice_shell(2, 0.0, float(kmax)).astype(float)
    k2, k1 = norms(kvecs)
    weights = np.ascontiguousarray(k1 * np.exp(-0.1 * k1))
    hyp = np.ascontiguousarray(k2 ** 1.5)
    omega = np.array([1.0, GOLDEN])
    kdotw = np.ascontiguousarray(kvecs @ omega)

    def run_ref():
        for i in range(cases):
            _ref.divisor_sum_reduce(kdotw, weights, hyp, 0.01 * i, 2.0)

    t_ref, _ = _time(run_ref)
    rows = [("divisor sum x%d" % cases, "numpy", t_ref,
             cases * len(kvecs) / t_ref / 1e6)]
    if _core is not None:
        def run_core():
            for i in range(cases):
                _core.divisor_sum_reduce(kdotw, weights, hyp, 0.01 * i, 2.0)
        t_core, _ = _time(run_core)
        rows.append(("divisor sum x%d" % cases, "cython", t_core,
                     cases * len(kvecs) / t_core / 1e6))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=4000)
    ap.add_argument("--kmax", type=int, default=120)
    args = ap.parse_args()

    rows, nk = bench_batch_scan(args.samples, args.kmax)
    rows += bench_divisor_sum(args.kmax)
    print(f"lattice points to |k|_2 <= {args.kmax}: {nk}; samples: {args.samples}")
    print(f"{'kernel':<24} {'backend':<8} {'time [s]':>10} {'Mpair/s':>10}")
    base = {}
    for name, backend, t, rate in rows:
        print(f"{name:<24} {backend:<8} {t:>10.3f} {rate:>10.1f}")
        base.setdefault(name, {})[backend] = t
    for name, d in base.items():
        if "cython" in d and "numpy" in d:
            print(f"{name}: speedup x{d['numpy'] / d['cython']:.1f}")


if __name__ == "__main__":
    main()
