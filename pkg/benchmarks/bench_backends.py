"""Benchmark the compiled inner-loop backend against the NumPy fallback.

Times the four hot kernels on synthetic data and a full cross-approximation
sweep on the gravity problem with each backend. Run from the repo root:

    python3 benchmarks/bench_backends.py --n 2048 --k 40 --reps 30
"""

import argparse
import time

import numpy as np

from crossreg import core, core_py, gravity
from crossreg.aca import init as aca_init
from crossreg.aca import step as aca_step

IMPLS = [core_py]
try:
    from crossreg import core_cy

    IMPLS.append(core_cy)
except ImportError:
    core_cy = None

_KERNEL_NAMES = ("residual_vector", "argmax_abs_masked", "update_probe_values", "eval_cross_sum")


def bench(fn, reps, *args, **kwargs):
    fn(*args, **kwargs)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args, **kwargs)
    return (time.perf_counter() - t0) / reps


def bench_kernels(impl, n, k, t, reps, rng):
    w = rng.standard_normal((k, n))
    coeff = rng.standard_normal(k)
    raw = rng.standard_normal(n)
    out = np.empty(n)
    excluded = (rng.random(n) < 0.05).astype(np.uint8)
    rows = rng.integers(0, n, t).astype(np.intp)
    cols = rng.integers(0, n, t).astype(np.intp)
    values = rng.standard_normal(t)
    wc = rng.standard_normal(n)
    wr = rng.standard_normal(n)
    cross_out = np.empty(t)
    return {
        "residual_vector": bench(impl.residual_vector, reps, raw, w, coeff, out),
        "argmax_abs_masked": bench(impl.argmax_abs_masked, reps, raw, excluded),
        "update_probe_values": bench(impl.update_probe_values, reps, values, rows, cols, wc, wr),
        "eval_cross_sum": bench(impl.eval_cross_sum, reps, w, w, rows, cols, cross_out),
    }


class _swapped_backend:
    """Temporarily point crossreg.core's functions at one implementation."""

    def __init__(self, impl):
        self.impl = impl

    def __enter__(self):
        self.saved = {name: getattr(core, name) for name in _KERNEL_NAMES}
        for name in _KERNEL_NAMES:
            setattr(core, name, getattr(self.impl, name))

    def __exit__(self, *exc):
        for name, fn in self.saved.items():
            setattr(core, name, fn)


def bench_full_sweep(impl, n, k, t):
    core_problem = gravity(n)
    with _swapped_backend(impl):
        t0 = time.perf_counter()
        model, probes = aca_init(core_problem.oracle, t, seed=0)
        for _ in range(k):
            aca_step(model, probes, core_problem.oracle)
        elapsed = time.perf_counter() - t0
    return elapsed, float(np.max(np.abs(probes.values)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--k", type=int, default=40)
    ap.add_argument("--t", type=int, default=None, help="probe count (default 50*n)")
    ap.add_argument("--reps", type=int, default=30)
    args = ap.parse_args()
    t = args.t if args.t is not None else 50 * args.n
    rng = np.random.default_rng(0)

    print(f"n={args.n} k={args.k} t={t} reps={args.reps}")
    if core_cy is None:
        print("compiled backend not built; showing the NumPy fallback only")

    results = {impl.BACKEND: bench_kernels(impl, args.n, args.k, t, args.reps, rng)
               for impl in IMPLS}
    header = f"{'kernel':22s}" + "".join(f"{impl.BACKEND:>12s}" for impl in IMPLS)
    print("\nper-call times (us)")
    print(header + ("     speedup" if len(IMPLS) == 2 else ""))
    for name in _KERNEL_NAMES:
        row = f"{name:22s}"
        for impl in IMPLS:
            row += f"{results[impl.BACKEND][name] * 1e6:12.1f}"
        if len(IMPLS) == 2:
            row += f"{results['python'][name] / results['cython'][name]:11.2f}x"
        print(row)

    print(f"\nfull {args.k}-step cross-approximation sweep on gravity(n={args.n})")
    probe_checks = {}
    for impl in IMPLS:
        elapsed, pmax = bench_full_sweep(impl, args.n, args.k, t)
        probe_checks[impl.BACKEND] = pmax
        print(f"  {impl.BACKEND:8s}: {elapsed:8.3f} s")
    if len(IMPLS) == 2:
        a, b = probe_checks["python"], probe_checks["cython"]
        drift = abs(a - b) / max(abs(a), 1e-300)
        print(f"  final probe residual agreement: {drift:.2e} relative")


if __name__ == "__main__":
    main()
