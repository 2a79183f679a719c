"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backend.py [--repeat N]

The first table times the raw kernels on the same inputs (best of N) and
reports the speed ratio and the largest absolute difference. The second
times one NLML evaluation of each benchmark problem with the backend
swapped underneath the operator layer; this is the unit of work the
trainer repeats thousands of times.
"""
import argparse
import time

import numpy as np

from linopgp import _kernels_py
from linopgp.operators import spectral_nodes

try:
    from linopgp import _ckernels
except ImportError:
    _ckernels = None


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    A = rng.uniform(0, 1, (49, 1))
    B = rng.uniform(0, 1, (49, 1))
    yield ("deriv_product (1-D, orders 1x1, 49 pairs)", "deriv_product",
           (A, B, np.array([3.0]), np.array([1]), np.array([1])))
    n = 120
    A = rng.uniform(0, 1, (n * n, 2))
    B = rng.uniform(0, 1, (n * n, 2))
    w = np.array([2.0, 7.0])
    yield ("deriv_product (2-D, orders (1,2)x(1,2), 14400 pairs)", "deriv_product",
           (A, B, w, np.array([1, 2]), np.array([1, 2])))
    yield ("deriv_product (2-D, orders (0,2)x(0,0), 14400 pairs)", "deriv_product",
           (A, B, w, np.array([0, 2]), np.array([0, 0])))
    tau = rng.uniform(-1, 1, 12)
    omega, wt = spectral_nodes(6.0, 8001)
    yield ("spectral_sum (12 offsets x 8001 nodes)", "spectral_sum",
           (tau, omega, wt * np.exp(-omega ** 2 / 12), wt * omega * np.exp(-omega ** 2 / 12)))
    tau = rng.uniform(-1, 1, 81)
    omega, wt = spectral_nodes(6.0, 8001)
    yield ("spectral_sum (81 offsets x 8001 nodes)", "spectral_sum",
           (tau, omega, wt * np.exp(-omega ** 2 / 12), wt * omega * np.exp(-omega ** 2 / 12)))
    tau = rng.uniform(-1, 1, 2500)
    yield ("spectral_sum (2500 offsets x 8001 nodes)", "spectral_sum",
           (tau, omega, wt * np.exp(-omega ** 2 / 12), wt * omega * np.exp(-omega ** 2 / 12)))


def nlml_cases():
    from linopgp import benchmarks
    from linopgp.gp import ModelParams
    from linopgp.kernel import SEKernelParams

    for name in benchmarks.NAMES:
        spec = benchmarks.BenchmarkSpec(name)
        data = benchmarks.generate(spec)
        theta = SEKernelParams(1.0, [5.0] * len(spec.dims))
        yield name, data, spec.operator(), ModelParams(theta, spec.true_phi, 1e-6, 1e-6)


def time_nlml(repeat):
    from linopgp import _backend
    from linopgp.gp import nlml

    impls = {"cython": _ckernels, "numpy": _kernels_py}
    saved = {k: getattr(_backend, k) for k in ("deriv_product", "spectral_sum")}
    print(f"\n{'one NLML evaluation':58s} {'cython [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s} {'|diff|':>11s}")
    try:
        for name, data, expr, params in nlml_cases():
            times, vals = {}, {}
            for label, mod in impls.items():
                for k in saved:
                    setattr(_backend, k, getattr(mod, k))
                times[label], vals[label] = best_time(lambda: nlml(data, expr, params), repeat)
            label = f"{name} (n_u={data.n_u}, n_f={data.n_f})"
            print(f"{label:58s} {1e3 * times['cython']:12.3f} {1e3 * times['numpy']:12.3f} "
                  f"{times['numpy'] / times['cython']:9.2f} {abs(vals['cython'] - vals['numpy']):11.2e}")
    finally:
        for k, v in saved.items():
            setattr(_backend, k, v)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")
        return
    rng = np.random.Generator(np.random.PCG64(0))
    print(f"{'case':58s} {'cython [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s} {'max |diff|':>11s}")
    for label, name, inputs in cases(rng):
        tc, oc = best_time(lambda: getattr(_ckernels, name)(*inputs), args.repeat)
        tp, op = best_time(lambda: getattr(_kernels_py, name)(*inputs), args.repeat)
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))))
        print(f"{label:58s} {1e3 * tc:12.3f} {1e3 * tp:12.3f} {tp / tc:9.2f} {diff:11.2e}")
    time_nlml(args.repeat)


if __name__ == "__main__":
    main()
