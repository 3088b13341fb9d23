"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot loops (path sampling and running-sup accumulation) on
workloads shaped like the verification suite's heaviest runs, and checks the
backends agree while timing.  Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mcbound._kernels import available_backends, get_backend


def time_call(fn, *args, repeat=3, **kwargs):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_sample_paths(backends, rng, trials=512, length=10_000, m=8):
    q = rng.random((m, m)) + 0.05
    q /= q.sum(axis=1, keepdims=True)
    row_cum = np.cumsum(q, axis=1).copy()
    init_cum = np.cumsum(np.full(m, 1.0 / m)).copy()
    uniforms = rng.random((trials, length))
    rows = []
    ref = None
    for name, impl in backends.items():
        secs, paths = time_call(impl.sample_paths, row_cum, init_cum, uniforms)
        if ref is None:
            ref = paths
        else:
            assert np.array_equal(ref, paths), "backends disagree on paths"
        rows.append((f"sample_paths  trials={trials} n={length} m={m}", name, secs))
    return rows


def bench_running_sup(backends, rng, trials=256, length=1000, m=8, d=3):
    steps = rng.standard_normal((m, d, d)) + 1j * rng.standard_normal((m, d, d))
    steps = (steps + steps.conj().transpose(0, 2, 1)) / 2
    idx = rng.integers(0, m, size=(trials, length))
    rows = []
    ref = None
    for name, impl in backends.items():
        secs, (sup, term) = time_call(impl.running_sup_sum, steps, idx, True)
        if ref is None:
            ref = sup
        else:
            assert np.abs(ref - sup).max() < 1e-10 * max(1.0, ref.max())
        rows.append((f"running_sup   trials={trials} n={length} d={d}", name, secs))
    return rows


def main():
    names = available_backends()
    backends = {name: get_backend(name) for name in names}
    if "ext" not in backends:
        print("compiled extension not available; benchmarking fallback only")
    rng = np.random.default_rng(0)
    rows = []
    rows += bench_sample_paths(backends, rng)
    rows += bench_running_sup(backends, rng, d=1)
    rows += bench_running_sup(backends, rng, d=3)
    rows += bench_running_sup(backends, rng, d=6)
    print(f"{'workload':<42} {'backend':<8} {'seconds':>10} {'speedup':>9}")
    base = {}
    for workload, name, secs in rows:
        if name == "py":
            base[workload] = secs
        speedup = base[workload] / secs if workload in base and secs > 0 else float("nan")
        print(f"{workload:<42} {name:<8} {secs:>10.4f} {speedup:>8.1f}x")


if __name__ == "__main__":
    main()
