"""Seeded Monte Carlo simulation of chain sums, the Poisson-martingale
decomposition, and synthetic sign-symmetric matrix martingales.

Determinism contract: per-trial RNG streams are derived from
(master seed, stream_base + trial index), so serial and parallel runs agree
bit for bit; trial chunks write into preallocated slots and every reduction
runs in fixed trial order.  MCBOUND_THREADS (or the workers argument) caps
the thread count without affecting any result.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chains import _resolve_init, trial_uniforms
from .linalg import HermitianMatrix

_CHUNK = 256
_BOOTSTRAP_SEED = 0x5EED_B007
_BOOTSTRAP_RESAMPLES = 400


class UncenteredTableError(ValueError):
    """Centering is the caller's explicit step; refuse uncentered tables."""


@dataclass
class TrajectoryStats:
    """Per-trial path statistics; unused fields stay None."""

    trials: int
    n: int
    seed: int
    stream_base: int = 0
    sup_s: np.ndarray | None = None
    sup_m: np.ndarray | None = None
    sup_x: np.ndarray | None = None
    qv_norm: np.ndarray | None = None
    terminal_s: np.ndarray | None = None
    terminal_m: np.ndarray | None = None
    decomposition_max_err: float | None = None
    weights: np.ndarray | None = None

    def to_csv(self, path):
        """One row per trial with whichever statistics were collected."""
        cols = [
            ("sup_s", self.sup_s),
            ("sup_m", self.sup_m),
            ("sup_x", self.sup_x),
            ("qv_norm", self.qv_norm),
            ("weight", self.weights),
        ]
        cols = [(name, vals) for name, vals in cols if vals is not None]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial"] + [name for name, _ in cols])
            for i in range(self.trials):
                writer.writerow([i] + [repr(float(vals[i])) for _, vals in cols])


@dataclass
class EmpiricalMoment:
    """Empirical L^p norm with a one-sided 0.99 bootstrap upper bound."""

    p: float
    point: float
    upper: float
    trials: int


def _worker_count(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("MCBOUND_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _run_chunks(trials, workers, fn):
    """Apply fn(start, stop) over contiguous trial chunks, possibly threaded.

    fn writes results into preallocated per-trial slots, so scheduling order
    cannot change any output.
    """
    spans = [(s, min(s + _CHUNK, trials)) for s in range(0, trials, _CHUNK)]
    n_workers = _worker_count(workers)
    if n_workers == 1 or len(spans) == 1:
        for a, b in spans:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        list(pool.map(lambda ab: fn(*ab), spans))


def _chunk_paths(chain, init_cum, length, seed, stream_base, start, stop):
    uniforms = np.stack(
        [trial_uniforms(seed, stream_base + t, length) for t in range(start, stop)]
    )
    return _kernels.sample_paths(chain._row_cum, init_cum, uniforms)


def _state_counts(paths, m):
    counts = np.zeros((paths.shape[0], m), dtype=np.float64)
    for i, row in enumerate(paths):
        counts[i] = np.bincount(row, minlength=m)
    return counts


def simulate_sums(chain, table, n, trials, init="stationary", seed=0, stream_base=0,
                  collect_terminal=False, workers=None):
    """Per trial, sample a path and record sup_{k<=n} ||S_k||.

    Rectangular tables are handled through their norm-preserving self-adjoint
    dilation, which commutes with summation; terminal S_n is then the
    top-right block.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    if not table.is_centered(chain):
        raise UncenteredTableError("table is not centered; run center_and_norms first")
    init_cum = np.cumsum(_resolve_init(chain, init)).copy()
    if table.hermitian:
        steps = table.values
        rect_shape = None
    else:
        d1, d2 = table.shape
        side = d1 + d2
        steps = np.zeros((table.n_states, side, side), dtype=np.complex128)
        steps[:, :d1, d1:] = table.values
        steps[:, d1:, :d1] = np.conj(np.swapaxes(table.values, -1, -2))
        rect_shape = (d1, d2)
    steps = np.ascontiguousarray(steps)
    sup_s = np.zeros(trials)
    d = steps.shape[1]
    terminal = np.zeros((trials, d, d), dtype=np.complex128) if collect_terminal else None

    def work(a, b):
        paths = _chunk_paths(chain, init_cum, n, seed, stream_base, a, b)
        sup, term = _kernels.running_sup_sum(steps, paths, collect_terminal)
        sup_s[a:b] = sup
        if collect_terminal:
            terminal[a:b] = term

    _run_chunks(trials, workers, work)
    if collect_terminal and rect_shape is not None:
        terminal = terminal[:, : rect_shape[0], rect_shape[0]:]
    return TrajectoryStats(
        trials=trials, n=n, seed=seed, stream_base=stream_base,
        sup_s=sup_s, terminal_s=terminal,
    )


def simulate_martingale(chain, solution, n, trials, init="stationary", seed=0,
                        stream_base=0, collect_terminal=False, workers=None):
    """Simulate the Poisson-decomposition martingale along chain paths.

    Builds X_k = G(Z_k) - (QG)(Z_{k-1}), records sup ||M_k||, sup ||X_k||,
    the terminal quadratic-variation norm ||<M>_n|| = ||sum_k H(Z_{k-1})||,
    and the worst per-path decomposition error ||S_n - (M_n + G(Z_0) - G(Z_n))||.
    """
    if solution.g.shape[0] != chain.n_states:
        raise ValueError("solution and chain state counts differ")
    if solution.block != 1:
        raise ValueError("martingale simulation requires an unblocked solution")
    m = chain.n_states
    d = solution.g.shape[1]
    g, qg, h = solution.g, solution.qg, solution.h
    f = g - qg
    pair_steps = np.ascontiguousarray(
        (g[None, :, :, :] - qg[:, None, :, :]).reshape(m * m, d, d)
    )
    pair_norms = np.abs(np.linalg.eigvalsh(pair_steps)).max(axis=1)
    init_cum = np.cumsum(_resolve_init(chain, init)).copy()
    sup_m = np.zeros(trials)
    sup_x = np.zeros(trials)
    qv_norm = np.zeros(trials)
    decomp_err = np.zeros(trials)
    terminal_m = np.zeros((trials, d, d), dtype=np.complex128) if collect_terminal else None

    def work(a, b):
        paths = _chunk_paths(chain, init_cum, n + 1, seed, stream_base, a, b)
        pair_idx = paths[:, :-1] * m + paths[:, 1:]
        sup, term_m = _kernels.running_sup_sum(pair_steps, pair_idx, True)
        sup_m[a:b] = sup
        sup_x[a:b] = pair_norms[pair_idx].max(axis=1)
        counts = _state_counts(paths[:, :-1], m)
        qv = np.tensordot(counts, h, axes=([1], [0]))
        qv_norm[a:b] = np.abs(np.linalg.eigvalsh(qv)).max(axis=1)
        s_n = np.tensordot(counts, f, axes=([1], [0]))
        recon = term_m + g[paths[:, 0]] - g[paths[:, -1]]
        decomp_err[a:b] = np.abs(np.linalg.eigvalsh(s_n - recon)).max(axis=1)
        if collect_terminal:
            terminal_m[a:b] = term_m

    _run_chunks(trials, workers, work)
    return TrajectoryStats(
        trials=trials, n=n, seed=seed, stream_base=stream_base,
        sup_m=sup_m, sup_x=sup_x, qv_norm=qv_norm, terminal_m=terminal_m,
        decomposition_max_err=float(decomp_err.max()),
    )


def empirical_lp(samples, p):
    """(mean x^p)^(1/p) with a seeded nonparametric bootstrap 0.99 upper bound."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    if p < 1:
        raise ValueError("p must be >= 1")
    point = float(np.mean(x**p) ** (1.0 / p))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(_BOOTSTRAP_SEED)))
    idx = rng.integers(0, x.size, size=(_BOOTSTRAP_RESAMPLES, x.size))
    stats = np.mean(x[idx] ** p, axis=1) ** (1.0 / p)
    upper = max(point, float(np.quantile(stats, 0.99)))
    return EmpiricalMoment(p=float(p), point=point, upper=upper, trials=int(x.size))


def synth_symmetric_martingale(step_matrices, trials="exhaustive", seed=0):
    """Sign-symmetric martingale M_k = sum_{j<=k} eps_j A_j.

    "exhaustive" enumerates all 2^m sign patterns (m <= 20) with equal exact
    probabilities; an integer runs seeded Monte Carlo from one master-seeded
    generator (sign draws are never parallelized, so worker count is moot).
    The quadratic variation sum_j A_j^2 is sign-independent.
    """
    mats = [
        s.a if isinstance(s, HermitianMatrix) else HermitianMatrix(s).a
        for s in step_matrices
    ]
    if not mats:
        raise ValueError("steps must be nonempty")
    steps = np.stack(mats)
    m, d = steps.shape[0], steps.shape[1]
    if trials == "exhaustive":
        if 2**m > 2**20:
            raise ValueError(f"exhaustive enumeration cap exceeded: 2^{m} patterns")
        count = 2**m
        patterns = np.arange(count, dtype=np.int64)
        signs = 1 - 2 * ((patterns[:, None] >> np.arange(m)) & 1)
    else:
        count = int(trials)
        if count < 1:
            raise ValueError("trials must be >= 1")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
        signs = 1 - 2 * rng.integers(0, 2, size=(count, m), dtype=np.int64)
    signed = np.ascontiguousarray(
        np.concatenate([steps, -steps], axis=0)
    )
    idx = np.where(signs > 0, np.arange(m)[None, :], np.arange(m)[None, :] + m)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    sup = np.zeros(count)
    term = np.zeros((count, d, d), dtype=np.complex128)
    for a in range(0, count, 4096):
        b = min(a + 4096, count)
        sup[a:b], term[a:b] = _kernels.running_sup_sum(signed, idx[a:b], True)
    qv = np.sum(steps @ steps, axis=0)
    qv_val = float(np.abs(np.linalg.eigvalsh(qv)).max())
    sup_x = float(np.abs(np.linalg.eigvalsh(steps)).max())
    return TrajectoryStats(
        trials=count, n=m, seed=0 if trials == "exhaustive" else int(seed),
        sup_m=sup, sup_x=np.full(count, sup_x), qv_norm=np.full(count, qv_val),
        terminal_m=term,
        weights=np.full(count, 1.0 / count) if trials == "exhaustive" else None,
    )
