"""Pure-numpy versions of the hot-loop kernels.

Vectorized across trials instead of compiled per trial; results match the
extension backend up to eigensolver round-off (the path sampling logic is
bit-identical: both count cumulative entries <= u and clip to the last state).
"""

import numpy as np


def sample_paths(row_cum, init_cum, uniforms):
    """Map uniforms (trials, length) to state paths via cumulative rows."""
    n_trials, length = uniforms.shape
    m = init_cum.shape[0]
    path = np.empty((n_trials, length), dtype=np.int64)
    state = np.minimum(np.searchsorted(init_cum, uniforms[:, 0], side="right"), m - 1)
    path[:, 0] = state
    for k in range(1, length):
        u = uniforms[:, k]
        nxt = (row_cum[state] <= u[:, None]).sum(axis=1)
        state = np.minimum(nxt, m - 1)
        path[:, k] = state
    return path


def running_sup_sum(steps, idx, want_terminal=True):
    """Accumulate steps[idx[t, k]] over k; return per-trial sup spectral norm."""
    n_trials, length = idx.shape
    d = steps.shape[1]
    if d == 1:
        vals = steps[:, 0, 0][idx]
        csum = np.cumsum(vals, axis=1)
        sup = np.abs(csum).max(axis=1)
        terminal = csum[:, -1].reshape(n_trials, 1, 1).copy() if want_terminal else None
        return sup, terminal
    acc = np.zeros((n_trials, d, d), dtype=np.complex128)
    sup = np.zeros(n_trials)
    for k in range(length):
        acc += steps[idx[:, k]]
        norms = np.abs(np.linalg.eigvalsh(acc)).max(axis=1)
        np.maximum(sup, norms, out=sup)
    return sup, (acc if want_terminal else None)
