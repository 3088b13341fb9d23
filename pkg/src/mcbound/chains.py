"""Finite-state Markov chains: stationary laws, ergodicity certificates,
matrix/vector function tables, and seeded path sampling.

Total variation is the total-mass convention throughout: the distance between
two mutually singular probability measures is 2, matching sum_z |p_z - q_z|.
Many libraries halve this; we do not.

Numerical floor: computed sup-TV curves bottom out at round-off (~1e-15) and
cannot certify envelope values below that, so every mixing check treats a
measured value <= TV_FLOOR (1e-10) as converged to stationarity; monotonicity
of TV-to-pi in the step count then covers the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .linalg import HermitianMatrix, RectMatrix

TV_FLOOR = 1e-10

_ROW_SUM_ATOL = 1e-12
_EIG_ONE_TOL = 1e-8


class NonUniqueStationaryError(ValueError):
    """The eigenvalue-1 space of the kernel is not one-dimensional."""


class NoMixingError(ValueError):
    """Total variation to the stationary law does not decay (periodic chain)."""


class InconclusiveCertificateError(ValueError):
    """The horizon is too small to certify the geometric tail."""


class InvalidLyapunovError(ValueError):
    """Lyapunov weights must be >= e everywhere."""


def stationary_distribution(chain_or_q):
    """Stationary probability vector of an irreducible kernel.

    Solves for the 1-eigenvector of the transpose with deterministic
    normalization; raises NonUniqueStationaryError when the eigenvalue-1
    space has numerical dimension > 1 (reducible chains).
    """
    if isinstance(chain_or_q, FiniteChain):
        return chain_or_q.pi
    q = np.asarray(chain_or_q, dtype=np.float64)
    return _solve_stationary(q)


def _solve_stationary(q):
    w, v = np.linalg.eig(q.T)
    close = np.abs(w - 1.0) < _EIG_ONE_TOL
    if close.sum() != 1:
        raise NonUniqueStationaryError(
            f"eigenvalue-1 space has numerical dimension {int(close.sum())}"
        )
    vec = np.real(v[:, close][:, 0])
    total = vec.sum()
    if total == 0:
        raise NonUniqueStationaryError("degenerate stationary eigenvector")
    pi = vec / total
    pi = np.where(np.abs(pi) < 1e-14, 0.0, pi)
    if pi.min() < 0:
        raise NonUniqueStationaryError("stationary eigenvector has negative mass")
    pi = pi / pi.sum()
    resid = np.abs(pi @ q - pi).max()
    if resid > 1e-10:
        raise NonUniqueStationaryError(f"stationary residual {resid:.3e} exceeds 1e-10")
    return pi


class FiniteChain:
    """Row-stochastic transition matrix with computed stationary law.

    Immutable after construction; mixing-related quantities are cached
    lazily.  `lyapunov` optionally carries per-state weights V(z) >= e for
    the V-weighted ergodicity machinery.
    """

    def __init__(self, q, labels=None, lyapunov=None):
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"transition matrix must be square, got {q.shape}")
        if q.min() < 0:
            raise ValueError("transition probabilities must be nonnegative")
        row_err = np.abs(q.sum(axis=1) - 1.0).max()
        if row_err > _ROW_SUM_ATOL:
            raise ValueError(f"rows must sum to 1 within {_ROW_SUM_ATOL}, max error {row_err:.3e}")
        self.q = q.copy()
        self.q.setflags(write=False)
        self.n_states = q.shape[0]
        self.labels = list(labels) if labels is not None else [str(i) for i in range(self.n_states)]
        if len(self.labels) != self.n_states:
            raise ValueError("label count does not match state count")
        self.pi = _solve_stationary(self.q)
        self.pi.setflags(write=False)
        if lyapunov is not None:
            lyapunov = np.asarray(lyapunov, dtype=np.float64)
            if lyapunov.shape != (self.n_states,):
                raise ValueError("lyapunov weights must be one per state")
            if lyapunov.min() < math.e - 1e-12:
                raise InvalidLyapunovError(f"min V = {lyapunov.min():.6f} < e")
            lyapunov = lyapunov.copy()
            lyapunov.setflags(write=False)
        self.lyapunov = lyapunov
        self._row_cum = np.cumsum(self.q, axis=1).copy()
        self._tv_vals = [float(np.abs(np.eye(self.n_states) - self.pi).sum(axis=1).max())]
        self._tv_power = np.eye(self.n_states)
        self._slem = None
        self._mixing = None

    def kernel_power(self, k):
        """Q^k as a dense matrix."""
        return np.linalg.matrix_power(self.q, k)

    @property
    def slem(self):
        """Second-largest eigenvalue modulus of Q."""
        if self._slem is None:
            w = np.sort(np.abs(np.linalg.eigvals(self.q)))
            self._slem = float(w[-2]) if len(w) > 1 else 0.0
        return self._slem

    def sup_tv_curve(self, horizon):
        """max_z ||Q^k(z,.) - pi||_TV for k = 0..horizon (cached incrementally)."""
        while len(self._tv_vals) <= horizon:
            self._tv_power = self._tv_power @ self.q
            self._tv_vals.append(
                float(np.abs(self._tv_power - self.pi).sum(axis=1).max())
            )
        return np.array(self._tv_vals[: horizon + 1])

    def mixing(self, horizon=None):
        """Cached ErgodicityProfile from mixing_time()."""
        if self._mixing is None:
            self._mixing = mixing_time(self, horizon)
        return self._mixing

    def skeleton(self, t):
        """Chain driven by Q^t (same stationary law)."""
        if t < 1:
            raise ValueError("block length must be >= 1")
        return FiniteChain(self.kernel_power(t), labels=self.labels, lyapunov=self.lyapunov)


@dataclass
class ErgodicityProfile:
    """Certified ergodicity constants over a finite horizon.

    `certificate` records how the tail beyond the horizon was covered:
    either the sup-TV curve reached the numerical floor (monotonicity covers
    the rest) or the spectral decay rate beats the envelope rate with an
    explicit hand-off margin.
    """

    t_mix: int | None = None
    kappa: float | None = None
    lyapunov: np.ndarray | None = None
    horizon: int = 0
    certificate: dict = field(default_factory=dict)


def tv_distance(p, q, weights=None):
    """sum_z w_z |p_z - q_z| with w = 1 by default (total-mass convention)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    diff = np.abs(p - q)
    if weights is None:
        return float(diff.sum())
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != p.shape:
        raise ValueError("weights must match the distribution length")
    if w.min() < 0:
        raise ValueError("weights must be nonnegative")
    return float((w * diff).sum())


def _display_rhs(k, t):
    return 2.0 * 0.25 ** (k // t)


def _tail_certificate(curve, t, horizon, slem):
    """Certify sup-TV(k) <= envelope + TV_FLOOR for all k > horizon.

    Case 1: the curve has reached the floor; TV-to-pi is nonincreasing in k,
    so every later value is under the floor.  Case 2: per-step spectral decay
    is at least the envelope's 4^(-1/t) and the modeled tail
    curve[horizon] * slem^(k - horizon) stays under envelope + floor until it
    sinks below the floor.
    """
    last = curve[horizon]
    if last <= TV_FLOOR:
        return {"kind": "floor", "sup_tv_at_horizon": float(last)}
    rate = 0.25 ** (1.0 / t)
    if slem > rate * (1 + 1e-12):
        return None
    val = last
    k = horizon
    while val > TV_FLOOR:
        k += 1
        val *= slem
        if k - horizon > 10_000:
            return None
        if val > _display_rhs(k, t) + TV_FLOOR:
            return None
    return {
        "kind": "spectral",
        "sup_tv_at_horizon": float(last),
        "slem": float(slem),
        "covered_until": int(k),
    }


def mixing_time(chain, horizon=None):
    """Smallest t whose uniform-ergodicity display is certified.

    The display sup_z ||Q^k(z,.) - pi||_TV <= 2 (1/4)^floor(k/t) is checked
    for every k up to the horizon (default max(200, 50 t) per candidate),
    within the additive TV_FLOOR; the tail beyond the horizon is covered by a
    geometric certificate.  Raises NoMixingError for periodic chains and
    InconclusiveCertificateError when the horizon cannot certify any t.
    """
    slem = chain.slem
    if slem >= 1.0 - 1e-10:
        raise NoMixingError(f"sup-TV does not decay: second eigenvalue modulus {slem:.12f}")
    t_cap = horizon if horizon is not None else 1000
    diagnostics = []
    for t in range(1, t_cap + 1):
        k_max = horizon if horizon is not None else max(200, 50 * t)
        curve = chain.sup_tv_curve(k_max)
        ok = True
        for k in range(k_max + 1):
            if curve[k] > _display_rhs(k, t) + TV_FLOOR:
                diagnostics.append((t, k, float(curve[k])))
                ok = False
                break
        if not ok:
            continue
        cert = _tail_certificate(curve, t, k_max, slem)
        if cert is None:
            diagnostics.append((t, "tail", float(curve[k_max])))
            continue
        return ErgodicityProfile(
            t_mix=t, lyapunov=chain.lyapunov, horizon=k_max, certificate=cert
        )
    raise InconclusiveCertificateError(
        f"no t <= {t_cap} certified; first failures {diagnostics[:3]}"
    )


def v_ergodicity_kappa(chain, lyapunov, t_mix, horizon=None):
    """Smallest kappa >= 1 certifying the pairwise V-weighted display.

    For every k up to the horizon, kappa must dominate
    max_{z,z'} ||Q^k(z,.) - Q^k(z',.)||_V / (V(z)+V(z')) divided by
    (1/4)^floor(k/t_mix); ratios at or below the numerical floor are treated
    as converged.  A geometric tail certificate mirrors mixing_time.
    """
    v = np.asarray(lyapunov, dtype=np.float64)
    if v.shape != (chain.n_states,):
        raise ValueError("lyapunov weights must be one per state")
    if v.min() < math.e - 1e-12:
        raise InvalidLyapunovError(f"min V = {v.min():.6f} < e")
    if t_mix < 1:
        raise ValueError("t_mix must be >= 1")
    k_max = horizon if horizon is not None else max(200, 50 * t_mix)
    pair_norm = v[:, None] + v[None, :]
    cur = np.eye(chain.n_states)
    kappa = 1.0
    ratios = []
    for k in range(k_max + 1):
        diff = cur[:, None, :] - cur[None, :, :]
        vtv = np.abs(diff) @ v
        ratio = float((vtv / pair_norm).max())
        ratios.append(ratio)
        if ratio > TV_FLOOR:
            kappa = max(kappa, ratio / 0.25 ** (k // t_mix))
        cur = cur @ chain.q
    slem = chain.slem
    last = ratios[-1]
    if last <= TV_FLOOR:
        cert = {"kind": "floor", "ratio_at_horizon": float(last)}
    else:
        rate = 0.25 ** (1.0 / t_mix)
        if slem > rate * (1 + 1e-12):
            raise InconclusiveCertificateError(
                f"V-TV decay rate {slem:.6f} slower than envelope rate {rate:.6f}"
            )
        cert = {"kind": "spectral", "ratio_at_horizon": float(last), "slem": float(slem)}
    return ErgodicityProfile(
        t_mix=int(t_mix), kappa=float(kappa), lyapunov=v, horizon=k_max, certificate=cert
    )


class MatrixFunctionTable:
    """Per-state matrix values F(z) with norm caches.

    `values` is an (n_states, d, d) complex stack for self-adjoint tables or
    (n_states, d1, d2) for rectangular ones.  Centered tables (built by
    center_and_norms) carry the sup-norm and requested V-norm caches.
    """

    def __init__(self, values, hermitian=True):
        if isinstance(values, (list, tuple)):
            mats = [
                v.a if isinstance(v, (HermitianMatrix, RectMatrix)) else np.asarray(v)
                for v in values
            ]
            values = np.stack(mats)
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim != 3:
            raise ValueError("expected a stack of per-state matrices")
        if hermitian:
            if values.shape[1] != values.shape[2]:
                raise ValueError("self-adjoint table requires square matrices")
            asym = np.abs(values - values.conj().transpose(0, 2, 1)).max()
            if asym > 1e-12:
                raise ValueError(f"table not self-adjoint: max asymmetry {asym:.3e}")
            values = (values + values.conj().transpose(0, 2, 1)) / 2
        self.values = values.copy()
        self.values.setflags(write=False)
        self.hermitian = bool(hermitian)
        self.n_states = values.shape[0]
        self.shape = values.shape[1:]
        self.pi_f = None
        self.sup_norm = None
        self.v_norms = {}

    def state_norms(self):
        """Spectral norm of F(z) for each state."""
        if self.hermitian:
            return np.abs(np.linalg.eigvalsh(self.values)).max(axis=1)
        return np.linalg.svd(self.values, compute_uv=False).max(axis=1)

    def pi_mean(self, chain):
        """pi(F) = sum_z pi_z F(z)."""
        return np.tensordot(chain.pi, self.values, axes=([0], [0]))

    def is_centered(self, chain, tol=1e-10):
        mean = self.pi_mean(chain)
        if self.hermitian:
            return float(np.abs(np.linalg.eigvalsh((mean + mean.conj().T) / 2)).max()) <= tol
        return float(np.linalg.svd(mean, compute_uv=False).max()) <= tol


def center_and_norms(table, chain, alphas=()):
    """Return the pi-centered table with sup-norm and V-norm caches filled."""
    if table.n_states != chain.n_states:
        raise ValueError(
            f"state mismatch: table has {table.n_states}, chain has {chain.n_states}"
        )
    mean = table.pi_mean(chain)
    centered = MatrixFunctionTable(table.values - mean[None, :, :], hermitian=table.hermitian)
    centered.pi_f = centered.pi_mean(chain)
    norms = centered.state_norms()
    centered.sup_norm = float(norms.max())
    if alphas:
        if chain.lyapunov is None:
            raise ValueError("V-norms requested but the chain has no lyapunov weights")
        for alpha in alphas:
            centered.v_norms[float(alpha)] = float(
                (norms / chain.lyapunov ** float(alpha)).max()
            )
    return centered


def _resolve_init(chain, init):
    if isinstance(init, str):
        if init != "stationary":
            raise ValueError(f"unknown init spec {init!r}")
        return chain.pi
    vec = np.asarray(init, dtype=np.float64)
    if vec.shape != (chain.n_states,):
        raise ValueError("init distribution length does not match the chain")
    if vec.min() < 0 or abs(vec.sum() - 1.0) > 1e-9:
        raise ValueError("init must be a probability vector")
    return vec


def trial_uniforms(seed, stream, length):
    """Deterministic per-(seed, stream) uniform draws."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss)).random(length)


def sample_path(chain, init, length, seed, stream=0):
    """One path Z_0..Z_{length-1}; identical (seed, stream, config) give
    identical sequences regardless of execution parallelism."""
    if length < 1:
        raise ValueError("length must be >= 1")
    init_vec = _resolve_init(chain, init)
    uniforms = trial_uniforms(seed, stream, length).reshape(1, length)
    init_cum = np.cumsum(init_vec).copy()
    paths = _kernels.sample_paths(chain._row_cum, init_cum, uniforms)
    return paths[0]


def chain_to_json(chain):
    """Chain config payload: {"Q": rows, "labels": [...], "V": [...]?}."""
    out = {"Q": chain.q.tolist(), "labels": list(chain.labels)}
    if chain.lyapunov is not None:
        out["V"] = chain.lyapunov.tolist()
    return out


def chain_from_json(payload):
    return FiniteChain(
        np.asarray(payload["Q"], dtype=np.float64),
        labels=payload.get("labels"),
        lyapunov=payload.get("V"),
    )


def table_to_json(table):
    """Function-table payload: per-state matrices keyed by state index."""
    return {
        "hermitian": table.hermitian,
        "matrices": [
            [[[float(z.real), float(z.imag)] for z in row] for row in mat]
            for mat in table.values
        ],
    }


def table_from_json(payload):
    mats = [
        np.array([[complex(re, im) for re, im in row] for row in mat], dtype=np.complex128)
        for mat in payload["matrices"]
    ]
    return MatrixFunctionTable(np.stack(mats), hermitian=payload.get("hermitian", True))
