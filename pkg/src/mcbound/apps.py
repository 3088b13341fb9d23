"""Covariance estimation and PCA on Markovian data, plus the
Schur-complement envelope behind the dimension-free factors.

The PCA error bound is reported through the explicit perturbation route
sin(theta) <= 2 ||Sigma_hat - Sigma|| / (lambda_1 - lambda_2) applied to the
realized per-trial error; the unspecified universal constant of the
high-probability display is exposed only as a registry display field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import DEFAULT_REGISTRY, BoundInput, bernstein_rhs, dimension_factor
from .chains import MatrixFunctionTable
from .linalg import HermitianMatrix, loewner_leq
from .poisson import solve_poisson
from .simulate import simulate_sums


class EnvelopeError(ValueError):
    """The requested Schur envelope does not dominate the function."""


@dataclass
class VectorFunctionTable:
    """Per-state real vectors f(z) with a cached sup of Euclidean norms."""

    values: np.ndarray
    sup_norm: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("expected an (n_states, d) array of per-state vectors")
        self.values = values.copy()
        self.values.setflags(write=False)
        self.sup_norm = float(np.linalg.norm(values, axis=1).max())

    @property
    def n_states(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]


@dataclass
class SchurEnvelopeReport:
    """Coefficient condition value per state and the implied dominations."""

    holds: bool
    condition_values: np.ndarray
    ff_dominated: bool | None = None
    f2_dominated: bool | None = None


@dataclass
class CovPcaResult:
    """Covariance / PCA experiment outputs, one entry per trial where noted."""

    sigma: np.ndarray
    sigma_hat: np.ndarray            # (trials, d, d)
    realized_sup_error: np.ndarray   # (1/n) sup_{k<=n} ||S_k||, per trial
    terminal_error: np.ndarray       # ||Sigma_hat_n - Sigma||, per trial
    bernstein_bound: float
    sigma_pi_norm: float
    eigen_gap: float
    n: int
    trials: int
    delta: float
    seed: int
    dim_free_factor: float | None = None
    sin2: np.ndarray | None = None
    sin2_bound: np.ndarray | None = None

    def csv_rows(self):
        rows = []
        for i in range(self.trials):
            rows.append({
                "trial": i,
                "n": self.n,
                "trials": self.trials,
                "realized_error": float(self.realized_sup_error[i]),
                "bound": self.bernstein_bound,
                "sin2": float(self.sin2[i]) if self.sin2 is not None else "",
                "sin2_bound": float(self.sin2_bound[i]) if self.sin2_bound is not None else "",
                "dim_factor": self.dim_free_factor if self.dim_free_factor is not None else "",
            })
        return rows


def schur_envelope_check(f, upsilon, chain=None, tol=1e-8):
    """Expand f on the eigenbasis of the envelope and test the coefficient
    condition sup_z sum_i alpha_i(z)^2 / mu_i <= 1 (0/0 := 0, 1/0 := inf).

    When the condition holds, additionally verifies f(z) f(z)^T <= Y in the
    Loewner order for every state, and, when a chain is supplied (so Sigma =
    pi(f f^T) is available), F(z)^2 <= 4 ||f||_inf^2 Y as well.
    """
    ups = upsilon if isinstance(upsilon, HermitianMatrix) else HermitianMatrix(upsilon)
    mu, u = np.linalg.eigh(ups.a)
    if mu.min() < -1e-9 * max(float(np.abs(mu).max()), 1e-30):
        raise EnvelopeError("envelope matrix must be PSD")
    mu = np.maximum(mu, 0.0)
    alpha = f.values @ np.real(u)
    vals = np.empty(f.n_states)
    for z in range(f.n_states):
        total = 0.0
        for i in range(len(mu)):
            a2 = alpha[z, i] ** 2
            if mu[i] > 0:
                total += a2 / mu[i]
            elif a2 > 1e-24:
                total = np.inf
                break
        vals[z] = total
    holds = bool(vals.max() <= 1.0 + 1e-12)
    if not holds:
        return SchurEnvelopeReport(holds=False, condition_values=vals)
    ff_ok = all(
        loewner_leq(np.outer(f.values[z], f.values[z]), ups.a, tol=tol).holds
        for z in range(f.n_states)
    )
    f2_ok = None
    if chain is not None:
        sigma, table = _covariance_table(chain, f)
        envelope = 4.0 * f.sup_norm**2 * ups.a
        f2_ok = all(
            loewner_leq(table.values[z] @ table.values[z], envelope, tol=tol).holds
            for z in range(f.n_states)
        )
    return SchurEnvelopeReport(
        holds=True, condition_values=vals, ff_dominated=ff_ok, f2_dominated=f2_ok
    )


def _covariance_table(chain, f):
    sigma = np.einsum("z,zi,zj->ij", chain.pi, f.values, f.values)
    stack = np.einsum("zi,zj->zij", f.values, f.values) - sigma[None]
    return sigma, MatrixFunctionTable(stack.astype(np.complex128), hermitian=True)


def covariance_experiment(chain, f, n, trials, delta, seed, upsilon=None,
                          registry=DEFAULT_REGISTRY, workers=None):
    """Estimate pi(f f^T) from chain paths and compare the realized errors
    against the high-probability CLT-matching bound.

    The forcing function F(z) = f(z) f(z)^T - Sigma is centered by
    construction (Sigma is computed from pi exactly).  With an envelope Y
    supplied and verified, the dimension-free effective-rank factor for
    F^2 <= 4 ||f||_inf^2 Y is reported, clamped at ||Sigma_pi(F)|| (its
    large-n limit).
    """
    if f.n_states != chain.n_states:
        raise ValueError("vector table and chain state counts differ")
    sigma, table = _covariance_table(chain, f)
    sup_f = float(np.abs(np.linalg.eigvalsh(table.values)).max())
    sol = solve_poisson(chain, table)
    sigma_pi_norm = float(np.abs(np.linalg.eigvalsh(sol.sigma)).max())
    t_mix = chain.mixing().t_mix
    inp = BoundInput(
        p=2.0, n=n, dim_factor=max(1.0, float(f.dim)), t_mix=t_mix,
        sup_norm=sup_f, sigma_norm=sigma_pi_norm, delta=delta,
    )
    bound = bernstein_rhs(inp, registry=registry)
    stats = simulate_sums(
        chain, table, n=n, trials=trials, init="stationary", seed=seed,
        collect_terminal=True, workers=workers,
    )
    realized = stats.sup_s / n
    terminal_err = np.abs(np.linalg.eigvalsh(stats.terminal_s / n)).max(axis=1)
    sigma_hat = np.real(stats.terminal_s / n) + sigma[None]
    dim_free = None
    if upsilon is not None:
        report = schur_envelope_check(f, upsilon, chain=chain)
        if not report.holds:
            raise EnvelopeError(
                f"coefficient condition fails: max value {report.condition_values.max():.6g}"
            )
        ups = upsilon if isinstance(upsilon, HermitianMatrix) else HermitianMatrix(upsilon)
        f2_env = HermitianMatrix(4.0 * f.sup_norm**2 * ups.a)
        dim_free = dimension_factor(f2_env, t_mix, clamp_level=sigma_pi_norm)
    w = np.linalg.eigvalsh(sigma)
    gap = float(w[-1] - w[-2]) if len(w) > 1 else float(w[-1])
    return CovPcaResult(
        sigma=sigma, sigma_hat=sigma_hat, realized_sup_error=realized,
        terminal_error=terminal_err, bernstein_bound=float(bound),
        sigma_pi_norm=sigma_pi_norm, eigen_gap=gap, n=n, trials=trials,
        delta=delta, seed=seed, dim_free_factor=dim_free,
    )


def pca_experiment(result):
    """Augment a covariance experiment with per-trial leading-eigenvector
    errors sin^2 = 1 - (v1 . v1_hat)^2 and their perturbation bounds
    min(1, (2 ||Sigma_hat - Sigma|| / gap)^2)."""
    if result.eigen_gap <= 0:
        raise ValueError("PCA requires a positive eigen-gap lambda_1 - lambda_2")
    w, v = np.linalg.eigh(result.sigma)
    v1 = v[:, -1]
    sin2 = np.empty(result.trials)
    for i in range(result.trials):
        wh, vh = np.linalg.eigh(result.sigma_hat[i])
        v1h = vh[:, -1]
        sin2[i] = max(0.0, 1.0 - float(v1 @ v1h) ** 2)
    bound = np.minimum(1.0, (2.0 * result.terminal_error / result.eigen_gap) ** 2)
    result.sin2 = sin2
    result.sin2_bound = bound
    return result
