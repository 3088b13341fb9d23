"""Exact matrix Poisson equation machinery.

Solves G - QG = F for per-state matrix tables, computes the conditional
variance function H = QG^2 - (QG)^2 and the long-run variance, and provides
blocked solutions G_t with G_t - Q^t G_t = F.

Two independent long-run variance routes are always computed and returned:
pi(H), and the truncated autocovariance series with a certified geometric
tail.  Their agreement is the single best bug detector in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SERIES_CAP = 100_000


class UncenteredTableError(ValueError):
    """The forcing table must satisfy pi(F) = 0 before solving."""


class SeriesDivergenceError(RuntimeError):
    """The certified series truncation did not converge within the cap."""


@dataclass
class PoissonSolution:
    """Solution bundle for G - Q^block G = F.

    sigma is pi(H); sigma_series is the independently truncated
    autocovariance sum; residual is max_z ||G - Q^block G - F||.
    """

    g: np.ndarray
    qg: np.ndarray
    h: np.ndarray
    sigma: np.ndarray
    sigma_series: np.ndarray
    residual: float
    series_terms_used: int
    tail_bound: float
    block: int = 1

    @property
    def sup_norm_g(self):
        return float(np.abs(np.linalg.eigvalsh(self.g)).max())

    def h_min_eigenvalue(self):
        """Smallest eigenvalue of any H(z); H should be PSD."""
        return float(np.linalg.eigvalsh(self.h).min())

    def sigma_route_gap(self):
        """Spectral-norm disagreement between the two Sigma routes."""
        return float(np.abs(np.linalg.eigvalsh(self.sigma - self.sigma_series)).max())

    def to_json(self):
        def encode(mat):
            return [[[float(z.real), float(z.imag)] for z in row] for row in mat]

        return {
            "block": self.block,
            "G": [encode(m) for m in self.g],
            "QG": [encode(m) for m in self.qg],
            "H": [encode(m) for m in self.h],
            "sigma": encode(self.sigma),
            "sigma_series": encode(self.sigma_series),
            "residual": self.residual,
            "series_terms_used": self.series_terms_used,
            "tail_bound": self.tail_bound,
        }


@dataclass
class RectLongRunProxy:
    """Rectangular long-run variance proxy: max of the two one-sided norms."""

    value: float
    left_part: np.ndarray
    right_part: np.ndarray
    series_terms_used: int
    tail_bound: float


def _hermitize(stack):
    return (stack + np.conj(np.swapaxes(stack, -1, -2))) / 2


def _apply_kernel(q, stack):
    """(Q F)(z) = sum_z' Q(z, z') F(z') for a per-state stack."""
    return np.tensordot(q, stack, axes=([1], [0]))


def _sup_norm_herm(stack):
    return float(np.abs(np.linalg.eigvalsh(stack)).max())


def _geometric_tail(t_mix, from_k):
    """Exact sum_{j >= from_k} 2 (1/4)^floor(j/t): closed form per block."""
    a, b = divmod(from_k, t_mix)
    return 2.0 * 0.25**a * ((t_mix - b) + t_mix / 3.0)


def _require_centered(chain, table, tol=1e-10):
    mean = table.pi_mean(chain)
    norm = float(np.linalg.svd(mean, compute_uv=False).max())
    if norm > tol:
        raise UncenteredTableError(
            f"pi(F) has norm {norm:.3e}; center the table first (center_and_norms)"
        )


def solve_poisson(chain, table, method="direct", series_tol=1e-12):
    """Solve G - QG = F and assemble H, Sigma, and diagnostics.

    "direct" solves the nonsingular system (I - Q + 1 pi^T) G = F, exact at
    machine precision for desk-scale chains; "series" sums Q^k F with the
    remainder certified through the mixing envelope.  Both routes populate
    sigma = pi(H) and sigma_series (truncated autocovariances).
    """
    if not table.hermitian:
        raise ValueError(
            "solve_poisson expects a self-adjoint table; "
            "use long_run_variance_rect for rectangular tables"
        )
    if table.n_states != chain.n_states:
        raise ValueError("table and chain state counts differ")
    _require_centered(chain, table)
    f = table.values
    m = chain.n_states
    if method == "direct":
        a = np.eye(m) - chain.q + np.outer(np.ones(m), chain.pi)
        g = np.linalg.solve(a, f.reshape(m, -1)).reshape(f.shape)
        terms, tail = 0, 0.0
    elif method == "series":
        g, terms, tail = _series_solve(chain, f, series_tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    g = _hermitize(g)
    qg = _hermitize(_apply_kernel(chain.q, g))
    residual = _sup_norm_herm(g - qg - f)
    h = _hermitize(_apply_kernel(chain.q, g @ g) - qg @ qg)
    sigma = _hermitize(np.tensordot(chain.pi, h, axes=([0], [0]))[None])[0]
    sigma_series, s_terms, s_tail = _sigma_series(chain, f, series_tol)
    return PoissonSolution(
        g=g,
        qg=qg,
        h=h,
        sigma=sigma,
        sigma_series=sigma_series,
        residual=residual,
        series_terms_used=max(terms, s_terms),
        tail_bound=max(tail, s_tail),
        block=1,
    )


def _series_solve(chain, f, series_tol):
    t_mix = chain.mixing().t_mix
    sup_f = _sup_norm_herm(f)
    if sup_f == 0.0:
        return np.zeros_like(f), 0, 0.0
    g = f.copy()
    term = f
    for k in range(1, _SERIES_CAP):
        term = _apply_kernel(chain.q, term)
        g = g + term
        tail = sup_f * _geometric_tail(t_mix, k + 1)
        if tail <= series_tol:
            return g, k + 1, tail
    raise SeriesDivergenceError(f"series did not certify within {_SERIES_CAP} terms")


def _sigma_series(chain, f, series_tol):
    """pi(F^2) + sum_k pi(F Q^k F + (Q^k F) F), truncated with certified tail.

    The k-th term has norm at most 2 ||F||_inf^2 sup-TV(k), so the mixing
    envelope certifies the remainder.
    """
    pi = chain.pi
    sup_f = _sup_norm_herm(f)
    sigma = np.tensordot(pi, f @ f, axes=([0], [0]))
    if sup_f == 0.0:
        return _hermitize(sigma[None])[0], 0, 0.0
    t_mix = chain.mixing().t_mix
    term = f
    tol = min(series_tol, 1e-10)
    for k in range(1, _SERIES_CAP):
        term = _apply_kernel(chain.q, term)
        cross = np.einsum("z,zij,zjk->ik", pi, f, term) + np.einsum(
            "z,zij,zjk->ik", pi, term, f
        )
        sigma = sigma + cross
        tail = 2.0 * sup_f**2 * _geometric_tail(t_mix, k + 1)
        if tail <= tol:
            return _hermitize(sigma[None])[0], k, tail
    raise SeriesDivergenceError(f"sigma series did not certify within {_SERIES_CAP} terms")


def blocked_solution(chain, table, block, series_tol=1e-12):
    """Solve G_t - Q^t G_t = F on the t-step skeleton kernel (same pi)."""
    if block < 1:
        raise ValueError("block length must be >= 1")
    skeleton = chain.skeleton(block)
    sol = solve_poisson(skeleton, table, method="direct", series_tol=series_tol)
    sol.block = block
    return sol


def long_run_variance_rect(chain, table, series_tol=1e-12):
    """Rectangular long-run variance proxy.

    Accumulates both one-sided sums (RR* and R*R orientations) by certified
    truncation; value is the larger spectral norm.
    """
    if table.n_states != chain.n_states:
        raise ValueError("table and chain state counts differ")
    r = table.values
    mean = np.tensordot(chain.pi, r, axes=([0], [0]))
    if float(np.linalg.svd(mean, compute_uv=False).max()) > 1e-10:
        raise UncenteredTableError("pi(R) must vanish; center the table first")
    pi = chain.pi
    r_star = np.conj(np.swapaxes(r, -1, -2))
    left = np.einsum("z,zij,zjk->ik", pi, r, r_star)
    right = np.einsum("z,zij,zjk->ik", pi, r_star, r)
    sup_r = float(np.linalg.svd(r, compute_uv=False).max())
    terms, tail = 0, 0.0
    if sup_r > 0.0:
        t_mix = chain.mixing().t_mix
        term = r
        tol = min(series_tol, 1e-10)
        for k in range(1, _SERIES_CAP):
            term = _apply_kernel(chain.q, term)
            term_star = np.conj(np.swapaxes(term, -1, -2))
            left = left + np.einsum("z,zij,zjk->ik", pi, r, term_star) + np.einsum(
                "z,zij,zjk->ik", pi, term, r_star
            )
            right = right + np.einsum("z,zij,zjk->ik", pi, r_star, term) + np.einsum(
                "z,zij,zjk->ik", pi, term_star, r
            )
            tail = 2.0 * sup_r**2 * _geometric_tail(t_mix, k + 1)
            if tail <= tol:
                terms = k
                break
        else:
            raise SeriesDivergenceError("rectangular series did not certify")
    left = _hermitize(left[None])[0]
    right = _hermitize(right[None])[0]
    value = max(_sup_norm_herm(left[None]), _sup_norm_herm(right[None]))
    return RectLongRunProxy(
        value=value, left_part=left, right_part=right, series_terms_used=terms, tail_bound=tail
    )
