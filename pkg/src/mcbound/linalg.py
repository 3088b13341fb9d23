"""Dense self-adjoint and rectangular matrix primitives.

Spectral norms, the Hermitian dilation, effective rank, eigenvalue clamping,
and Loewner-order tests.  All values are immutable; construction symmetrizes
round-off-level asymmetry and rejects anything larger.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_ATOL = 1e-12


class DomainError(ValueError):
    """Input outside an operation's mathematical domain."""


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HermitianMatrix:
    """Dense self-adjoint matrix.

    Entries asymmetric by at most 1e-12 are symmetrized to (M + M*)/2 on
    construction (round-off hygiene); larger asymmetry is rejected so bugs are
    not masked.  The stored array is read-only with an exactly real diagonal.
    """

    a: np.ndarray

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("dimension must be >= 1")
        if not np.isfinite(arr).all():
            raise ValueError("matrix entries must be finite")
        asym = np.abs(arr - arr.conj().T).max()
        if asym > HERMITIAN_ATOL:
            raise ValueError(f"matrix is not self-adjoint: max asymmetry {asym:.3e}")
        object.__setattr__(self, "a", _freeze((arr + arr.conj().T) / 2))

    @property
    def dim(self):
        return self.a.shape[0]


@dataclass(frozen=True)
class RectMatrix:
    """Dense rectangular complex matrix."""

    a: np.ndarray

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError("both dimensions must be >= 1")
        if not np.isfinite(arr).all():
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "a", _freeze(arr.copy()))

    @property
    def rows(self):
        return self.a.shape[0]

    @property
    def cols(self):
        return self.a.shape[1]


@dataclass(frozen=True)
class PsdCheckResult:
    """Outcome of a positive-semidefiniteness test."""

    holds: bool
    min_eigenvalue: float
    tolerance: float


def _entries(m):
    if isinstance(m, (HermitianMatrix, RectMatrix)):
        return m.a
    return np.asarray(m, dtype=np.complex128)


def _is_hermitian_value(m):
    if isinstance(m, HermitianMatrix):
        return True
    if isinstance(m, RectMatrix):
        return False
    arr = _entries(m)
    return (
        arr.shape[0] == arr.shape[1]
        and np.abs(arr - arr.conj().T).max() <= HERMITIAN_ATOL
    )


def spectral_norm(m):
    """Largest singular value; for self-adjoint input, max |eigenvalue|."""
    arr = _entries(m)
    if not np.isfinite(arr).all():
        raise ValueError("matrix entries must be finite")
    if arr.size == 0:
        raise ValueError("empty matrix")
    if _is_hermitian_value(m):
        return float(np.abs(np.linalg.eigvalsh(arr)).max())
    return float(np.linalg.svd(arr, compute_uv=False).max())


def hermitian_dilation(b):
    """Self-adjoint embedding [[0, B], [B*, 0]]; preserves the spectral norm."""
    arr = _entries(b)
    d1, d2 = arr.shape
    out = np.zeros((d1 + d2, d1 + d2), dtype=np.complex128)
    out[:d1, d1:] = arr
    out[d1:, :d1] = arr.conj().T
    return HermitianMatrix(out)


def effective_rank(u, psd_tol=None):
    """trace(U) / ||U|| for a nonzero PSD matrix; always in [1, dim]."""
    mat = u if isinstance(u, HermitianMatrix) else HermitianMatrix(_entries(u))
    w = np.linalg.eigvalsh(mat.a)
    norm = float(np.abs(w).max())
    if norm == 0.0:
        raise DomainError("effective rank of the zero matrix is undefined")
    tol = 1e-9 * norm if psd_tol is None else psd_tol
    if w.min() < -tol:
        raise DomainError(f"matrix is not PSD: min eigenvalue {w.min():.3e}")
    return float(np.trace(mat.a).real / norm)


def eig_clamp(b, a):
    """Replace each eigenvalue lam by min(lam, a), keeping eigenvectors."""
    mat = b if isinstance(b, HermitianMatrix) else HermitianMatrix(_entries(b))
    w, v = np.linalg.eigh(mat.a)
    w = np.minimum(w, float(a))
    return HermitianMatrix((v * w) @ v.conj().T)


def loewner_leq(a, b, tol=None):
    """Test a <= b in the Loewner order: min eig(b - a) >= -tol."""
    aa, bb = _entries(a), _entries(b)
    if aa.shape != bb.shape:
        raise ValueError(f"dimension mismatch: {aa.shape} vs {bb.shape}")
    diff = HermitianMatrix(bb - aa)
    w = np.linalg.eigvalsh(diff.a)
    if tol is None:
        tol = 1e-9 * max(float(np.abs(w).max()), 1e-30)
    min_eig = float(w.min())
    return PsdCheckResult(holds=min_eig >= -tol, min_eigenvalue=min_eig, tolerance=float(tol))


def matrix_to_json(m):
    """JSON payload: array-of-rows of [re, im] pairs plus a hermitian flag."""
    arr = _entries(m)
    return {
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in arr],
        "hermitian": _is_hermitian_value(m),
    }


def matrix_from_json(payload):
    """Inverse of matrix_to_json."""
    rows = payload["entries"]
    arr = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)
    if payload.get("hermitian", False):
        return HermitianMatrix(arr)
    return RectMatrix(arr)
