import numpy as np
import pytest

from mcbound import FiniteChain


@pytest.fixture
def two_state():
    """The closed-form reference chain: pi = (2/3, 1/3), t_mix = 4."""
    return FiniteChain(np.array([[0.9, 0.1], [0.2, 0.8]]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (a + a.conj().T) / 2


def random_psd(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return a @ a.conj().T


def random_irreducible_chain(rng, m):
    """Strictly positive rows: irreducible and aperiodic by construction."""
    q = rng.random((m, m)) + 0.05
    q /= q.sum(axis=1, keepdims=True)
    return FiniteChain(q)
