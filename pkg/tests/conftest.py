import numpy as np
import pytest


def random_dm(rng, d=2, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(rng, d=2):
    return random_dm(rng, d, rank=1)


def random_unitary(rng, d=2):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_filter(rng):
    """Random 2x2 matrix rescaled so its largest singular value is at most 1."""
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return m / np.linalg.svd(m, compute_uv=False)[0] * rng.uniform(0.1, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20050701)
