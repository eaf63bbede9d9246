"""Shared helpers: seeded random stable systems and small utilities."""

import numpy as np
import pytest

from romkit import ContinuousLTI, DiscreteLTI


def random_discrete(rng, n=None, radius=None, p=1, q=1, step=0.1):
    """Random discrete LTI with spectral radius rescaled to ``radius``."""
    if n is None:
        n = int(rng.integers(2, 7))
    if radius is None:
        radius = float(rng.uniform(0.3, 0.8))
    a = rng.normal(size=(n, n))
    rho = np.max(np.abs(np.linalg.eigvals(a)))
    a *= radius / rho
    b = rng.normal(size=(n, p))
    c = rng.normal(size=(q, n))
    return DiscreteLTI(a_matrix=a, b_matrix=b, c_matrix=c, step=step)


def random_continuous(rng, n=None, margin=0.5, p=1, q=1):
    """Random continuous LTI shifted so the spectral abscissa is
    ``-margin``."""
    if n is None:
        n = int(rng.integers(2, 7))
    a = rng.normal(size=(n, n))
    abscissa = np.max(np.linalg.eigvals(a).real)
    a -= (abscissa + margin) * np.eye(n)
    b = rng.normal(size=(n, p))
    c = rng.normal(size=(q, n))
    return ContinuousLTI(a_matrix=a, b_matrix=b, c_matrix=c)


def random_orthonormal(rng, rows, cols):
    """Orthonormal columns from a QR factorization of a random draw."""
    m = rng.normal(size=(rows, cols))
    q, _ = np.linalg.qr(m)
    return q[:, :cols]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
