import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_matrix(rng, m, n, scale=1.0):
    M = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    nrm = np.linalg.norm(M, 2)
    return M * (scale / nrm) if nrm > 0 else M


def random_unitary(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def graph_projection_oracle(A):
    """Orthonormalize the columns of [I; A] and form Q Q*."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    Q, _ = np.linalg.qr(np.vstack([np.eye(A.shape[1]), A]))
    return Q @ Q.conj().T


def transform_oracle(A):
    """A (1 + A*A)^{-1/2} via a Hermitian eigendecomposition."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    w, V = np.linalg.eigh(np.eye(A.shape[1]) + A.conj().T @ A)
    return A @ (V / np.sqrt(w)) @ V.conj().T


def spec_norm(M):
    return float(np.linalg.norm(M, 2)) if np.size(M) else 0.0


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)
scalars = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
