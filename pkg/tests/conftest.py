import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_density_matrix(rng, dim, labels=None):
    from qusync.qcore import DensityMatrix

    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    m /= np.trace(m).real
    if labels is None:
        labels = tuple(f"q{i}" for i in range(int(np.log2(dim))))
    return DensityMatrix(m, labels)


def random_unitary(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))
