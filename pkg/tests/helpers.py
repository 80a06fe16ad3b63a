import numpy as np

from qcgeom.metric import PenaltyMetric, inner
from qcgeom.pauli import algebra


def random_hermitian(n, rng, traceless=False):
    d = 2**n
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    A = (A + A.conj().T) / 2
    if traceless:
        A -= np.trace(A) / d * np.eye(d)
    return A


def random_unitary(n, rng):
    d = 2**n
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def unit_speed_dual(metric: PenaltyMetric, rng, speed=1.0):
    """L(0) = G(H) for a random H with <H, H> = speed**2."""
    alg = algebra(metric.n)
    h = np.r_[0.0, rng.normal(size=alg.size - 1)]
    H = alg.compose(h)
    H *= speed / np.sqrt(inner(H, H, metric))
    return metric.G(H)
