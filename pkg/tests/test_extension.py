import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcgeom.extension import (
    boolean_unitaries,
    canonical_extension,
    extension_circuit,
    parse_truth_table,
    special_extension_check,
)

from .helpers import random_unitary


def _fixing_zero(dim_x, dim_y, rng):
    """Random unitary on (x, y) that fixes every |x>|0> and mixes the rest."""
    keep = np.array([x * dim_y for x in range(dim_x)])
    rest = np.setdiff1d(np.arange(dim_x * dim_y), keep)
    W = np.eye(dim_x * dim_y, dtype=complex)
    W[np.ix_(rest, rest)] = _haar(rest.size, rng)
    return W


def _haar(d, rng):
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def test_identity_extends_to_identity():
    for m in (0, 1, 2):
        np.testing.assert_array_equal(canonical_extension(np.eye(4), m), np.eye(4 * 2 ** (m + 1)))


def test_x_gate_one_ancilla_exhaustive():
    X = np.array([[0, 1], [1, 0]])
    Um = canonical_extension(X, 1)
    for x, y, z in itertools.product((0, 1), repeat=3):
        # case analysis: y = 0 applies U (z = 0) or U^dag (z = 1); y = 1 is untouched
        out = (1 - x if y == 0 else x, y, z)
        col = Um[:, 4 * x + 2 * y + z]
        expected = np.zeros(8)
        expected[4 * out[0] + 2 * out[1] + out[2]] = 1.0
        np.testing.assert_array_equal(col, expected)


@pytest.mark.parametrize("k", range(20))
def test_canonical_extension_is_special(k):
    rng = np.random.default_rng(100 + k)
    n, m = 1 + k % 2, k % 3
    U = random_unitary(n, rng)
    Um = canonical_extension(U, m)
    np.testing.assert_allclose(Um.conj().T @ Um, np.eye(Um.shape[0]), atol=1e-10)
    ok, special, A = special_extension_check(Um, U)
    assert ok and special
    assert abs(A[0] - 1) < 1e-10


@pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (1, 2)])
def test_independent_of_seed_extension(n, m):
    rng = np.random.default_rng(7 + n + m)
    U = random_unitary(n, rng)
    V1 = np.kron(U, np.eye(2**m))
    W = np.eye(2**m, dtype=complex)
    W[1:, 1:] = _haar(2**m - 1, rng)
    V2 = np.kron(np.eye(2**n), W) @ V1 @ _fixing_zero(2**n, 2**m, rng)
    assert special_extension_check(V2, U)[:2] == (True, True)
    assert np.abs(V2 - V1).max() > 1e-2
    C1, C2 = extension_circuit(V1, n, m), extension_circuit(V2, n, m)
    np.testing.assert_allclose(C1, C2, atol=1e-10)
    np.testing.assert_allclose(C1, canonical_extension(U, m), atol=1e-10)


def test_zero_overlap_lemma():
    rng = np.random.default_rng(3)
    n, m = 2, 2
    U = random_unitary(n, rng)
    V = np.kron(U, np.eye(2**m)) @ _fixing_zero(2**n, 2**m, rng)
    dy = 2**m
    for x, y, x2 in itertools.product(range(2**n), range(1, dy), range(2**n)):
        assert abs(V[x2 * dy, x * dy + y]) <= 1e-12


def test_sector_preservation():
    rng = np.random.default_rng(4)
    n, m = 2, 2
    Um = canonical_extension(random_unitary(n, rng), m)
    dy = 2**m
    for x, y, z in itertools.product(range(2**n), range(1, dy), (0, 1)):
        idx = (x * dy + y) * 2 + z
        e = np.zeros(Um.shape[0])
        e[idx] = 1.0
        np.testing.assert_array_equal(Um[:, idx], e)


def test_check_examples():
    rng = np.random.default_rng(5)
    U = random_unitary(1, rng)
    ok, special, A = special_extension_check(np.kron(U, np.eye(2)), U)
    assert ok and special
    np.testing.assert_allclose(A, [1, 0])
    Xg = np.array([[0, 1], [1, 0]])
    ok, special, A = special_extension_check(np.kron(U, Xg), U)
    assert ok and not special
    np.testing.assert_allclose(A, [0, 1], atol=1e-14)
    cnot = np.eye(4)[[0, 1, 3, 2]]
    assert special_extension_check(cnot, np.eye(2)) == (False, None, None)
    with pytest.raises(ValueError):
        special_extension_check(np.eye(6), np.eye(4))


def test_extension_errors():
    with pytest.raises(ValueError):
        canonical_extension(np.ones((2, 2)), 1)
    with pytest.raises(ValueError):
        canonical_extension(np.eye(2**5), 5)
    with pytest.raises(ValueError):
        canonical_extension(np.eye(2), -1)
    with pytest.raises(ValueError):
        canonical_extension(np.eye(3), 1)
    with pytest.raises(ValueError):
        extension_circuit(np.eye(4), 1, 2)


def test_and_gives_toffoli():
    Uf, Vf = boolean_unitaries("0001")
    toffoli = np.eye(8)[:, [0, 1, 2, 3, 4, 5, 7, 6]]
    np.testing.assert_array_equal(Uf, toffoli)
    np.testing.assert_array_equal(Vf, np.diag([1, 1, 1, -1]))


def test_zero_function():
    Uf, Vf = boolean_unitaries([0, 0, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(Uf, np.eye(16))
    np.testing.assert_array_equal(Vf, np.eye(8))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4).flatmap(lambda n: st.lists(st.integers(0, 1), min_size=2**n, max_size=2**n)))
def test_boolean_unitary_properties(bits):
    Uf, Vf = boolean_unitaries(bits)
    assert set(np.unique(Uf)) <= {0.0, 1.0}
    np.testing.assert_array_equal(Uf.sum(0), 1)
    np.testing.assert_array_equal(Uf.sum(1), 1)
    np.testing.assert_array_equal(Vf @ Vf, np.eye(len(bits)))
    assert set(np.diag(Vf)) <= {1.0, -1.0}
    np.testing.assert_array_equal(Uf @ Uf, np.eye(2 * len(bits)))


def test_truth_table_errors():
    for bad in ("012", "000", "", [0, 2], [[0, 1]]):
        with pytest.raises(ValueError):
            parse_truth_table(bad)
    with pytest.raises(ValueError):
        boolean_unitaries("0" * 2**10)
