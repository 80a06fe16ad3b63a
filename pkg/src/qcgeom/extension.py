"""Ancilla extensions of unitaries and Boolean-function oracles.

Register layout is (x: n qubits)(y: m ancillas)(z: 1 flag qubit), most
significant first, so the basis index of |x>|y>|z> is
``(x * 2**m + y) * 2 + z``.
"""

from __future__ import annotations

import numpy as np

MAX_TOTAL_QUBITS = 10


def _check_unitary(U: np.ndarray, name: str = "U", tol: float = 1e-10) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2) > tol:
        raise ValueError(f"{name} is not unitary")
    return U


def _qubits(d: int) -> int:
    n = int(round(np.log2(d)))
    if 2**n != d:
        raise ValueError(f"dimension {d} is not a power of two")
    return n


def canonical_extension(U: np.ndarray, m: int) -> np.ndarray:
    """The canonical (m+1)-fold special extension of U.

    Applies U to x when y = 0 and z = 0, U^dag when y = 0 and z = 1, and
    acts as the identity on every y != 0 sector.
    """
    U = _check_unitary(U)
    n = _qubits(U.shape[0])
    if m < 0:
        raise ValueError("m must be nonnegative")
    if n + m + 1 > MAX_TOTAL_QUBITS:
        raise ValueError(f"n + m + 1 exceeds the dense limit of {MAX_TOTAL_QUBITS} qubits")
    dx, dy = 2**n, 2**m
    out = np.eye(dx * dy * 2, dtype=complex).reshape(dx, dy, 2, dx, dy, 2)
    out[:, 0, 0, :, 0, 0] = U
    out[:, 0, 1, :, 0, 1] = U.conj().T
    return out.reshape(dx * dy * 2, dx * dy * 2)


def extension_circuit(V: np.ndarray, n: int, m: int) -> np.ndarray:
    """Unitary of the four-gate circuit built from a special extension V of U.

    Gates in order: V on (x, y) if z = 0; flip z if y = 0; V^dag on (x, y)
    if z = 0; flip z if y = 0.  For any special extension V this equals
    ``canonical_extension(U, m)``.
    """
    V = _check_unitary(V, "V")
    if V.shape[0] != 2 ** (n + m):
        raise ValueError("V must act on n + m qubits")
    if n + m + 1 > MAX_TOTAL_QUBITS:
        raise ValueError(f"n + m + 1 exceeds the dense limit of {MAX_TOTAL_QUBITS} qubits")
    dxy = 2 ** (n + m)
    P0 = np.diag([1.0, 0.0])
    P1 = np.diag([0.0, 1.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    ctrl_V = np.kron(V, P0) + np.kron(np.eye(dxy), P1)
    ctrl_Vd = np.kron(V.conj().T, P0) + np.kron(np.eye(dxy), P1)
    y0 = np.zeros(2**m)
    y0[0] = 1.0
    proj_y0 = np.kron(np.eye(2**n), np.diag(y0))
    flip = np.kron(proj_y0, X) + np.kron(np.eye(dxy) - proj_y0, np.eye(2))
    return flip @ ctrl_Vd @ flip @ ctrl_V


def special_extension_check(V: np.ndarray, U: np.ndarray, tol: float = 1e-10):
    """Decide whether V|x>|0> = (U|x>)|A> for a common ancilla state |A>.

    Returns ``(is_extension, is_special, ancilla_state)``; the last two
    are None when V is not an extension.
    """
    V = np.asarray(V, dtype=complex)
    U = np.asarray(U, dtype=complex)
    dx = U.shape[0]
    if V.shape[0] % dx or V.shape[0] != V.shape[1]:
        raise ValueError("dimension mismatch between V and U")
    dy = V.shape[0] // dx
    _qubits(dx)
    _qubits(dy)
    cols = V[:, np.arange(dx) * dy].T.reshape(dx, dx, dy)  # cols[x] = V|x>|0> as (x', y)
    A = None
    for x in range(dx):
        ux = U[:, x]
        a = ux.conj() @ cols[x]
        if np.linalg.norm(cols[x] - np.outer(ux, a)) > tol:
            return False, None, None
        if A is None:
            A = a
        elif np.linalg.norm(a - A) > tol:
            return False, None, None
    zero = np.zeros(dy, dtype=complex)
    zero[0] = 1.0
    return True, bool(np.linalg.norm(A - zero) <= tol), A


def parse_truth_table(f) -> np.ndarray:
    """Truth table from a bitstring like "0001" or a sequence of 0/1."""
    if isinstance(f, str):
        if any(c not in "01" for c in f):
            raise ValueError("truth table string must contain only 0 and 1")
        bits = np.array([int(c) for c in f])
    else:
        bits = np.asarray(f)
        if bits.ndim != 1 or not np.all((bits == 0) | (bits == 1)):
            raise ValueError("truth table entries must be 0 or 1")
        bits = bits.astype(int)
    if bits.size == 0 or bits.size & (bits.size - 1):
        raise ValueError("truth table length must be a power of two")
    return bits


def boolean_unitaries(f) -> tuple[np.ndarray, np.ndarray]:
    """``U_f|x>|z> = |x>|z xor f(x)>`` and ``V_f|x> = (-1)**f(x) |x>``."""
    bits = parse_truth_table(f)
    dx = bits.size
    if _qubits(dx) + 1 > MAX_TOTAL_QUBITS:
        raise ValueError("truth table too large")
    Uf = np.zeros((2 * dx, 2 * dx))
    for x in range(dx):
        for z in (0, 1):
            Uf[2 * x + (z ^ bits[x]), 2 * x + z] = 1.0
    Vf = np.diag((-1.0) ** bits)
    return Uf, Vf
