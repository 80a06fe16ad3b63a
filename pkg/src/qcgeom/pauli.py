"""Generalized Pauli operators on n qubits.

Words are uppercase strings over ``IXYZ``.  Every dense operator in this
package is indexed by the 4**n words in base-4 lexicographic order
(I=0, X=1, Y=2, Z=3, leftmost qubit most significant), so word index ``k``
and the Pauli coefficient vector layout agree everywhere.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

LETTERS = "IXYZ"
MAX_QUBITS = 4

_SINGLE = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# single-qubit multiplication table: a*b = _PHASE1[a, b] * _PROD1[a, b]
_PROD1 = np.array([[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]])
_PHASE1 = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, 1j, -1j],
        [1, -1j, 1, 1j],
        [1, 1j, -1j, 1],
    ]
)


def _check_word(w: str) -> str:
    w = w.upper()
    if not w or any(c not in LETTERS for c in w):
        raise ValueError(f"invalid Pauli word {w!r}")
    return w


def weight(w: str) -> int:
    """Number of non-identity letters in ``w``."""
    return sum(c != "I" for c in _check_word(w))


def pauli_product(a: str, b: str) -> tuple[complex, str]:
    """Return ``(phase, word)`` with ``a @ b == phase * word`` as matrices."""
    a, b = _check_word(a), _check_word(b)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {a!r} vs {b!r}")
    phase = 1
    out = []
    for x, y in zip(a, b):
        i, j = LETTERS.index(x), LETTERS.index(y)
        phase *= _PHASE1[i, j]
        out.append(LETTERS[_PROD1[i, j]])
    return complex(phase), "".join(out)


def commutes(a: str, b: str) -> bool:
    a, b = _check_word(a), _check_word(b)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {a!r} vs {b!r}")
    clashes = sum(x != "I" and y != "I" and x != y for x, y in zip(a, b))
    return clashes % 2 == 0


def to_matrix(w: str) -> np.ndarray:
    """Dense 2**n x 2**n matrix of the word (Kronecker product, leftmost first)."""
    w = _check_word(w)
    m = np.ones((1, 1), dtype=complex)
    for c in w:
        m = np.kron(m, _SINGLE[LETTERS.index(c)])
    return m


def word_index(w: str) -> int:
    k = 0
    for c in _check_word(w):
        k = 4 * k + LETTERS.index(c)
    return k


def index_word(k: int, n: int) -> str:
    letters = []
    for _ in range(n):
        k, r = divmod(k, 4)
        letters.append(LETTERS[r])
    return "".join(reversed(letters))


def all_words(n: int) -> list[str]:
    return ["".join(p) for p in product(LETTERS, repeat=n)]


class PauliAlgebra:
    """Cached multiplication and commutator tables for n qubits.

    ``prod[a, b]`` is the index of the word proportional to ``a @ b`` and
    ``phase[a, b]`` the fourth root of unity in front of it.  ``f[a, b]`` is
    the real structure constant of ``i[a, b] = f[a, b] * prod[a, b]``; it
    is 0 for commuting pairs and +-2 otherwise.

    Use :func:`algebra` rather than constructing directly.
    """

    def __init__(self, n: int):
        if not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"n must be in 1..{MAX_QUBITS}, got {n}")
        self.n = n
        self.dim = 2**n
        self.size = 4**n
        self.words = all_words(n)
        self.weights = np.array([sum(c != "I" for c in w) for w in self.words])
        self.basis = np.array([to_matrix(w) for w in self.words])

        prod = np.zeros((1, 1), dtype=int)
        phase = np.ones((1, 1), dtype=complex)
        for _ in range(n):
            prod = (4 * prod[:, None, :, None] + _PROD1[None, :, None, :]).reshape(
                4 * prod.shape[0], -1
            )
            phase = (phase[:, None, :, None] * _PHASE1[None, :, None, :]).reshape(
                4 * phase.shape[0], -1
            )
        self.prod = prod
        self.phase = phase
        self.f = np.real(1j * (phase - phase.T))
        self.anticommute = self.f != 0
        self._flat = (self.prod * self.size + np.arange(self.size)[None, :]).ravel()

    def decompose(self, A: np.ndarray) -> np.ndarray:
        """Complex coefficients tr(A w)/2**n over all words (batched on leading axes)."""
        return np.einsum("kij,...ji->...k", self.basis, A) / self.dim

    def compose(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("...k,kij->...ij", np.asarray(coeffs, dtype=complex), self.basis)

    def bracket(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Coefficients of i[X, Y] from real coefficient vectors x, y."""
        w = (x[:, None] * y[None, :]) * self.f
        return np.bincount(self.prod.ravel(), weights=w.ravel(), minlength=self.size)

    def ad(self, x: np.ndarray) -> np.ndarray:
        """Real matrix of Y -> i[X, Y] acting on coefficient vectors."""
        M = np.zeros(self.size * self.size)
        M[self._flat] = (x[:, None] * self.f).ravel()
        return M.reshape(self.size, self.size)

    def adjoint_action(self, U: np.ndarray) -> np.ndarray:
        """Real orthogonal matrix of X -> U^dag X U on coefficient vectors."""
        conj = U.conj().T @ self.basis @ U
        return np.real(self.decompose(conj)).T


@lru_cache(maxsize=None)
def algebra(n: int) -> PauliAlgebra:
    return PauliAlgebra(n)


def n_qubits(A: np.ndarray) -> int:
    d = A.shape[-1]
    n = int(round(np.log2(d)))
    if 2**n != d or A.shape[-2] != d:
        raise ValueError(f"expected a 2**n x 2**n matrix, got shape {A.shape}")
    return n


def hermitian_error(A: np.ndarray) -> float:
    return float(np.max(np.abs(A - A.conj().T), initial=0.0))


@dataclass(frozen=True)
class PauliVector:
    """Real Pauli coefficients of a Hermitian operator, in canonical word order."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (4**self.n,):
            raise ValueError(f"expected {4**self.n} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, word: str) -> float:
        return float(self.coeffs[word_index(word)])

    @property
    def words(self) -> list[str]:
        return algebra(self.n).words

    def to_matrix(self) -> np.ndarray:
        return algebra(self.n).compose(self.coeffs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for w, c in zip(self.words, self.coeffs):
            writer.writerow([w, f"{c:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PauliVector":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        n = len(rows[0][0])
        coeffs = np.zeros(4**n)
        for word, value in rows:
            coeffs[word_index(word)] = float(value)
        return cls(n, coeffs)


def decompose(A: np.ndarray) -> PauliVector:
    """Pauli coefficients ``tr(A w)/2**n`` of a Hermitian matrix."""
    A = np.asarray(A, dtype=complex)
    n = n_qubits(A)
    if hermitian_error(A) > 1e-9:
        raise ValueError("decompose expects a Hermitian matrix")
    return PauliVector(n, np.real(algebra(n).decompose(A)))


def compose(v: PauliVector) -> np.ndarray:
    return v.to_matrix()


def coefficients(A: np.ndarray) -> np.ndarray:
    """Real coefficient vector of a Hermitian matrix (no validation)."""
    return np.real(algebra(n_qubits(A)).decompose(A))


def from_terms(terms: dict[str, float]) -> np.ndarray:
    """Build a Hermitian matrix from ``{word: coefficient}``."""
    words = list(terms)
    n = len(words[0])
    A = np.zeros((2**n, 2**n), dtype=complex)
    for w, c in terms.items():
        if len(w) != n:
            raise ValueError("all words must have the same length")
        A += c * to_matrix(w)
    return A


def single_site(letter: str, site: int, n: int) -> str:
    """Word with ``letter`` on qubit ``site`` (0-based from the left)."""
    return "I" * site + letter + "I" * (n - site - 1)


def split_PQ(H: np.ndarray, metric=None) -> tuple[np.ndarray, np.ndarray]:
    """Split H into its easy part (weight <= 2, or the metric's easy words) and the rest."""
    n = n_qubits(H)
    alg = algebra(n)
    c = alg.decompose(H)
    if metric is None:
        easy = alg.weights <= 2
    else:
        easy = metric.easy_mask
    return alg.compose(np.where(easy, c, 0)), alg.compose(np.where(easy, 0, c))
