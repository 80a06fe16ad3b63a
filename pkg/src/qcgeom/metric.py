"""Right-invariant penalty metrics on the n-qubit unitary group.

A metric is diagonal in the Pauli basis: word ``w`` carries a positive
penalty ``p[w]`` so that ``<H, J> = sum_w p[w] h_w j_w``.  The raising map
``G`` multiplies each Pauli coefficient by its penalty and ``F = G^-1``
divides by it.  Operators are dense Hermitian matrices throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .pauli import algebra, n_qubits, word_index


@dataclass(frozen=True, eq=False)
class PenaltyMetric:
    """Penalty per Pauli word plus the derivative of the penalties in q.

    ``penalties`` has one entry per word in canonical order; the identity
    entry is kept (set to 1) only so that arrays line up with coefficient
    vectors.  ``easy`` marks the words belonging to the cheap subspace P.
    """

    n: int
    penalties: np.ndarray
    easy: np.ndarray
    kind: str = "custom"
    q: float = 1.0
    s: float = 1.0
    easy_words: tuple[str, ...] = field(default=())

    def __post_init__(self):
        p = np.array(self.penalties, dtype=float)
        if p.shape != (4**self.n,):
            raise ValueError("one penalty per Pauli word is required")
        if not np.all(p > 0):
            raise ValueError("penalties must be strictly positive")
        p.setflags(write=False)
        e = np.array(self.easy, dtype=bool)
        e.setflags(write=False)
        object.__setattr__(self, "penalties", p)
        object.__setattr__(self, "easy", e)

    # constructors -------------------------------------------------------

    @classmethod
    def standard(cls, n: int, q: float) -> "PenaltyMetric":
        """Penalty 1 on words of weight <= 2 and q on the rest."""
        w = algebra(n).weights
        return cls(n, np.where(w <= 2, 1.0, q), w <= 2, kind="standard", q=float(q))

    @classmethod
    def three_qubit(cls, q: float, s: float = 1.0) -> "PenaltyMetric":
        """s on one-body, 1 on two-body and q on three-body words (n = 3)."""
        w = algebra(3).weights
        p = np.select([w == 0, w == 1, w == 2], [1.0, s, 1.0], q)
        return cls(3, p, w <= 2, kind="three_qubit_stq", q=float(q), s=float(s))

    @classmethod
    def projective(cls, n: int, q: float, easy_words) -> "PenaltyMetric":
        """Penalty 1 on an explicitly declared easy set and q elsewhere."""
        easy_words = tuple(w.upper() for w in easy_words)
        easy = np.zeros(4**n, dtype=bool)
        easy[0] = True
        for w in easy_words:
            if len(w) != n:
                raise ValueError(f"word {w!r} does not have {n} letters")
            easy[word_index(w)] = True
        return cls(
            n, np.where(easy, 1.0, q), easy, kind="projective", q=float(q), easy_words=easy_words
        )

    @classmethod
    def from_penalties(cls, n: int, penalties) -> "PenaltyMetric":
        p = np.asarray(penalties, dtype=float)
        return cls(n, p, p == 1.0, kind="custom")

    def with_q(self, q: float) -> "PenaltyMetric":
        """Same family, new penalty parameter."""
        if self.kind == "standard":
            return PenaltyMetric.standard(self.n, q)
        if self.kind == "three_qubit_stq":
            return PenaltyMetric.three_qubit(q, self.s)
        if self.kind == "projective":
            return PenaltyMetric.projective(self.n, q, self.easy_words)
        raise ValueError("custom metrics have no penalty parameter")

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"n": self.n, "kind": self.kind, "q": self.q}
        if self.kind == "three_qubit_stq":
            d["s"] = self.s
        if self.kind == "projective":
            d["easy_words"] = list(self.easy_words)
        if self.kind == "custom":
            d["penalties"] = self.penalties.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PenaltyMetric":
        kind = d.get("kind", "standard")
        if kind == "standard":
            return cls.standard(int(d["n"]), float(d["q"]))
        if kind == "three_qubit_stq":
            if int(d.get("n", 3)) != 3:
                raise ValueError("three_qubit_stq metrics need n = 3")
            return cls.three_qubit(float(d["q"]), float(d.get("s", 1.0)))
        if kind == "projective":
            return cls.projective(int(d["n"]), float(d["q"]), d["easy_words"])
        if kind == "custom":
            return cls.from_penalties(int(d["n"]), d["penalties"])
        raise ValueError(f"unknown metric kind {kind!r}")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PenaltyMetric":
        return cls.from_dict(json.loads(text))

    # the linear maps ----------------------------------------------------

    @property
    def easy_mask(self) -> np.ndarray:
        return self.easy

    @property
    def hard_mask(self) -> np.ndarray:
        return ~self.easy

    @property
    def dpenalty(self) -> np.ndarray:
        """Derivative of the penalties with respect to q (the map G')."""
        if self.kind == "custom":
            raise ValueError("custom metrics have no penalty parameter")
        return self.hard_mask.astype(float)

    def G(self, H: np.ndarray) -> np.ndarray:
        alg = algebra(self.n)
        return alg.compose(self.penalties * alg.decompose(H))

    def F(self, L: np.ndarray) -> np.ndarray:
        alg = algebra(self.n)
        return alg.compose(alg.decompose(L) / self.penalties)

    def P(self, H: np.ndarray) -> np.ndarray:
        alg = algebra(self.n)
        return alg.compose(np.where(self.easy, alg.decompose(H), 0))

    def Q(self, H: np.ndarray) -> np.ndarray:
        alg = algebra(self.n)
        return alg.compose(np.where(self.easy, 0, alg.decompose(H)))


def _check_dims(metric: PenaltyMetric, *ops: np.ndarray) -> None:
    for A in ops:
        if n_qubits(A) != metric.n:
            raise ValueError(f"operator of shape {A.shape} does not act on {metric.n} qubits")


def inner(H: np.ndarray, J: np.ndarray, metric: PenaltyMetric) -> float:
    """Metric inner product of two traceless Hamiltonians."""
    _check_dims(metric, H, J)
    alg = algebra(metric.n)
    h = np.real(alg.decompose(H))[1:]
    j = np.real(alg.decompose(J))[1:]
    return float(np.sum(metric.penalties[1:] * h * j))


def norm(H: np.ndarray, metric: PenaltyMetric) -> float:
    return float(np.sqrt(inner(H, H, metric)))


def dual(H: np.ndarray, metric: PenaltyMetric) -> np.ndarray:
    """L = G(H)."""
    _check_dims(metric, H)
    return metric.G(H)


def inverse_dual(L: np.ndarray, metric: PenaltyMetric) -> np.ndarray:
    """H = F(L)."""
    _check_dims(metric, L)
    return metric.F(L)


def curve_length(times, hamiltonians, metric: PenaltyMetric, return_error: bool = False):
    """Length of the curve generated by ``H(t)`` sampled on ``times``.

    Composite Simpson on the given grid; the error estimate compares with
    Simpson on every other node.
    """
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    speed = np.array([np.sqrt(max(inner(H, H, metric), 0.0)) for H in hamiltonians])
    length = float(simpson(speed, x=t)) if t.size > 2 else float(np.trapezoid(speed, t))
    if not return_error:
        return length
    if t.size >= 5:
        coarse = float(simpson(speed[::2], x=t[::2]))
        err = abs(length - coarse)
    else:
        err = float("nan")
    return length, err


# Pauli coordinates near the identity --------------------------------------


def pauli_coordinate_metric(X: np.ndarray, metric: PenaltyMetric, order: int = 1) -> np.ndarray:
    """Metric components g[s, t] in Pauli coordinates at the point exp(-iX).

    ``E_X`` is expanded to ``order`` in X and the product ``E_X^T G E_X`` is
    truncated at the same order.  Indices run over all 4**n words; the
    identity row/column is left as the unit penalty.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    alg = algebra(metric.n)
    x = np.real(alg.decompose(X))
    A = alg.ad(x)  # Y -> i[X, Y]; -i ad_X in the usual notation is -A
    # E_X = sum_j (-A)^j/(j+1)!,  E_X^T = sum_j A^j/(j+1)!
    powers = [np.eye(alg.size), A, A @ A]
    E = [(-1) ** j * powers[j] / _fact(j + 1) for j in range(order + 1)]
    Et = [powers[j] / _fact(j + 1) for j in range(order + 1)]
    Gd = np.diag(metric.penalties)
    g = np.zeros((alg.size, alg.size))
    for a in range(order + 1):
        for b in range(order + 1 - a):
            g += Et[a] @ Gd @ E[b]
    return g


def _fact(k: int) -> int:
    out = 1
    for j in range(2, k + 1):
        out *= j
    return out


def metric_derivative_at_origin(metric: PenaltyMetric) -> np.ndarray:
    """Analytic first derivatives ``d[s, t, m] = g_{st,m}`` at the identity."""
    alg = algebra(metric.n)
    p = metric.penalties
    # g_{st,m} = i tr(([G s, t] + [G t, s]) m)/2^(n+1)
    #          = (p_s f[s,t] + p_t f[t,s]) / 2 * delta(prod[s,t], m)
    N = alg.size
    d = np.zeros((N, N, N))
    vals = 0.5 * (p[:, None] * alg.f + p[None, :] * alg.f.T)
    s, t = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    d[s, t, alg.prod] = vals
    return d


def christoffel(rho: str, sigma: str, tau: str, metric: PenaltyMetric) -> float:
    """Christoffel coefficient at the identity in Pauli coordinates."""
    if not (len(rho) == len(sigma) == len(tau) == metric.n):
        raise ValueError("words must have n letters")
    r, s, t = word_index(rho), word_index(sigma), word_index(tau)
    return float(christoffel_table(metric)[r, s, t])


def christoffel_table(metric: PenaltyMetric) -> np.ndarray:
    """All coefficients ``Gamma[r, s, t]``.

    tr(F(r)([s, G t] + [t, G s])) i / 2^(n+1) reduces to
    ((p_t - p_s)/p_r) * f[s, t]/2 on the word r = s*t.
    """
    alg = algebra(metric.n)
    p = metric.penalties
    N = alg.size
    vals = 0.5 * (p[None, :] - p[:, None]) * alg.f / p[alg.prod]
    gam = np.zeros((N, N, N))
    s, t = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    gam[alg.prod, s, t] = vals
    return gam


def christoffel_fd(metric: PenaltyMetric, step: float = 1e-5) -> np.ndarray:
    """Christoffel table from central differences of the coordinate metric.

    Independent of :func:`christoffel_table`; used as its test oracle.
    """
    alg = algebra(metric.n)
    N = alg.size
    dg = np.zeros((N, N, N))
    for m in range(1, N):
        X = step * alg.basis[m]
        dg[:, :, m] = (
            pauli_coordinate_metric(X, metric, 1) - pauli_coordinate_metric(-X, metric, 1)
        ) / (2 * step)
    # low[m, s, t] = (g_{ms,t} + g_{mt,s} - g_{st,m})/2
    low = 0.5 * (dg + dg.transpose(0, 2, 1) - np.transpose(dg, (2, 0, 1)))
    return low / metric.penalties[:, None, None]


def connection_right_invariant(Y: np.ndarray, Z: np.ndarray, metric: PenaltyMetric) -> np.ndarray:
    """Levi-Civita connection of two right-invariant fields."""
    _check_dims(metric, Y, Z)
    inner_term = (Y @ metric.G(Z) - metric.G(Z) @ Y) + (Z @ metric.G(Y) - metric.G(Y) @ Z)
    return 0.5j * ((Y @ Z - Z @ Y) + metric.F(inner_term))


def covariant_derivative(times, Y, Z, metric: PenaltyMetric, tol: float = 1e-6) -> np.ndarray:
    """D_t Z along a curve with tangent Y(t); fields sampled on ``times``.

    dZ/dt uses second-order differences; the error estimate is the gap to a
    fourth-order stencil and must stay below ``tol`` (relative to max |Z|).
    """
    t = np.asarray(times, dtype=float)
    Y = np.asarray(Y)
    Z = np.asarray(Z)
    if t.size < 5:
        raise ValueError("need at least five samples")
    dZ = np.gradient(Z, t, axis=0, edge_order=2)
    h = np.diff(t)
    if np.allclose(h, h[0], rtol=1e-9, atol=0):
        d4 = dZ.copy()
        d4[2:-2] = (-Z[4:] + 8 * Z[3:-1] - 8 * Z[1:-3] + Z[:-4]) / (12 * h[0])
        scale = max(1.0, float(np.max(np.abs(Z))))
        err = float(np.max(np.abs(d4[2:-2] - dZ[2:-2]))) / scale
        if err > tol:
            raise ValueError(f"time grid too coarse: derivative error estimate {err:.2e} > {tol:.0e}")
    out = np.empty_like(Z, dtype=complex)
    for k in range(t.size):
        out[k] = dZ[k] + connection_right_invariant(Y[k], Z[k], metric)
    return out
