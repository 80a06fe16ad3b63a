"""Geodesics of right-invariant penalty metrics.

The geodesic equation is integrated for the dual ``L = G(H)``,
``dL/dt = i[L, F(L)]``, together with the Schroedinger equation
``dU/dt = -i H U``.  Internally L is carried as a real Pauli coefficient
vector; the trajectory exposes dense matrices.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.linalg as sla

from .metric import PenaltyMetric, inner
from .pauli import algebra, coefficients, from_terms, n_qubits, single_site

log = logging.getLogger(__name__)

UNITARITY_TOL = 1e-12


def _polar(U: np.ndarray) -> np.ndarray:
    W, _, Vh = np.linalg.svd(U)
    return W @ Vh


def unitarity_error(U: np.ndarray) -> float:
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))


def geodesic_rhs(metric: PenaltyMetric, l: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(dl/dt, h)`` for the coefficient vector ``l`` of the dual."""
    alg = algebra(metric.n)
    h = l / metric.penalties
    return alg.bracket(l, h), h


def rk4_geodesic_step(metric: PenaltyMetric, l, U, dt):
    """One classical Runge-Kutta step of the coupled (L, U) system."""
    alg = algebra(metric.n)

    def f(l, U):
        dl, h = geodesic_rhs(metric, l)
        return dl, -1j * (alg.compose(h) @ U)

    k1 = f(l, U)
    k2 = f(l + 0.5 * dt * k1[0], U + 0.5 * dt * k1[1])
    k3 = f(l + 0.5 * dt * k2[0], U + 0.5 * dt * k2[1])
    k4 = f(l + dt * k3[0], U + dt * k3[1])
    l = l + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    U = U + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return l, U


@dataclass
class GeodesicTrajectory:
    """Samples of a geodesic through the identity on a uniform time grid."""

    metric: PenaltyMetric
    times: np.ndarray
    l: np.ndarray  # (nodes, 4**n) Pauli coefficients of L
    U: np.ndarray  # (nodes, 2**n, 2**n)
    repairs: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def h(self) -> np.ndarray:
        return self.l / self.metric.penalties

    @property
    def L(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.l)

    @property
    def H(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.h)

    @property
    def L0(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.l[0])

    @property
    def H0(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.h[0])

    @property
    def speed(self) -> float:
        """Constant speed sqrt(<H, H>) evaluated at t = 0."""
        return float(np.sqrt(np.sum(self.l[0, 1:] * self.h[0, 1:])))

    @property
    def length(self) -> float:
        return self.speed * self.T

    def to_csv(self, include_unitary: bool = False) -> str:
        alg = algebra(self.metric.n)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t"] + [f"l_{s}" for s in alg.words[1:]]
        d = alg.dim
        if include_unitary:
            for part in ("re", "im"):
                header += [f"U{part}_{i}_{j}" for i in range(d) for j in range(d)]
        w.writerow(header)
        for k, t in enumerate(self.times):
            row = [f"{t:.17g}"] + [f"{c:.17g}" for c in self.l[k, 1:]]
            if include_unitary:
                row += [f"{x:.17g}" for x in self.U[k].real.ravel()]
                row += [f"{x:.17g}" for x in self.U[k].imag.ravel()]
            w.writerow(row)
        return buf.getvalue()


def integrate_geodesic(L0: np.ndarray, metric: PenaltyMetric, T: float, steps: int) -> GeodesicTrajectory:
    """Integrate the geodesic with initial dual ``L0`` from t = 0 to ``T``.

    Fixed-step RK4 on (L, U).  U is projected back onto the unitary group
    whenever ``||U^dag U - I||`` exceeds 1e-12; each repair is logged.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if n_qubits(L0) != metric.n:
        raise ValueError("L0 does not match the metric's qubit count")
    l = coefficients(L0)
    l[0] = 0.0
    d = 2**metric.n
    dt = T / steps
    ls = np.empty((steps + 1, l.size))
    Us = np.empty((steps + 1, d, d), dtype=complex)
    ls[0] = l
    U = np.eye(d, dtype=complex)
    Us[0] = U
    repairs = 0
    for k in range(steps):
        l, U = rk4_geodesic_step(metric, l, U, dt)
        if not (np.all(np.isfinite(l)) and np.all(np.isfinite(U))):
            raise FloatingPointError(f"non-finite state at step {k + 1}")
        if unitarity_error(U) > UNITARITY_TOL:
            U = _polar(U)
            repairs += 1
            log.debug("unitarity repair at step %d", k + 1)
        ls[k + 1] = l
        Us[k + 1] = U
    if repairs:
        log.info("geodesic integration applied %d unitarity repairs", repairs)
    return GeodesicTrajectory(metric, np.linspace(0.0, T, steps + 1), ls, Us, repairs)


@dataclass
class ConservationReport:
    times: np.ndarray
    conjugation_drift: np.ndarray  # ||U^dag L U - L(0)|| per node
    speed_drift: np.ndarray  # |<H,H> - <H0,H0>| per node
    one_body_drift: np.ndarray | None  # max |l_w(t) - l_w(0)| over one-body w, per node

    @property
    def max_conjugation_drift(self) -> float:
        return float(self.conjugation_drift.max())

    @property
    def max_speed_drift(self) -> float:
        return float(self.speed_drift.max())

    @property
    def max_one_body_drift(self) -> float | None:
        return None if self.one_body_drift is None else float(self.one_body_drift.max())


def conserved_quantities(traj: GeodesicTrajectory) -> ConservationReport:
    """Drift of the constants of motion along a trajectory."""
    metric = traj.metric
    alg = algebra(metric.n)
    L = traj.L
    L0 = L[0]
    conj = traj.U.conj().transpose(0, 2, 1) @ L @ traj.U
    conj_drift = np.linalg.norm(conj - L0, ord=2, axis=(1, 2))
    speed = np.sum(traj.l[:, 1:] * traj.h[:, 1:], axis=1)
    speed_drift = np.abs(speed - speed[0])
    one_body = None
    if metric.kind in ("standard", "three_qubit_stq"):
        mask = alg.weights == 1
        one_body = np.max(np.abs(traj.l[:, mask] - traj.l[0, mask]), axis=1)
    return ConservationReport(traj.times, conj_drift, speed_drift, one_body)


def is_constant_H_geodesic(H: np.ndarray, metric: PenaltyMetric, tol: float = 1e-12) -> bool:
    """True when exp(-iHt) is a geodesic, i.e. [Q(H), P(H)] = 0."""
    P, Q = metric.P(H), metric.Q(H)
    scale = max(1.0, float(np.linalg.norm(H, 2)) ** 2)
    return float(np.linalg.norm(Q @ P - P @ Q, 2)) <= tol * scale


def canonical_hamiltonian(
    U: np.ndarray,
    T: float = 1.0,
    branch_shifts=None,
    *,
    traceless: bool = True,
    return_phase: bool = False,
    tie_tol: float = 1e-12,
):
    """Hamiltonian H with exp(-iHT) = U and spectrum in (-pi/T, pi/T].

    ``branch_shifts`` adds ``2*pi*k/T`` to the eigenvalues (ordered as
    returned by the Schur form).  With ``traceless`` the trace part is
    removed; the discarded global phase ``phi`` satisfies
    ``U = exp(-iphi) exp(-iHT)`` and is returned when ``return_phase``.
    """
    U = np.asarray(U, dtype=complex)
    if unitarity_error(U) > 1e-10:
        raise ValueError("canonical_hamiltonian expects a unitary matrix")
    Tm, V = sla.schur(U, output="complex")
    lam = np.diag(Tm)
    theta = -np.angle(lam)  # in [-pi, pi)
    theta = np.where(theta <= -np.pi + tie_tol, theta + 2 * np.pi, theta)
    if branch_shifts is not None:
        theta = theta + 2 * np.pi * np.asarray(branch_shifts, dtype=float)
    H = (V * (theta / T)) @ V.conj().T
    H = 0.5 * (H + H.conj().T)
    phase = 0.0
    if traceless:
        shift = np.trace(H).real / H.shape[0]
        H = H - shift * np.eye(H.shape[0])
        phase = shift * T
    if return_phase:
        return H, phase
    return H


# three-qubit solution ----------------------------------------------------

THREE_QUBIT_MODES = ("full", "s_to_zero", "first_order_reduced", "first_order_reduced_s_to_zero")


def _check_weight_class(A: np.ndarray, w: int, name: str) -> None:
    alg = algebra(3)
    c = coefficients(A)
    off = np.abs(c[alg.weights != w])
    if off.size and off.max() > 1e-10 * max(1.0, np.abs(c).max()):
        raise ValueError(f"{name} must contain only weight-{w} terms")


def _diagonal_in_eigenbasis(T0: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Drop the off-diagonal part of T0 in the eigenbasis of A (nondegenerate)."""
    evals, V = np.linalg.eigh(A)
    gaps = np.diff(evals)
    if gaps.size and gaps.min() < 1e-9 * max(1.0, np.abs(evals).max()):
        raise ValueError("first-order reduction needs a nondegenerate spectrum")
    diag = np.real(np.einsum("ij,jk,ki->i", V.conj().T, T0, V))
    return (V * diag) @ V.conj().T


def three_qubit_analytic(S0, T0, Q0, s: float, q: float, t: float, mode: str = "full"):
    """Exact dual components and the large-q unitary for three qubits.

    Returns ``((S, T, Q), U_tilde)`` for the metric ``s*S + T + q*Q``.  The
    components are exact for every finite q and s; ``U_tilde`` is the
    q -> infinity approximation selected by ``mode``.
    """
    if mode not in THREE_QUBIT_MODES:
        raise ValueError(f"mode must be one of {THREE_QUBIT_MODES}")
    for A, w, name in ((S0, 1, "S0"), (T0, 2, "T0"), (Q0, 3, "Q0")):
        if n_qubits(A) != 3:
            raise ValueError(f"{name} must be an 8x8 matrix")
        _check_weight_class(A, w, name)
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    a = inv_q - 1.0 / s
    b = 1.0 - inv_q
    Ea = sla.expm(1j * t * a * S0)
    Eb = sla.expm(1j * t * b * (S0 + Q0))
    Q = Ea @ Q0 @ Ea.conj().T
    Tt = Ea @ Eb @ T0 @ Eb.conj().T @ Ea.conj().T
    local = sla.expm(-1j * t * S0 / s)
    if mode == "full":
        Ut = local @ sla.expm(1j * t * (S0 + Q0)) @ sla.expm(-1j * t * (S0 + T0 + Q0))
    elif mode == "s_to_zero":
        Ut = local @ sla.expm(1j * t * Q0) @ sla.expm(-1j * t * (T0 + Q0))
    elif mode == "first_order_reduced":
        Ut = local @ sla.expm(-1j * t * _diagonal_in_eigenbasis(T0, S0 + Q0))
    else:
        Ut = local @ sla.expm(-1j * t * _diagonal_in_eigenbasis(T0, Q0))
    return (np.array(S0, dtype=complex), Tt, Q), Ut


# formal power series -----------------------------------------------------


class PowerSeriesContext:
    """Vectorized bilinear map of the geodesic equation over Pauli coefficients.

    ``E`` has shape ``(N, N*N)`` with ``N = 4**n`` and satisfies
    ``E @ kron(l, l) = coeffs(i[L, F(L)])``.  Derivatives of L at t = 0
    follow by applying ``E`` and the symmetrizers ``T_m`` to tensor powers
    of ``l``; tensors are kept as sums of product terms, so memory grows
    as (order)! * N rather than N**(order+1).
    """

    def __init__(self, metric: PenaltyMetric, order: int):
        if order < 0:
            raise ValueError("order must be nonnegative")
        if order > 8 or (order > 4 and metric.n > 2):
            raise ValueError("order too large for this qubit count")
        alg = algebra(metric.n)
        N = alg.size
        self.metric = metric
        self.order = order
        coef = alg.f / metric.penalties[None, :]
        E = np.zeros((N, N, N))
        a, b = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        E[alg.prod, a, b] = coef
        self.E3 = E
        self.E = E.reshape(N, N * N)

    def apply_E(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("rab,a,b->r", self.E3, x, y)

    def derivatives(self, l0: np.ndarray) -> list[np.ndarray]:
        """Coefficient vectors of L^(j)(0) for j = 0..order."""
        out = [np.array(l0, dtype=float)]
        for j in range(1, self.order + 1):
            out.append(self._derivative(l0, j))
        return out

    def _derivative(self, l0: np.ndarray, j: int) -> np.ndarray:
        # terms: list of (coefficient, tuple of slot vectors); start from l^(j+1)
        terms = [(1.0, (l0,) * (j + 1))]
        for k in range(j, 0, -1):
            # apply (E x I^(k-1)) to the first two slots
            terms = [(c, (self.apply_E(v[0], v[1]),) + v[2:]) for c, v in terms]
            # symmetrizer T_k = I + S_{1,2} + ... + S_{1,k}
            if k > 1:
                new = []
                for c, v in terms:
                    new.append((c, v))
                    for m in range(1, k):
                        w = list(v)
                        w[0], w[m] = w[m], w[0]
                        new.append((c, tuple(w)))
                terms = _merge(new)
        return sum(c * v[0] for c, v in terms)


def _merge(terms):
    """Combine identical product terms (by object identity of slot vectors)."""
    merged: dict = {}
    for c, v in terms:
        key = tuple(id(x) for x in v)
        if key in merged:
            merged[key] = (merged[key][0] + c, v)
        else:
            merged[key] = (c, v)
    return list(merged.values())


def power_series_L(L0: np.ndarray, metric: PenaltyMetric, order: int, t: float) -> np.ndarray:
    """Truncated Taylor series of L(t) built from the vectorized geodesic equation."""
    ctx = PowerSeriesContext(metric, order)
    l0 = coefficients(L0)
    l0[0] = 0.0
    ders = ctx.derivatives(l0)
    l = sum(d * t**j / factorial(j) for j, d in enumerate(ders))
    return algebra(metric.n).compose(l)


def speed_squared(H: np.ndarray, metric: PenaltyMetric) -> float:
    return inner(H, H, metric)


def transverse_ising(n: int, h: float = 1.0, coupling: float = 1.0, periodic: bool = True) -> np.ndarray:
    """``coupling * sum Z_j Z_{j+1} + h * sum X_j`` on n qubits."""
    terms: dict[str, float] = {}
    bonds = n if (periodic and n > 2) else n - 1
    for j in range(bonds):
        w = ["I"] * n
        w[j] = "Z"
        w[(j + 1) % n] = "Z"
        terms["".join(w)] = terms.get("".join(w), 0.0) + coupling
    for j in range(n):
        terms[single_site("X", j, n)] = h
    return from_terms(terms)
