"""Jacobi fields, their propagators and conjugate points.

Fields are integrated in the right-invariant form: the perturbation
``K = U Jdot U^dag`` obeys a linear equation driven by the geodesic, and
``J`` is recovered from ``Jdot = U^dag K U``.  Everything runs on real
Pauli coefficient vectors; the adjoint action ``X -> U^dag X U`` is carried
as an orthogonal matrix ``R`` with ``dR/dt = R ad(H)``.

Propagator blocks act on the traceless coordinates (the 4**n - 1
non-identity words).  With ``J(0)`` as initial data and ``K(0) = 0`` the
homogeneous solution is ``J = J(0)``, so ``E1 = I`` and ``E3 = 0``
identically; only the ``Jdot(0)`` columns are integrated.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .geodesic import GeodesicTrajectory, is_constant_H_geodesic
from .metric import PenaltyMetric
from .pauli import algebra, coefficients, n_qubits

log = logging.getLogger(__name__)

DIP_RATIO = 1e-4


class GridTooCoarse(RuntimeError):
    pass


def _as_coeffs(A, n: int) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim == 1:
        c = np.array(A, dtype=float)
    else:
        if n_qubits(A) != n:
            raise ValueError("operator does not match the trajectory's qubit count")
        c = coefficients(A)
    c[0] = 0.0
    return c


def inhomogeneous_drive(metric: PenaltyMetric, l: np.ndarray) -> np.ndarray:
    """Coefficients of ``F(G'F(i[L,H]) + i[H, G'(H)])``, G' the q-derivative of G."""
    alg = algebra(metric.n)
    p = metric.penalties
    dp = metric.dpenalty
    h = l / p
    return (dp * alg.bracket(l, h) / p + alg.bracket(h, dp * h)) / p


class _Engine:
    """RK4 for the state (l, R, K, J); K and J may carry several columns."""

    def __init__(self, metric: PenaltyMetric, inhomogeneous: bool):
        self.metric = metric
        self.alg = algebra(metric.n)
        self.p = metric.penalties
        self.inhomogeneous = inhomogeneous

    def rhs(self, l, R, K, J):
        p = self.p
        h = l / p
        adl = self.alg.ad(l)
        adh = self.alg.ad(h)
        dl = adl @ h
        M = (adl - adh * p[None, :]) / p[:, None]
        dK = M @ K
        if self.inhomogeneous:
            dK = dK - inhomogeneous_drive(self.metric, l)[:, None]
        return dl, R @ adh, dK, R @ K

    def step(self, state, dt):
        l, R, K, J = state
        k1 = self.rhs(l, R, K, J)
        k2 = self.rhs(*(x + 0.5 * dt * d for x, d in zip(state, k1)))
        k3 = self.rhs(*(x + 0.5 * dt * d for x, d in zip(state, k2)))
        k4 = self.rhs(*(x + dt * d for x, d in zip(state, k3)))
        return tuple(
            x + dt / 6 * (a + 2 * b + 2 * c + e) for x, a, b, c, e in zip(state, k1, k2, k3, k4)
        )


def _uniform_dt(times: np.ndarray) -> float:
    dts = np.diff(times)
    if np.ptp(dts) > 1e-9 * dts.mean():
        raise ValueError("trajectory grid must be uniform")
    return float(dts.mean())


@dataclass
class LiftedField:
    metric: PenaltyMetric
    times: np.ndarray
    j: np.ndarray  # (nodes, 4**n) coefficients of J
    k: np.ndarray  # (nodes, 4**n) coefficients of K
    c: np.ndarray  # (nodes, 4**n) coefficients of the inhomogeneous drive (zero if homogeneous)
    inhomogeneous: bool

    @property
    def J(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.j)

    @property
    def K(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.k)

    @property
    def C(self) -> np.ndarray:
        return algebra(self.metric.n).compose(self.c)


def _solve_columns(traj, K0, J0, inhomogeneous, stride=1):
    metric = traj.metric
    eng = _Engine(metric, inhomogeneous)
    dt = _uniform_dt(traj.times) * stride
    N = algebra(metric.n).size
    state = (traj.l[0].copy(), np.eye(N), K0, J0)
    steps = traj.steps // stride
    Js, Ks, ls = [J0], [K0], [state[0]]
    for _ in range(steps):
        state = eng.step(state, dt)
        ls.append(state[0])
        Ks.append(state[2])
        Js.append(state[3])
    return np.array(ls), np.array(Ks), np.array(Js)


def lifted_jacobi_solve(
    traj: GeodesicTrajectory,
    J0,
    Jdot0,
    include_inhomogeneous: bool = True,
    check_tol: float | None = 1e-6,
) -> LiftedField:
    """Integrate the lifted Jacobi equation along ``traj``.

    ``J0`` and ``Jdot0`` are Hermitian matrices or coefficient vectors.
    When ``check_tol`` is set the run is repeated with twice the step and
    a relative disagreement at T above ``check_tol`` raises GridTooCoarse.
    """
    n = traj.metric.n
    j0 = _as_coeffs(J0, n)
    k0 = _as_coeffs(Jdot0, n)  # U(0) = I, so K(0) = Jdot(0)
    ls, Ks, Js = _solve_columns(traj, k0[:, None], j0[:, None], include_inhomogeneous)
    j, k = Js[:, :, 0], Ks[:, :, 0]
    if check_tol is not None and traj.steps >= 4 and traj.steps % 2 == 0:
        _, _, Jc = _solve_columns(traj, k0[:, None], j0[:, None], include_inhomogeneous, stride=2)
        diff = np.abs(Jc[-1, :, 0] - j[-1]).max()
        scale = max(np.abs(j).max(), np.abs(k).max() * traj.T, 1e-300)
        if diff > check_tol * scale:
            raise GridTooCoarse(
                f"step-halving disagreement {diff:.3e} exceeds {check_tol:g} x scale {scale:.3e}"
            )
    if include_inhomogeneous:
        c = np.array([inhomogeneous_drive(traj.metric, l) for l in ls])
    else:
        c = np.zeros_like(j)
    return LiftedField(traj.metric, traj.times.copy(), j, k, c, include_inhomogeneous)


@dataclass
class JacobiPropagator:
    """Homogeneous Jacobi propagator on traceless Pauli coordinates.

    ``E2[k]`` maps Jdot(0) to J(t_k); ``E4[k]`` maps Jdot(0) to Jdot(t_k).
    ``Kprop[k]`` maps K(0) to K(t_k) and ``R[k]`` is the adjoint action of
    ``U(t_k)^dag``, so that ``E4 = R @ Kprop``.
    """

    base: GeodesicTrajectory
    times: np.ndarray
    E2: np.ndarray
    Kprop: np.ndarray
    R: np.ndarray

    @property
    def dim(self) -> int:
        return self.E2.shape[-1]

    @property
    def E1(self) -> np.ndarray:
        return np.broadcast_to(np.eye(self.dim), self.E2.shape)

    @property
    def E3(self) -> np.ndarray:
        return np.zeros_like(self.E2)

    @property
    def E4(self) -> np.ndarray:
        return self.R @ self.Kprop

    def block(self, k: int) -> np.ndarray:
        """Full 2m x 2m propagator at node ``k``."""
        m = self.dim
        E = np.zeros((2 * m, 2 * m))
        E[:m, :m] = np.eye(m)
        E[:m, m:] = self.E2[k]
        E[m:, m:] = self.R[k] @ self.Kprop[k]
        return E

    def apply(self, k: int, J0, Jdot0) -> tuple[np.ndarray, np.ndarray]:
        n = self.base.metric.n
        j0 = _as_coeffs(J0, n)[1:]
        jd = _as_coeffs(Jdot0, n)[1:]
        return j0 + self.E2[k] @ jd, self.R[k] @ (self.Kprop[k] @ jd)

    @property
    def endpoint(self) -> np.ndarray:
        """The endpoint map Jdot(0) -> J(T)."""
        return self.E2[-1]


def jacobi_propagator(traj: GeodesicTrajectory, endpoint_only: bool = False) -> JacobiPropagator:
    """Assemble the homogeneous propagator from the 4**n - 1 basis solutions."""
    metric = traj.metric
    N = algebra(metric.n).size
    eng = _Engine(metric, inhomogeneous=False)
    dt = _uniform_dt(traj.times)
    basis = np.eye(N)[:, 1:]
    state = (traj.l[0].copy(), np.eye(N), basis.copy(), np.zeros((N, N - 1)))
    E2, Kp, Rs = [state[3][1:]], [state[2][1:]], [state[1][1:, 1:]]
    for _ in range(traj.steps):
        state = eng.step(state, dt)
        if not np.all(np.isfinite(state[2])):
            raise FloatingPointError("non-finite Jacobi propagator")
        if not endpoint_only:
            E2.append(state[3][1:])
            Kp.append(state[2][1:])
            Rs.append(state[1][1:, 1:])
    if endpoint_only:
        E2.append(state[3][1:])
        Kp.append(state[2][1:])
        Rs.append(state[1][1:, 1:])
        times = traj.times[[0, -1]]
    else:
        times = traj.times.copy()
    return JacobiPropagator(traj, times, np.array(E2), np.array(Kp), np.array(Rs))


# constant Hamiltonians ---------------------------------------------------


def _phi_times_t(z: np.ndarray, t: float) -> np.ndarray:
    """t * (exp(z) - 1)/z with a series branch near zero."""
    out = np.empty_like(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zs = z[small]
    out[small] = t * (1 + zs / 2 + zs * zs / 6 + zs**3 / 24)
    zb = z[~small]
    out[~small] = t * np.expm1(zb) / zb
    return out


def _integral_of_product(X: np.ndarray, Y: np.ndarray, t: float, cond_limit: float = 1e8) -> np.ndarray:
    """int_0^t exp(rX) exp(rY) dr.

    Uses the eigenstructure of the Kronecker-sum generator
    (``X`` from the left, ``Y`` from the right).  Falls back to a block
    exponential when either eigenvector basis is badly conditioned.
    """
    bx, W = np.linalg.eig(X)
    ay, V = np.linalg.eig(Y)
    if np.linalg.cond(W) < cond_limit and np.linalg.cond(V) < cond_limit:
        z = (bx[:, None] + ay[None, :]) * t
        Phi = _phi_times_t(z, t)
        core = np.linalg.solve(W, V) * Phi
        out = W @ core @ np.linalg.inv(V)
        return np.real_if_close(out, tol=1e6).real
    log.debug("closed form: ill-conditioned eigenbasis, using block exponential")
    m = X.shape[0]
    Z = np.zeros((2 * m, 2 * m))
    Z[:m, :m] = -X
    Z[:m, m:] = np.eye(m)
    Z[m:, m:] = Y
    top = sla.expm(Z * t)[:m, m:]
    return sla.expm(X * t) @ top


def constant_H_closed_form(H: np.ndarray, metric: PenaltyMetric, J0, Jdot0, t: float) -> np.ndarray:
    """J(t) on the geodesic exp(-iHt) without time stepping.

    Requires ``[P(H), Q(H)] = 0``.  Then ``K(r) = exp(rM) K(0)`` for the
    constant generator ``M = F(ad_L - ad_H G)`` and
    ``J(t) = J(0) + int_0^t exp(r ad_H) exp(rM) dr Jdot(0)``.
    """
    n = n_qubits(H)
    if n != metric.n:
        raise ValueError("H does not match the metric")
    if n > 3:
        raise ValueError("closed form supports n <= 3")
    if not is_constant_H_geodesic(H, metric):
        raise ValueError("H does not generate a constant-Hamiltonian geodesic")
    alg = algebra(n)
    p = metric.penalties
    h = coefficients(H)
    h[0] = 0.0
    l = p * h
    adh = alg.ad(h)[1:, 1:]
    M = ((alg.ad(l) - alg.ad(h) * p[None, :]) / p[:, None])[1:, 1:]
    j0 = _as_coeffs(J0, n)
    jd = _as_coeffs(Jdot0, n)
    out = j0.copy()
    out[1:] += _integral_of_product(adh, M, t) @ jd[1:]
    return alg.compose(out)


def constant_H_trajectory(H: np.ndarray, metric: PenaltyMetric, T: float, steps: int) -> GeodesicTrajectory:
    """Exact trajectory exp(-iHt) for a constant-Hamiltonian geodesic."""
    alg = algebra(metric.n)
    h = coefficients(H)
    h[0] = 0.0
    times = np.linspace(0.0, T, steps + 1)
    evals, V = np.linalg.eigh(alg.compose(h))
    U = np.einsum("ij,tj,kj->tik", V, np.exp(-1j * np.outer(times, evals)), V.conj())
    l = np.broadcast_to(metric.penalties * h, (steps + 1, h.size)).copy()
    return GeodesicTrajectory(metric, times, l, U)


# conjugate points --------------------------------------------------------


def _sigma_min(E2: np.ndarray) -> float:
    return float(np.linalg.svd(E2, compute_uv=False)[-1])


def _min_abs_eig(E2: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(E2)).min())


@dataclass
class ConjugateScan:
    times: np.ndarray
    sigma_min: np.ndarray
    min_abs_eig: np.ndarray
    dip_flag: np.ndarray
    refined: list[tuple[float, float]] = field(default_factory=list)  # (t, sigma) per flagged dip
    threshold: float = 0.0

    @property
    def t_c(self) -> float | None:
        return self.refined[0][0] if self.refined else None

    @property
    def dip_times(self) -> list[float]:
        return [t for t, _ in self.refined]

    def rows(self):
        return list(zip(self.times, self.sigma_min, self.min_abs_eig, self.dip_flag))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "sigma_min", "min_abs_eig", "dip_flag"])
        for t, s, e, f in self.rows():
            w.writerow([f"{t:.17g}", f"{s:.17g}", f"{e:.17g}", int(f)])
        return buf.getvalue()


def _golden_min(f, a: float, b: float, tol: float) -> tuple[float, float]:
    g = (np.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def conjugate_scan(
    traj: GeodesicTrajectory,
    grid=None,
    ratio: float = DIP_RATIO,
    refine: bool = True,
    substeps: int = 8,
) -> ConjugateScan:
    """Smallest singular value of E2 along the trajectory and flagged dips.

    ``grid`` selects a subset of trajectory nodes (times, matched to the
    nearest node); by default every node after t = 0 is scanned.  A node is
    a candidate when it is a strict local minimum; the minimum is refined
    by golden-section search between the neighbouring nodes, and flagged
    when the refined value is below ``ratio`` times the scan median.
    """
    prop = jacobi_propagator(traj)
    if grid is None:
        idx = np.arange(1, len(traj.times))
    else:
        idx = np.unique(np.clip(np.searchsorted(traj.times, np.asarray(grid) - 1e-12), 1, traj.steps))
    times = traj.times[idx]
    sig = np.array([_sigma_min(prop.E2[k]) for k in idx])
    eig = np.array([_min_abs_eig(prop.E2[k]) for k in idx])
    med = float(np.median(sig))
    thr = ratio * med
    flags = np.zeros(len(idx), dtype=bool)
    refined = []
    eng = _Engine(traj.metric, inhomogeneous=False)
    N = algebra(traj.metric.n).size
    dt = _uniform_dt(traj.times)

    def state_at(k):
        R = np.eye(N)
        R[1:, 1:] = prop.R[k]
        K = np.zeros((N, N - 1))
        K[1:] = prop.Kprop[k]
        J = np.zeros((N, N - 1))
        J[1:] = prop.E2[k]
        return (traj.l[k].copy(), R, K, J)

    def sigma_at(k0, t):
        state = state_at(k0)
        span = t - traj.times[k0]
        if span > 0:
            m = max(substeps, int(np.ceil(4 * span / dt)))
            for _ in range(m):
                state = eng.step(state, span / m)
        return _sigma_min(state[3][1:])

    for i in range(1, len(idx) - 1):
        if not (sig[i] < sig[i - 1] and sig[i] < sig[i + 1]):
            continue
        k = idx[i]
        t, s = traj.times[k], sig[i]
        if refine:
            lo, hi = traj.times[idx[i - 1]], traj.times[idx[i + 1]]
            t, s = _golden_min(lambda x: sigma_at(idx[i - 1], x), lo, hi, 1e-9 * max(1.0, traj.T))
            s = min(s, sig[i])
        if s < thr:
            flags[i] = True
            refined.append((float(t), float(s)))
    return ConjugateScan(times, sig, eig, flags, refined, thr)


def biinvariant_conjugate_times(H: np.ndarray, t_max: float, dedup_tol: float = 1e-10) -> list[float]:
    """Conjugate times ``2 m pi / (lambda_j - lambda_k)`` of exp(-iHt) for the bi-invariant metric."""
    evals = np.linalg.eigvalsh(H)
    gaps = np.abs(evals[:, None] - evals[None, :])
    gaps = gaps[gaps > 1e-12 * max(1.0, np.abs(evals).max())]
    if gaps.size == 0:
        log.info("fully degenerate spectrum: no conjugate points")
        return []
    out = []
    for g in np.unique(gaps):
        m = 1
        while 2 * np.pi * m / g <= t_max + dedup_tol:
            out.append(2 * np.pi * m / g)
            m += 1
    out.sort()
    dedup: list[float] = []
    for t in out:
        if not dedup or t - dedup[-1] > dedup_tol:
            dedup.append(t)
    return dedup
