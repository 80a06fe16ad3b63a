"""Deforming geodesics in the penalty parameter.

A geodesic from the identity to a fixed target is followed as q grows
from 1.  The velocity of its initial Hamiltonian in q comes from the
lifted Jacobi equation; an Euler predictor in log q is followed by Newton
corrections on the endpoint map.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .geodesic import GeodesicTrajectory, canonical_hamiltonian, integrate_geodesic
from .jacobi import jacobi_propagator, lifted_jacobi_solve
from .metric import PenaltyMetric
from .pauli import algebra, coefficients, n_qubits

log = logging.getLogger(__name__)

PINV_RCOND = 1e-10
SINGULAR_TOL = 1e-4


class DeformationFailed(RuntimeError):
    def __init__(self, message: str, trace: "DeformationTrace"):
        super().__init__(message)
        self.trace = trace


def endpoint_error(traj: GeodesicTrajectory, U_target: np.ndarray) -> float:
    """Operator norm of U(T) - U_target (no global phase quotient)."""
    return float(np.linalg.norm(traj.U[-1] - np.asarray(U_target), 2))


@dataclass
class EndpointInverse:
    """Regularized inverse of the endpoint Jacobi map Jdot(0) -> J(T)."""

    matrix: np.ndarray
    sigma_min: float
    near_singular: bool

    @classmethod
    def from_map(cls, JT: np.ndarray, T: float) -> "EndpointInverse":
        s = np.linalg.svd(JT, compute_uv=False)
        near = bool(s[-1] <= SINGULAR_TOL * T)
        if near:
            log.info("endpoint Jacobi map near singular: sigma_min = %.3e", s[-1])
        return cls(np.linalg.pinv(JT, rcond=PINV_RCOND), float(s[-1]), near)

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Apply the inverse to a full coefficient vector (identity entry ignored)."""
        out = np.zeros_like(y)
        out[1:] = self.matrix @ y[1:]
        return out


def _formula_applies(metric: PenaltyMetric) -> bool:
    if metric.kind == "custom":
        return False
    p = metric.penalties
    return bool(np.all(p[metric.easy_mask] == 1.0) and np.all(p[metric.hard_mask] == metric.q))


@dataclass
class DerivativeResult:
    dgamma: np.ndarray  # coefficients of dH_q(0)/dq
    sigma_min: float
    near_singular: bool
    method: str

    @property
    def matrix(self) -> np.ndarray:
        return algebra(n_qubits_from_size(self.dgamma.size)).compose(self.dgamma)


def n_qubits_from_size(size: int) -> int:
    return int(round(np.log(size) / np.log(4)))


def _q1_source(traj: GeodesicTrajectory) -> np.ndarray:
    """int_0^T U^dag (i t [P(H), Q(H)]) U dt as coefficients."""
    metric = traj.metric
    alg = algebra(metric.n)
    h = traj.h[0]
    hp = np.where(metric.easy_mask, h, 0.0)
    hq = np.where(metric.easy_mask, 0.0, h)
    C = alg.compose(alg.bracket(hp, hq))
    Ud = traj.U.conj().transpose(0, 2, 1)
    vals = np.real(alg.decompose(Ud @ C @ traj.U)) * traj.times[:, None]
    return simpson(vals, x=traj.times, axis=0)


def geodesic_derivative(
    traj: GeodesicTrajectory,
    q: float | None = None,
    *,
    method: str = "auto",
    inverse: EndpointInverse | None = None,
    return_info: bool = False,
):
    """Rate of change in q of the initial Hamiltonian of a fixed-endpoint geodesic.

    ``method``:
      * ``"formula"`` uses the closed expressions (one at q = 1, one for
        q > 1), valid for metrics with penalties in {1, q};
      * ``"jacobi"`` inverts the endpoint map on the particular solution
        of the inhomogeneous lifted Jacobi equation;
      * ``"auto"`` picks the formula when it applies.

    A near-singular endpoint map is inverted with a relative pseudo-inverse
    cutoff and flagged in the returned info.
    """
    metric = traj.metric
    q = metric.q if q is None else float(q)
    if abs(q - metric.q) > 1e-12 * max(1.0, q):
        raise ValueError("q does not match the trajectory's metric")
    if method == "auto":
        method = "formula" if _formula_applies(metric) else "jacobi"
    if inverse is None:
        inverse = EndpointInverse.from_map(jacobi_propagator(traj, endpoint_only=True).endpoint, traj.T)
    if method == "formula":
        if not _formula_applies(metric):
            raise ValueError("closed formula needs penalties in {1, q}")
        if q == 1.0:
            dg = inverse.solve(_q1_source(traj))
        else:
            l0 = traj.l[0].copy()
            l0[0] = 0.0
            dg = (traj.T * inverse.solve(l0) - l0) / (q * (q - 1.0))
    elif method == "jacobi":
        part = lifted_jacobi_solve(traj, np.zeros(traj.l.shape[1]), np.zeros(traj.l.shape[1]), True, check_tol=None)
        dg = -inverse.solve(part.j[-1])
    else:
        raise ValueError(f"unknown method {method!r}")
    dg[0] = 0.0
    if return_info:
        return DerivativeResult(dg, inverse.sigma_min, inverse.near_singular, method)
    return algebra(metric.n).compose(dg)


# targets ------------------------------------------------------------------


def normalize_determinant(U: np.ndarray) -> np.ndarray:
    """Rescale U by a global phase so that det U = 1 (principal root)."""
    d = U.shape[0]
    return U * np.exp(-1j * np.angle(np.linalg.det(U)) / d)


def qft_unitary(n: int) -> np.ndarray:
    d = 2**n
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def haar_unitary(n: int, seed: int) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a seeded complex Gaussian."""
    rng = np.random.default_rng(seed)
    d = 2**n
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph[None, :]


def builtin_target(name: str, n: int = 3, seed: int = 0) -> np.ndarray:
    if name == "qft":
        return normalize_determinant(qft_unitary(n))
    if name == "haar_random":
        return normalize_determinant(haar_unitary(n, seed))
    raise ValueError(f"unknown builtin target {name!r}")


def write_unitary(U: np.ndarray) -> str:
    """Dense complex matrix, one row per line, entries ``re im`` pairs, 17 digits."""
    lines = []
    for row in np.asarray(U, dtype=complex):
        lines.append(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    return "\n".join(lines) + "\n"


def read_unitary(text: str) -> np.ndarray:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
    vals = np.array([[float(x) for x in r] for r in rows])
    if vals.shape[1] % 2:
        raise ValueError("each row needs real/imaginary pairs")
    U = vals[:, 0::2] + 1j * vals[:, 1::2]
    if U.shape[0] != U.shape[1]:
        raise ValueError("unitary file is not square")
    return U


# continuation ------------------------------------------------------------------


def shoot_geodesic(
    target: np.ndarray,
    metric: PenaltyMetric,
    l0: np.ndarray,
    T: float,
    steps: int,
    tol: float = 1e-9,
    max_iter: int = 8,
):
    """Newton iteration on L(0) until the geodesic ends at ``target``.

    Each step solves the endpoint Jacobi map for the Hamiltonian change
    that removes ``log(U(T)^dag target)`` to first order.  Returns
    ``(l0, trajectory, endpoint_error, endpoint_inverse, iterations)``.
    """
    alg = algebra(metric.n)
    l0 = np.array(l0, dtype=float)
    l0[0] = 0.0

    def run(l):
        traj = integrate_geodesic(alg.compose(l), metric, T, steps)
        inv = EndpointInverse.from_map(jacobi_propagator(traj, endpoint_only=True).endpoint, T)
        return traj, endpoint_error(traj, target), inv

    traj, err, inv = run(l0)
    k = 0
    while err > tol and k < max_iter:
        W = traj.U[-1].conj().T @ target
        dh = inv.solve(coefficients(canonical_hamiltonian(W, 1.0)))
        l0 = l0 + metric.penalties * dh
        l0[0] = 0.0
        k += 1
        traj, err_new, inv = run(l0)
        log.debug("q=%.6g correction %d: %.3e -> %.3e", metric.q, k, err, err_new)
        err = err_new
    if k:
        log.info("q=%.6g: %d corrector steps, endpoint error %.3e", metric.q, k, err)
    return l0, traj, err, inv, k


@dataclass
class DeformationNode:
    q: float
    l0: np.ndarray  # coefficients of L_q(0)
    length: float
    endpoint_error: float
    sigma_min: float
    near_singular: bool
    corrections: int
    dl_dq: np.ndarray  # coefficients of dL_q(0)/dq


@dataclass
class DeformationTrace:
    n: int
    T: float
    target: np.ndarray
    effective_target: np.ndarray
    phase: float
    nodes: list[DeformationNode] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    final_trajectory: GeodesicTrajectory | None = None
    hard_mask: np.ndarray | None = None

    @property
    def q_grid(self) -> np.ndarray:
        return np.array([nd.q for nd in self.nodes])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([nd.length for nd in self.nodes])

    @property
    def endpoint_errors(self) -> np.ndarray:
        return np.array([nd.endpoint_error for nd in self.nodes])

    @property
    def sigma_min(self) -> np.ndarray:
        return np.array([nd.sigma_min for nd in self.nodes])

    @property
    def flags(self) -> np.ndarray:
        return np.array([nd.near_singular for nd in self.nodes])

    @property
    def l0(self) -> np.ndarray:
        return np.array([nd.l0 for nd in self.nodes])

    @property
    def dl_dq(self) -> np.ndarray:
        return np.array([nd.dl_dq for nd in self.nodes])

    @property
    def first_flag_q(self) -> float | None:
        f = self.flags
        return float(self.q_grid[np.argmax(f)]) if f.any() else None

    @property
    def final_error(self) -> float:
        return self.nodes[-1].endpoint_error

    def to_csv(self) -> str:
        words = algebra(self.n).words[1:]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for k, v in sorted(self.meta.items()):
            buf.write(f"# {k}: {v}\n")
        w.writerow(["q", "length", "endpoint_error", "sigma_min_JT", "flags"] + [f"l_{s}" for s in words])
        for nd in self.nodes:
            flags = "|".join(
                f for f, on in (("near_singular", nd.near_singular), ("corrected", nd.corrections > 0)) if on
            )
            w.writerow(
                [f"{nd.q:.17g}", f"{nd.length:.17g}", f"{nd.endpoint_error:.17g}", f"{nd.sigma_min:.17g}", flags]
                + [f"{c:.17g}" for c in nd.l0[1:]]
            )
        return buf.getvalue()


def _log_grid(q_end: float, per_decade: int) -> np.ndarray:
    k = max(1, int(np.ceil(np.log10(q_end) * per_decade)))
    return np.logspace(0.0, np.log10(q_end), k + 1)


def continue_in_q(
    U_target: np.ndarray,
    T: float,
    q_end: float,
    q_steps: int | None = None,
    H_start: np.ndarray | None = None,
    *,
    metric: PenaltyMetric | None = None,
    nodes_per_decade: int = 64,
    steps: int = 1000,
    tol: float = 1e-6,
    corrector_tol: float = 1e-9,
    max_corrections: int = 8,
    densify: int = 4,
    refine_dips: bool = True,
    refine_iter: int = 40,
) -> DeformationTrace:
    """Follow the geodesic from I to ``U_target`` as q goes from 1 to ``q_end``.

    The start Hamiltonian defaults to the canonical logarithm of the target.
    Its trace part is dropped, so the curve ends at
    ``U_target * exp(i phase)``; that effective target is what the
    endpoint errors refer to (identical to ``U_target`` whenever the
    canonical logarithm is already traceless).

    ``q_steps`` fixes the number of log-spaced intervals; otherwise
    ``nodes_per_decade`` is used.  After a near-singular node the step in
    log q is divided by ``densify`` until the endpoint map recovers.
    With ``refine_dips`` every strict local minimum of sigma_min(J_T)
    along the path is refined by golden-section search in log q (stopping
    once the map is flagged) and the refined node is inserted in order.
    Raises DeformationFailed when a node cannot be brought below ``tol``.
    """
    U_target = np.asarray(U_target, dtype=complex)
    n = n_qubits(U_target)
    if q_end < 1:
        raise ValueError("q_end must be at least 1")
    base = (metric or PenaltyMetric.standard(n, 1.0)).with_q(1.0)
    if base.n != n:
        raise ValueError("metric does not match the target")
    alg = algebra(n)
    if H_start is None:
        H_start, phase = canonical_hamiltonian(U_target, T, return_phase=True)
    else:
        phase = 0.0
    eff = U_target * np.exp(1j * phase)
    trace = DeformationTrace(n, T, U_target, eff, float(phase), hard_mask=base.hard_mask.copy())
    trace.meta.update({"T": T, "q_end": q_end, "steps": steps, "phase": f"{phase:.17g}"})

    if q_steps is not None:
        grid = np.logspace(0.0, np.log10(q_end), q_steps + 1) if q_end > 1 else np.array([1.0])
    else:
        grid = _log_grid(q_end, nodes_per_decade) if q_end > 1 else np.array([1.0])

    def correct(metric_q, l0):
        return shoot_geodesic(eff, metric_q, l0, T, steps, corrector_tol, max_corrections)

    def make_node(metric_q, l0, traj, err, inv, k):
        d = geodesic_derivative(traj, metric_q.q, inverse=inv, return_info=True)
        dl = metric_q.dpenalty * traj.h[0] + metric_q.penalties * d.dgamma
        dl[0] = 0.0
        return DeformationNode(metric_q.q, l0.copy(), traj.length, err, inv.sigma_min, inv.near_singular, k, dl)

    def record(metric_q, l0, traj, err, inv, k):
        nd = make_node(metric_q, l0, traj, err, inv, k)
        trace.nodes.append(nd)
        trace.final_trajectory = traj
        if err > tol:
            raise DeformationFailed(f"endpoint error {err:.3e} at q = {metric_q.q:.6g} exceeds {tol:g}", trace)
        return nd

    def refine_dip(a, b, c):
        # golden-section search in log q for the minimum of sigma_min(J_T),
        # stopping early once the endpoint map is flagged
        best = {}

        def f(x):
            q = float(np.exp(x))
            mq = base.with_q(q)
            out = correct(mq, b.l0 + (q - b.q) * b.dl_dq)
            if out[2] <= tol and (not best or out[3].sigma_min < best["s"]):
                best.update(s=out[3].sigma_min, q=q, mq=mq, out=out)
            return out[3].sigma_min

        lo, hi = np.log(a.q), np.log(c.q)
        g = (np.sqrt(5) - 1) / 2
        xc, xd = hi - g * (hi - lo), lo + g * (hi - lo)
        fc, fd = f(xc), f(xd)
        for _ in range(refine_iter):
            if best["s"] <= SINGULAR_TOL * T or hi - lo < 1e-9:
                break
            if fc < fd:
                hi, xd, fd = xd, xc, fc
                xc = hi - g * (hi - lo)
                fc = f(xc)
            else:
                lo, xc, fc = xc, xd, fd
                xd = lo + g * (hi - lo)
                fd = f(xd)
        if not best or best["s"] >= b.sigma_min:
            return
        nd = make_node(best["mq"], *best["out"])
        log.info("refined dip at q = %.9g: sigma_min = %.3e", nd.q, nd.sigma_min)
        pos = int(np.searchsorted(trace.q_grid, nd.q))
        trace.nodes.insert(pos, nd)

    l0 = coefficients(H_start)
    l0[0] = 0.0
    m1 = base.with_q(1.0)
    l0, traj, err, inv, k = correct(m1, l0)
    nd = record(m1, l0, traj, err, inv, k)
    path = [nd]

    log_grid = np.log(grid)
    i = 1
    x = 0.0
    while i < len(grid):
        x_next = log_grid[i]
        step = x_next - x
        if nd.near_singular and densify > 1:
            step = min(step, (log_grid[i] - log_grid[i - 1]) / densify)
        x_new = min(x + step, x_next)
        q_old, q_new = np.exp(x), np.exp(x_new)
        if abs(x_new - x_next) < 1e-14:
            q_new = grid[i]
        pred = nd.l0 + (x_new - x) * q_old * nd.dl_dq
        mq = base.with_q(q_new)
        l0, traj, err, inv, k = correct(mq, pred)
        nd = record(mq, l0, traj, err, inv, k)
        path.append(nd)
        if refine_dips and len(path) >= 3:
            a, b, c = path[-3:]
            if b.sigma_min < a.sigma_min and b.sigma_min < c.sigma_min and not b.near_singular:
                refine_dip(a, b, c)
        x = x_new
        if abs(x - x_next) < 1e-14:
            x = x_next
            i += 1
    return trace
