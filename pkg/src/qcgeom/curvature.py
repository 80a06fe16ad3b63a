"""Curvature of diagonal penalty metrics.

All quantities are expressed in the Pauli basis, where the metric is
``<sigma, tau> = q_sigma delta``.  Sums run over the 4**n - 1 non-identity
words.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .metric import PenaltyMetric
from .pauli import algebra, coefficients, n_qubits, weight, word_index

log = logging.getLogger(__name__)


def _idx(w) -> int:
    return w if isinstance(w, (int, np.integer)) else word_index(w)


def _pbracket(metric: PenaltyMetric, a: int, b: int) -> float:
    alg = algebra(metric.n)
    return metric.penalties[alg.prod[a, b]] if alg.f[a, b] else 1.0


def c_coeff(sigma, tau, metric: PenaltyMetric) -> float:
    """``(1 + (q_tau - q_sigma)/q_[sigma,tau]) / 2``, with q_[sigma,tau] = 1 for commuting pairs."""
    a, b = _idx(sigma), _idx(tau)
    p = metric.penalties
    return 0.5 * (1.0 + (p[b] - p[a]) / _pbracket(metric, a, b))


def _bracket_inner(metric, a, b, c, d) -> float:
    """<i[a,b], i[c,d]> for basis words."""
    alg = algebra(metric.n)
    f = alg.f
    if not (f[a, b] and f[c, d]) or alg.prod[a, b] != alg.prod[c, d]:
        return 0.0
    return f[a, b] * f[c, d] * metric.penalties[alg.prod[a, b]]


def curvature_component(rho, sigma, tau, mu, metric: PenaltyMetric) -> float:
    """R_{rho sigma tau mu} on basis words from the three-term bracket formula."""
    alg = algebra(metric.n)
    r, s, t, m = (_idx(w) for w in (rho, sigma, tau, mu))
    if alg.prod[alg.prod[r, s], alg.prod[t, m]] != 0:
        return 0.0
    val = c_coeff(r, t, metric) * c_coeff(s, m, metric) * _bracket_inner(metric, r, t, s, m)
    val -= c_coeff(s, t, metric) * c_coeff(r, m, metric) * _bracket_inner(metric, s, t, r, m)
    if alg.f[r, s]:
        pi = alg.prod[r, s]
        if alg.f[pi, t] and alg.prod[pi, t] == m:
            val -= c_coeff(pi, t, metric) * alg.f[r, s] * alg.f[pi, t] * metric.penalties[m]
    return float(val)


@dataclass
class SectionalResult:
    value: float
    normalized: bool  # True when the inputs had to be orthonormalized


def _orthonormalize(x, y, p):
    nx = np.sqrt(np.sum(p * x * x))
    if nx == 0:
        raise ValueError("X must be nonzero")
    x = x / nx
    y = y - np.sum(p * x * y) * x
    ny = np.sqrt(np.sum(p * y * y))
    if ny < 1e-12 * max(1.0, np.sqrt(np.sum(p * y * y) + 1)):
        raise ValueError("X and Y are linearly dependent")
    return x, y / ny


def _sectional_coeffs(x, y, metric: PenaltyMetric) -> float:
    alg = algebra(metric.n)
    p = metric.penalties

    def ip(a, b):
        return float(np.sum(p * a * b))

    xy = alg.bracket(x, y)
    bxy = alg.bracket(p * x, y) / p
    byx = alg.bracket(p * y, x) / p
    bxx = alg.bracket(p * x, x) / p
    byy = alg.bracket(p * y, y) / p
    s = bxy + byx
    # the last term vanishes when X and Y are single Pauli words
    return -0.75 * ip(xy, xy) + 0.25 * ip(s, s) + 0.5 * ip(xy, bxy - byx) - ip(bxx, byy)


def sectional(X, Y, metric: PenaltyMetric, tol: float = 1e-10, return_flag: bool = False):
    """Sectional curvature K(X, Y) of the plane spanned by X and Y.

    Inputs that are not orthonormal are Gram-Schmidt normalized first;
    ``return_flag`` reports whether that happened.
    """
    n = metric.n
    x = coefficients(X) if np.ndim(X) == 2 else np.array(X, dtype=float)
    y = coefficients(Y) if np.ndim(Y) == 2 else np.array(Y, dtype=float)
    if x.size != 4**n or y.size != 4**n:
        raise ValueError("inputs do not match the metric")
    x[0] = y[0] = 0.0
    p = metric.penalties
    gram = np.array([[np.sum(p * x * x), np.sum(p * x * y)], [np.sum(p * x * y), np.sum(p * y * y)]])
    adjusted = bool(np.abs(gram - np.eye(2)).max() > tol)
    if adjusted:
        log.info("sectional: inputs orthonormalized")
        x, y = _orthonormalize(x, y, p)
    k = _sectional_coeffs(x, y, metric)
    return SectionalResult(k, adjusted) if return_flag else k


def ricci_diagonal(sigma, metric: PenaltyMetric, method: str = "brute") -> float:
    """Diagonal Ricci entry Rc_{sigma sigma}.

    ``brute`` sums over the anticommuting words; ``closed_form`` uses the
    weight-class expressions for the standard metric.
    """
    s = _idx(sigma)
    if s == 0:
        raise ValueError("Ricci entry is not defined for the identity word")
    n = metric.n
    if method == "brute":
        alg = algebra(n)
        p = metric.penalties
        rho = np.nonzero(alg.f[:, s])[0]
        pb = p[alg.prod[rho, s]]
        return float(4**n + np.sum((p[s] ** 2 - 2 * p[rho] ** 2) / (p[rho] * pb)))
    if method == "closed_form":
        if metric.kind != "standard":
            raise ValueError("closed form applies to the standard metric only")
        return _ricci_closed(n, algebra(n).weights[s], metric.q)
    raise ValueError(f"unknown method {method!r}")


def _ricci_closed(n: int, w: int, q: float) -> float:
    h = 4**n / 2
    if w == 1:
        return 2 * (3 * n - 2) + (h - 2 * (3 * n - 2)) / q**2
    if w == 2:
        return -24 * (n - 2) * q + 8 * (6 * n - 11) + (h - 8 * (3 * n - 5)) / q**2
    if w == 3:
        return 12 * q**2 + h + 36 * (n - 3) - 12 * (3 * n - 8) / q
    return h + 4 * w * (3 * n - 2 * w) - 4 * w * (3 * n - 2 * w) / q


def scalar_closed_form(n: int, q: float) -> float:
    return (
        -54 * n * (n - 1) * (n - 2) * q
        + 6 * n * (36 * n**2 - 99 * n + 64)
        + ((4**n - 1 + 3 * n * (3 * n - 1) / 2) * 4**n / 2 - 6 * n * (45 * n**2 - 117 * n + 74)) / q
        - (3 * n * (3 * n - 1) * 4 ** (n - 1) - 6 * n * (3 * n - 4) * (6 * n - 7)) / q**2
    )


def scalar_asymptotic(n: int, q: float) -> float:
    """Dominant large-n terms of the standard-metric scalar curvature."""
    return -54 * n**3 * q + 216 * n**3 + 16**n / (2 * q) - 9 * n**2 * 4 ** (n - 1) / q**2


def standard_weight_penalties(n: int, q: float) -> np.ndarray:
    """Penalty per weight class 0..n for the standard metric."""
    return np.array([1.0 if v <= 2 else q for v in range(n + 1)])


def scalar_curvature(n: int, q: float, method: str = "closed_form") -> float:
    """Scalar curvature of the standard n-qubit metric with penalty q."""
    if n < 1 or q <= 0:
        raise ValueError("need n >= 1 and q > 0")
    if method == "closed_form":
        return float(scalar_closed_form(n, q))
    if method == "contraction":
        if n <= 4:
            metric = PenaltyMetric.standard(n, q)
            p = metric.penalties
            return float(sum(ricci_diagonal(s, metric) / p[s] for s in range(1, 4**n)))
        g = standard_weight_penalties(n, q)
        return scalar_from_weights(g, n)
    raise ValueError(f"unknown method {method!r}")


# counting -------------------------------------------------------------------


def n_sigma_count(sigma, v: int, w: int, n: int | None = None) -> int:
    """Number of weight-v words that anticommute with ``sigma`` and give a weight-w product.

    ``sigma`` may be a word or, with ``n`` given, just its weight.
    """
    if isinstance(sigma, str):
        n = len(sigma)
        u = weight(sigma)
    else:
        if n is None:
            raise ValueError("n is required when sigma is given as a weight")
        u = int(sigma)
    if not (0 <= v <= n and 0 <= w <= n):
        raise ValueError("weights must lie in 0..n")
    e = u + v - w
    if e <= 0 or e % 2 == 0:
        return 0
    total = Fraction(0)
    for k in range(0, min(u, v) + 1):
        if e - k < 0 or e - k > k:
            continue
        total += Fraction(4, 3) ** k * comb(u, k) * comb(n - u, v - k) * comb(k, e - k)
    total *= Fraction(3**v, 2**e)
    if total.denominator != 1:
        raise ArithmeticError("non-integer count")
    return int(total)


def n_sigma_count_brute(sigma: str, v: int, w: int) -> int:
    n = len(sigma)
    alg = algebra(n)
    s = word_index(sigma)
    rho = np.nonzero(alg.f[:, s])[0]
    return int(np.sum((alg.weights[rho] == v) & (alg.weights[alg.prod[rho, s]] == w)))


def _count_table(n: int) -> np.ndarray:
    """N[u, v, w] for sigma of weight u."""
    N = np.zeros((n + 1, n + 1, n + 1))
    for u in range(1, n + 1):
        for v in range(n + 1):
            for w in range(n + 1):
                N[u, v, w] = n_sigma_count(u, v, w, n)
    return N


def ricci_by_weight(g: np.ndarray, n: int) -> np.ndarray:
    """Ricci entry per weight class (index 0 unused) for weight-diagonal penalties ``g``."""
    g = np.asarray(g, dtype=float)
    N = _count_table(n)
    out = np.zeros(n + 1)
    for u in range(1, n + 1):
        num = g[u] ** 2 - 2 * g[:, None] ** 2
        out[u] = 4**n + np.sum(N[u] * num / (g[:, None] * g[None, :]))
    return out


def class_sizes(n: int) -> np.ndarray:
    return np.array([comb(n, u) * 3**u for u in range(n + 1)])


def scalar_from_weights(g: np.ndarray, n: int) -> float:
    rc = ricci_by_weight(g, n)
    sizes = class_sizes(n)
    return float(np.sum(sizes[1:] * rc[1:] / np.asarray(g, dtype=float)[1:]))


def ricci_flow_step(weights, n: int, ds: float) -> np.ndarray:
    """One explicit Euler step of the normalized Ricci flow on weight classes.

    ``weights`` holds the penalty for weights 1..n (length n) or 0..n
    (length n+1, entry 0 ignored).  Returns the same layout.
    """
    w = np.asarray(weights, dtype=float)
    padded = w.size == n
    if w.size not in (n, n + 1):
        raise ValueError("weights must have length n or n+1")
    g = np.concatenate([[1.0], w]) if padded else w.copy()
    if np.any(g[1:] <= 0):
        raise ValueError("weights must be positive")
    rc = ricci_by_weight(g, n)
    R = scalar_from_weights(g, n)
    new = g.copy()
    new[1:] = g[1:] + ds * (-2 * rc[1:] + 2 * R * g[1:] / (4**n - 1))
    if np.any(new[1:] <= 0):
        raise ValueError("step rejected: a weight class would become non-positive")
    return new[1:] if padded else new


# average curvature ------------------------------------------------------------


def averaging_constant(n: int, group: str = "u") -> int:
    if group == "u":
        return 4**n - 1
    if group == "su":
        return 4**n - 2
    raise ValueError("group must be 'u' or 'su'")


@dataclass
class MonteCarloCurvature:
    mean: float
    stderr: float
    samples: int


def _sectional_batch(metric: PenaltyMetric, rng: np.random.Generator, count: int) -> np.ndarray:
    alg = algebra(metric.n)
    N = alg.size
    p = metric.penalties
    C = np.zeros((N, N, N))
    a, b = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    C[alg.prod, a, b] = alg.f
    sq = np.sqrt(p[1:])
    u = rng.standard_normal((count, N - 1))
    v = rng.standard_normal((count, N - 1))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v -= np.sum(u * v, axis=1, keepdims=True) * u
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = np.zeros((count, N))
    y = np.zeros((count, N))
    x[:, 1:] = u / sq
    y[:, 1:] = v / sq

    def br(s, t):
        return np.einsum("rab,ka,kb->kr", C, s, t)

    def ip(s, t):
        return np.sum(p * s * t, axis=1)

    xy = br(x, y)
    bxy = br(p * x, y) / p
    byx = br(p * y, x) / p
    bxx = br(p * x, x) / p
    byy = br(p * y, y) / p
    s = bxy + byx
    return -0.75 * ip(xy, xy) + 0.25 * ip(s, s) + 0.5 * ip(xy, bxy - byx) - ip(bxx, byy)


def average_sectional_curvature(
    metric: PenaltyMetric, samples: int = 100_000, seed: int = 0, jobs: int = 1, chunk: int = 10_000
) -> MonteCarloCurvature:
    """Monte Carlo mean of K over planes spanned by uniformly random orthonormal pairs.

    Chunks draw from independent substreams of ``seed``, so the result does
    not depend on ``jobs``.
    """
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    work = [(np.random.default_rng(s), c) for s, c in zip(streams, sizes)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(lambda rc: _sectional_batch(metric, *rc), work))
    else:
        parts = [_sectional_batch(metric, *rc) for rc in work]
    k = np.concatenate(parts)
    return MonteCarloCurvature(float(k.mean()), float(k.std(ddof=1) / np.sqrt(k.size)), int(k.size))


@dataclass
class CurvatureReport:
    n: int
    q: float
    ricci_by_weight: dict = field(default_factory=dict)
    scalar: float = 0.0
    scalar_contraction: float = 0.0
    flow_history: list = field(default_factory=list)
    average: dict | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def curvature_report(
    n: int, q: float, flow_steps: int = 0, ds: float = 1e-4, mc_samples: int = 0, seed: int = 0,
    group: str = "u", jobs: int = 1,
) -> CurvatureReport:
    g = standard_weight_penalties(n, q)
    rc = ricci_by_weight(g, n)
    rep = CurvatureReport(
        n=n,
        q=q,
        ricci_by_weight={str(u): float(rc[u]) for u in range(1, n + 1)},
        scalar=scalar_curvature(n, q, "closed_form"),
        scalar_contraction=scalar_from_weights(g, n),
    )
    w = g[1:].copy()
    rep.flow_history.append([0.0] + [float(x) for x in w])
    for k in range(flow_steps):
        w = ricci_flow_step(w, n, ds)
        rep.flow_history.append([ds * (k + 1)] + [float(x) for x in w])
    if mc_samples:
        mc = average_sectional_curvature(PenaltyMetric.standard(n, q), mc_samples, seed, jobs)
        rep.average = {
            "mean": mc.mean,
            "stderr": mc.stderr,
            "samples": mc.samples,
            "group": group,
            "constant": averaging_constant(n, group),
        }
    return rep
