import json
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcgeom.curvature import (
    averaging_constant,
    average_sectional_curvature,
    c_coeff,
    class_sizes,
    curvature_component,
    curvature_report,
    n_sigma_count,
    n_sigma_count_brute,
    ricci_by_weight,
    ricci_diagonal,
    ricci_flow_step,
    scalar_asymptotic,
    scalar_closed_form,
    scalar_curvature,
    sectional,
)
from qcgeom.metric import PenaltyMetric, connection_right_invariant, inner
from qcgeom.pauli import algebra, all_words, to_matrix, weight

from .helpers import random_hermitian


def _admissible(n, rng, count):
    alg = algebra(n)
    out = []
    while len(out) < count:
        r, s, t = rng.integers(1, alg.size, size=3)
        m = alg.prod[alg.prod[r, s], t]
        if m:
            out.append((r, s, t, m))
    return out


def _word(k, n):
    return algebra(n).words[k]


def test_selection_rule():
    m = PenaltyMetric.standard(2, 4)
    assert curvature_component("XI", "YI", "ZI", "XZ", m) == 0.0
    rng = np.random.default_rng(0)
    alg = algebra(2)
    for _ in range(200):
        r, s, t, mu = rng.integers(1, 16, size=4)
        if alg.prod[alg.prod[r, s], alg.prod[t, mu]]:
            assert curvature_component(*(_word(k, 2) for k in (r, s, t, mu)), m) == 0.0


def test_bi_invariant_single_qubit():
    m = PenaltyMetric.standard(1, 1)
    assert abs(curvature_component("X", "Y", "Y", "X", m) - 1.0) < 1e-14
    assert abs(sectional(to_matrix("X"), to_matrix("Y"), m) - 1.0) < 1e-14


@pytest.mark.parametrize("q", [1.0, 4.0, 64.0])
def test_tensor_symmetries_and_bianchi(q):
    m = PenaltyMetric.standard(2, q) if q == 1.0 else PenaltyMetric.projective(2, q, ["XI", "IZ", "YY"])
    rng = np.random.default_rng(1)
    R = lambda *k: curvature_component(*(_word(i, 2) for i in k), m)
    for r, s, t, mu in _admissible(2, rng, 200):
        v = R(r, s, t, mu)
        assert abs(v + R(s, r, t, mu)) < 1e-10
        assert abs(v + R(r, s, mu, t)) < 1e-10
        assert abs(v - R(t, mu, r, s)) < 1e-10
        assert abs(v + R(s, t, r, mu) + R(t, r, s, mu)) < 1e-10


def _nested_connection_component(a, b, c, d, m):
    """<R(X,Y)Z, W> from right-invariant connections, an independent route."""
    X, Y, Z, W = (to_matrix(w) for w in (a, b, c, d))
    nab = lambda P, Q: connection_right_invariant(P, Q, m)
    XY = 1j * (X @ Y - Y @ X)
    RZ = nab(X, nab(Y, Z)) - nab(Y, nab(X, Z)) - nab(XY, Z)
    return inner(RZ, W, m)


def test_component_matches_nested_connection():
    m = PenaltyMetric.projective(2, 5.0, ["XI", "IX", "ZZ"])
    rng = np.random.default_rng(2)
    for r, s, t, mu in _admissible(2, rng, 60):
        a, b, c, d = (_word(k, 2) for k in (r, s, t, mu))
        # convention R_{abcd} = <R(a, b) c, d> up to the ordering used by the component formula
        ref = _nested_connection_component(a, b, c, d, m)
        assert abs(curvature_component(a, b, c, d, m) - ref) < 1e-12


def test_sectional_examples():
    m1 = PenaltyMetric.standard(2, 1)
    rng = np.random.default_rng(3)
    X, Y = (random_hermitian(2, rng, traceless=True) for _ in range(2))
    r = sectional(X, Y, m1, return_flag=True)
    assert r.normalized
    # orthonormalize then compare with a quarter of the squared bracket
    Xn = X / np.sqrt(inner(X, X, m1))
    Yn = Y - inner(Xn, Y, m1) * Xn
    Yn /= np.sqrt(inner(Yn, Yn, m1))
    C = 1j * (Xn @ Yn - Yn @ Xn)
    assert abs(r.value - 0.25 * inner(C, C, m1)) < 1e-12
    assert sectional(to_matrix("ZI"), to_matrix("IZ"), PenaltyMetric.standard(2, 7)) == 0.0


def test_sectional_rejects_dependent_inputs():
    with pytest.raises(ValueError):
        sectional(to_matrix("XI"), 2 * to_matrix("XI"), PenaltyMetric.standard(2, 3))


def test_sectional_both_signs_at_large_q():
    m = PenaltyMetric.standard(3, 64)
    # two easy words with a hard commutator: -3/4 * 4q + 1/2 * 8 = -188
    assert sectional(to_matrix("IXX"), to_matrix("XIY"), m) == pytest.approx(-188.0, abs=1e-10)
    rng = np.random.default_rng(4)
    vals = [sectional(*(random_hermitian(3, rng, traceless=True) for _ in range(2)), m) for _ in range(20)]
    assert min(vals) > 0


def test_sectional_matches_components():
    for m in (PenaltyMetric.standard(2, 1), PenaltyMetric.projective(2, 9, ["XI", "ZZ"]), PenaltyMetric.projective(1, 3, ["X"])):
        n = m.n
        alg = algebra(n)
        p = m.penalties
        for s, t in product(range(1, alg.size), repeat=2):
            if not alg.f[s, t]:
                continue
            x = np.zeros(alg.size)
            y = np.zeros(alg.size)
            x[s] = 1 / np.sqrt(p[s])
            y[t] = 1 / np.sqrt(p[t])
            ref = curvature_component(_word(s, n), _word(t, n), _word(t, n), _word(s, n), m) / (p[s] * p[t])
            assert abs(sectional(x, y, m) - ref) < 1e-10


def test_c_coefficient_commuting_convention():
    m = PenaltyMetric.standard(3, 10)
    assert c_coeff("XXX", "XII", m) == pytest.approx(0.5 * (1 + (1 - 10) / 1))
    assert c_coeff("XII", "ZZZ", m) == pytest.approx(0.5 * (1 + (10 - 1) / 10))


@pytest.mark.parametrize("q", [1.0, 4.0, 64.0])
def test_ricci_contraction_matches_brute(q):
    m = PenaltyMetric.projective(2, q, ["XI", "IX", "ZZ", "YI"])
    p = m.penalties
    words = all_words(2)
    for s in words[1:]:
        contr = sum(curvature_component(r, s, s, r, m) / p[k] for k, r in enumerate(words) if k)
        assert abs(contr - ricci_diagonal(s, m)) <= 1e-9 * max(1.0, abs(contr))


def test_ricci_examples():
    for n in (1, 2, 3):
        m = PenaltyMetric.standard(n, 1)
        for s in all_words(n)[1:]:
            assert ricci_diagonal(s, m) == 4**n / 2
    for q in (1.0, 3.0, 64.0):
        m = PenaltyMetric.standard(2, q)
        assert ricci_diagonal("XI", m) == pytest.approx(8)
        m3 = PenaltyMetric.standard(3, q)
        assert ricci_diagonal("XYZ", m3) == pytest.approx(12 * q**2 + 32 - 12 / q)
    with pytest.raises(ValueError):
        ricci_diagonal("II", PenaltyMetric.standard(2, 1))
    with pytest.raises(ValueError):
        ricci_diagonal("XI", PenaltyMetric.projective(2, 4, ["XI"]), method="closed_form")


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("q", [1.0, 4.0, 64.0])
def test_ricci_closed_form_matches_brute(n, q):
    m = PenaltyMetric.standard(n, q)
    alg = algebra(n)
    for u in range(1, n + 1):
        s = alg.words[int(np.nonzero(alg.weights == u)[0][0])]
        a, b = ricci_diagonal(s, m, "brute"), ricci_diagonal(s, m, "closed_form")
        assert abs(a - b) <= 1e-9 * abs(a)


def test_ricci_by_weight_matches_words():
    for n, q in [(3, 5.0), (4, 2.0)]:
        m = PenaltyMetric.standard(n, q)
        g = np.array([1.0] + [1.0 if v <= 2 else q for v in range(1, n + 1)])
        rc = ricci_by_weight(g, n)
        alg = algebra(n)
        for u in range(1, n + 1):
            k = int(np.nonzero(alg.weights == u)[0][0])
            assert rc[u] == pytest.approx(ricci_diagonal(alg.words[k], m), rel=1e-12)


def test_scalar_examples():
    assert scalar_curvature(1, 1.0) == pytest.approx(6, abs=1e-12)
    assert scalar_curvature(1, 1.0, "contraction") == pytest.approx(6, abs=1e-12)
    assert scalar_curvature(3, 64.0) < 0
    with pytest.raises(ValueError):
        scalar_curvature(0, 1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("q", [1.0, 2.5, 64.0])
def test_scalar_methods_agree(n, q):
    a, b = scalar_curvature(n, q, "closed_form"), scalar_curvature(n, q, "contraction")
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_scalar_asymptotic_ratio():
    ratios = [scalar_closed_form(n, 3.0) / scalar_asymptotic(n, 3.0) for n in (4, 6, 8, 12)]
    errs = [abs(r - 1) for r in ratios]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 1e-2


def test_n_sigma_count_examples():
    assert n_sigma_count("Z", 1, 1) == 2
    assert n_sigma_count("XZ", 1, 1) == 0  # no anticommuting weight-1 pair multiplies to XZ
    assert n_sigma_count("XZ", 1, 2) == n_sigma_count_brute("XZ", 1, 2) == 4
    with pytest.raises(ValueError):
        n_sigma_count(2, 1, 1)


def test_n_sigma_count_exhaustive_n3():
    for s in all_words(3)[1:]:
        for v, w in product(range(4), repeat=2):
            assert n_sigma_count(s, v, w) == n_sigma_count_brute(s, v, w)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.data())
def test_counting_completeness(n, data):
    u = data.draw(st.integers(1, n))
    total = sum(n_sigma_count(u, v, w, n) for v in range(n + 1) for w in range(n + 1))
    assert total == 4**n // 2


def test_class_sizes_partition():
    for n in range(1, 6):
        assert class_sizes(n).sum() == 4**n


@pytest.mark.parametrize("n", [2, 3])
def test_flow_fixed_point(n):
    w = np.ones(n)
    assert np.abs(ricci_flow_step(w, n, 1e-3) - w).max() < 1e-12


def test_flow_zero_step_and_rejection():
    w = np.array([1.0, 1.0, 64.0])
    np.testing.assert_array_equal(ricci_flow_step(w, 3, 0.0), w)
    with pytest.raises(ValueError):
        ricci_flow_step(w, 3, 10.0)
    with pytest.raises(ValueError):
        ricci_flow_step([1.0, -1.0, 2.0], 3, 1e-3)


def test_flow_drifts_toward_bi_invariant():
    w = np.array([1.0, 1.0, 64.0])
    ratios = []
    for _ in range(40):
        w = ricci_flow_step(w, 3, 2e-5)
        ratios.append(w.max() / w.min())
    assert ratios[-1] < 64
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))


def test_average_curvature_identity_bi_invariant():
    # every plane has the same curvature at n = 1, q = 1
    mc = average_sectional_curvature(PenaltyMetric.standard(1, 1), samples=2000, seed=1)
    assert abs(mc.mean - 1.0) < 1e-12


def test_average_curvature_corrected_identity():
    # R = m (m - 1) <K> with m = 4**n - 1 the dimension of the sampled space
    m = PenaltyMetric.projective(2, 4.0, ["XI", "IX", "YI", "IY"])
    mc = average_sectional_curvature(m, samples=40_000, seed=3)
    p = m.penalties
    R = sum(ricci_diagonal(s, m) / p[k] for k, s in enumerate(all_words(2)) if k)
    dim = 15
    assert abs(dim * (dim - 1) * mc.mean - R) <= 3 * dim * (dim - 1) * mc.stderr


def test_average_curvature_independent_of_jobs():
    m = PenaltyMetric.standard(2, 4)
    a = average_sectional_curvature(m, samples=3000, seed=5, jobs=1, chunk=1000)
    b = average_sectional_curvature(m, samples=3000, seed=5, jobs=3, chunk=1000)
    assert a.mean == b.mean and a.samples == 3000


def test_averaging_constant():
    assert averaging_constant(2) == 15 and averaging_constant(2, "su") == 14
    with pytest.raises(ValueError):
        averaging_constant(2, "o")


def test_report_json():
    rep = curvature_report(3, 64.0, flow_steps=2, ds=1e-5, mc_samples=500)
    d = json.loads(rep.to_json())
    assert abs(d["scalar"] - d["scalar_contraction"]) <= 1e-9 * abs(d["scalar"])
    assert set(d["ricci_by_weight"]) == {"1", "2", "3"}
    assert len(d["flow_history"]) == 3
    assert d["average"]["constant"] == 63


def test_weight_function_consistency():
    assert weight("XIZ") == 2
