import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcgeom.geodesic import integrate_geodesic, transverse_ising
from qcgeom.jacobi import (
    GridTooCoarse,
    biinvariant_conjugate_times,
    conjugate_scan,
    constant_H_closed_form,
    constant_H_trajectory,
    inhomogeneous_drive,
    jacobi_propagator,
    lifted_jacobi_solve,
)
from qcgeom.metric import PenaltyMetric
from qcgeom.pauli import algebra, coefficients, from_terms, to_matrix

from .helpers import random_hermitian, unit_speed_dual

seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def curved2():
    m = PenaltyMetric.projective(2, 6.0, ["XI", "IX", "ZZ"])
    traj = integrate_geodesic(unit_speed_dual(m, np.random.default_rng(11), 2.0), m, 1.0, 400)
    return traj, jacobi_propagator(traj)


def _pair(rng, n=2):
    return (random_hermitian(n, rng, traceless=True) for _ in range(2))


def test_propagator_starts_at_identity(curved2):
    _, prop = curved2
    np.testing.assert_array_equal(prop.block(0), np.eye(30))


def test_propagator_short_time(curved2):
    traj, prop = curved2
    k = int(np.argmin(np.abs(traj.times - 1e-2)))
    t = traj.times[k]
    assert np.abs(prop.E2[k] / t - np.eye(15)).max() < 1e-1
    m = PenaltyMetric.projective(2, 6.0, ["XI", "IX", "ZZ"])
    short = integrate_geodesic(traj.L0, m, 1e-3, 4)
    p = jacobi_propagator(short)
    assert np.abs(p.E2[-1] / 1e-3 - np.eye(15)).max() < 1e-2


def test_propagator_columns_match_basis_runs(curved2):
    traj, prop = curved2
    alg = algebra(2)
    for col in (0, 6, 14):
        e = np.zeros(16)
        e[col + 1] = 1.0
        f = lifted_jacobi_solve(traj, np.zeros(16), e, include_inhomogeneous=False)
        np.testing.assert_allclose(prop.E2[:, :, col], f.j[:, 1:], atol=1e-10)
        np.testing.assert_allclose(prop.Kprop[:, :, col], f.k[:, 1:], atol=1e-10)
    assert alg.size == 16


def test_field_matches_propagator(curved2):
    traj, prop = curved2
    J0, Jd = _pair(np.random.default_rng(1))
    f = lifted_jacobi_solve(traj, J0, Jd, include_inhomogeneous=False)
    for k in (100, 400):
        j, jd = prop.apply(k, J0, Jd)
        np.testing.assert_allclose(f.j[k, 1:], j, atol=1e-9)
        U = traj.U[k]
        jd_field = coefficients(U.conj().T @ f.K[k] @ U)[1:]
        np.testing.assert_allclose(jd_field, jd, atol=1e-9)


def test_field_initial_condition_and_hermitian(curved2):
    traj, _ = curved2
    J0, Jd = _pair(np.random.default_rng(2))
    f = lifted_jacobi_solve(traj, J0, Jd)
    np.testing.assert_array_equal(f.j[0, 1:], coefficients(J0)[1:])
    K = f.K
    np.testing.assert_allclose(K, K.conj().transpose(0, 2, 1), atol=1e-14)
    assert np.abs(np.trace(K, axis1=1, axis2=2)).max() < 1e-12


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_linearity(seed):
    m = PenaltyMetric.standard(3, 8)
    traj = integrate_geodesic(unit_speed_dual(m, np.random.default_rng(0)), m, 0.5, 100)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=2)
    A0, Ad = _pair(rng, 3)
    B0, Bd = _pair(rng, 3)
    solve = lambda x, y: lifted_jacobi_solve(traj, x, y, False, check_tol=None).j
    np.testing.assert_allclose(
        solve(a * A0 + b * B0, a * Ad + b * Bd), a * solve(A0, Ad) + b * solve(B0, Bd), atol=1e-10
    )


def test_affine_decomposition(curved2):
    traj, _ = curved2
    J0, Jd = _pair(np.random.default_rng(3))
    full = lifted_jacobi_solve(traj, J0, Jd, True).j
    hom = lifted_jacobi_solve(traj, J0, Jd, False).j
    part = lifted_jacobi_solve(traj, np.zeros(16), np.zeros(16), True).j
    np.testing.assert_allclose(full, hom + part, atol=1e-10)
    assert np.abs(part).max() > 1e-3


def test_constant_H_lifted_equals_conventional():
    m = PenaltyMetric.standard(3, 64)
    traj = integrate_geodesic(transverse_ising(3), m, 1.0, 200)
    assert np.abs(inhomogeneous_drive(m, traj.l[0])).max() < 1e-14
    f = lifted_jacobi_solve(traj, 0 * np.eye(8), 0 * np.eye(8), True)
    assert np.abs(f.j).max() == 0
    J0, Jd = _pair(np.random.default_rng(4), 3)
    np.testing.assert_allclose(
        lifted_jacobi_solve(traj, J0, Jd, True).j, lifted_jacobi_solve(traj, J0, Jd, False).j, atol=1e-12
    )


def test_bi_invariant_K_is_constant():
    m = PenaltyMetric.standard(2, 1)
    traj = integrate_geodesic(random_hermitian(2, np.random.default_rng(5), traceless=True), m, 1.0, 200)
    J0, Jd = _pair(np.random.default_rng(6))
    f = lifted_jacobi_solve(traj, J0, Jd, False)
    assert np.abs(f.k - f.k[0]).max() < 1e-12


def test_grid_too_coarse():
    m = PenaltyMetric.standard(3, 64)
    L0 = unit_speed_dual(m, np.random.default_rng(7))
    traj = integrate_geodesic(L0, m, 1.0, 16)
    with pytest.raises(GridTooCoarse):
        lifted_jacobi_solve(traj, np.zeros(64), L0, True)


def test_semigroup_bi_invariant():
    H = random_hermitian(2, np.random.default_rng(8), traceless=True)
    traj = constant_H_trajectory(H, PenaltyMetric.standard(2, 1), 1.2, 120)
    prop = jacobi_propagator(traj)
    for a, b in [(30, 50), (45, 75)]:
        np.testing.assert_allclose(prop.block(a + b), prop.block(a) @ prop.block(b), atol=1e-9)


def test_semigroup_spatial_frame_penalized():
    # body-frame blocks are not a semigroup for q != 1; the spatial-frame
    # pair (U J U^dag, K) is, since it obeys an autonomous linear equation
    traj = constant_H_trajectory(transverse_ising(3), PenaltyMetric.standard(3, 64), 1.0, 200)
    prop = jacobi_propagator(traj)

    def S(k):
        Rt = prop.R[k].T
        out = np.zeros((126, 126))
        out[:63, :63] = Rt
        out[:63, 63:] = Rt @ prop.E2[k]
        out[63:, 63:] = prop.Kprop[k]
        return out

    for a, b in [(40, 60), (100, 100)]:
        np.testing.assert_allclose(S(a + b), S(a) @ S(b), atol=1e-9)


def test_closed_form_trivial_cases():
    m = PenaltyMetric.standard(3, 64)
    H = transverse_ising(3)
    J0, Jd = _pair(np.random.default_rng(9), 3)
    np.testing.assert_allclose(constant_H_closed_form(H, m, J0, np.zeros((8, 8)), 0.7), J0, atol=1e-13)
    np.testing.assert_allclose(
        constant_H_closed_form(np.zeros((8, 8)), m, J0, Jd, 0.7), J0 + 0.7 * Jd, atol=1e-13
    )


def test_closed_form_rejects_non_constant_H():
    with pytest.raises(ValueError):
        constant_H_closed_form(from_terms({"ZII": 1, "XXX": 1}), PenaltyMetric.standard(3, 4), np.zeros(64), np.zeros(64), 1)


def test_closed_form_matches_ode_ising():
    m = PenaltyMetric.standard(3, 64)
    H = transverse_ising(3)
    traj = constant_H_trajectory(H, m, 1.0, 1000)
    J0, Jd = _pair(np.random.default_rng(10), 3)
    ode = lifted_jacobi_solve(traj, J0, Jd).J[-1]
    np.testing.assert_allclose(constant_H_closed_form(H, m, J0, Jd, 1.0), ode, atol=1e-8)


def test_closed_form_with_hard_part():
    m = PenaltyMetric.standard(3, 16)
    H = from_terms({"XII": 0.4, "IXX": -0.6, "XXX": 0.3})
    traj = constant_H_trajectory(H, m, 1.5, 1500)
    J0, Jd = _pair(np.random.default_rng(12), 3)
    np.testing.assert_allclose(
        constant_H_closed_form(H, m, J0, Jd, 1.5), lifted_jacobi_solve(traj, J0, Jd).J[-1], atol=1e-9
    )


def test_biinvariant_times_examples():
    Z = to_matrix("Z")
    np.testing.assert_allclose(biinvariant_conjugate_times(Z, 10), [np.pi, 2 * np.pi, 3 * np.pi])
    assert biinvariant_conjugate_times(np.zeros((4, 4)), 10) == []
    ZZ = to_matrix("ZI") + to_matrix("IZ")
    np.testing.assert_allclose(
        biinvariant_conjugate_times(ZZ, 2 * np.pi), [np.pi / 2, np.pi, 3 * np.pi / 2, 2 * np.pi]
    )


def test_scan_single_qubit_dip_at_pi():
    traj = constant_H_trajectory(to_matrix("Z"), PenaltyMetric.standard(1, 1), 4.0, 400)
    scan = conjugate_scan(traj)
    assert len(scan.dip_times) == 1
    assert abs(scan.t_c - np.pi) < 1e-6


def test_scan_no_dips_on_short_random_geodesic():
    m = PenaltyMetric.standard(3, 64)
    l = np.r_[0.0, np.random.default_rng(13).normal(size=63)]
    traj = integrate_geodesic(algebra(3).compose(l / np.linalg.norm(l)), m, 1.0, 500)
    assert conjugate_scan(traj).dip_times == []


def test_scan_finds_dips_when_hard_part_dominates():
    # unit speed spent mostly on penalized words: large curvature, early conjugate points
    m = PenaltyMetric.standard(3, 64)
    traj = integrate_geodesic(unit_speed_dual(m, np.random.default_rng(13)), m, 1.0, 500)
    scan = conjugate_scan(traj)
    assert scan.t_c is not None and scan.t_c < 0.5
    assert all(s < scan.threshold for _, s in scan.refined)


def test_scan_csv_and_continuity():
    traj = constant_H_trajectory(to_matrix("ZI") + 0.6 * to_matrix("XX"), PenaltyMetric.standard(2, 1), 5.0, 500)
    scan = conjugate_scan(traj, refine=False)
    lines = scan.to_csv().splitlines()
    assert lines[0] == "t,sigma_min,min_abs_eig,dip_flag"
    assert len(lines) == 501
    d = np.abs(np.diff(scan.sigma_min))
    for k in range(1, len(d) - 1):
        assert d[k] <= 10 * max(d[k - 1], d[k + 1]) + 1e-12


def test_scan_grid_subset():
    traj = constant_H_trajectory(to_matrix("Z"), PenaltyMetric.standard(1, 1), 4.0, 400)
    scan = conjugate_scan(traj, grid=np.linspace(0.5, 4.0, 36))
    assert len(scan.times) == 36
    assert abs(scan.t_c - np.pi) < 1e-6
