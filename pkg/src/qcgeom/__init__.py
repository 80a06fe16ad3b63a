"""Riemannian geometry of penalty metrics on the n-qubit unitary group."""

from .pauli import (
    PauliVector,
    all_words,
    commutes,
    compose,
    decompose,
    pauli_product,
    split_PQ,
    to_matrix,
    weight,
)
from .metric import PenaltyMetric, curve_length, dual, inner, inverse_dual
from .geodesic import (
    GeodesicTrajectory,
    canonical_hamiltonian,
    conserved_quantities,
    integrate_geodesic,
    is_constant_H_geodesic,
    power_series_L,
    three_qubit_analytic,
)
from .jacobi import (
    biinvariant_conjugate_times,
    conjugate_scan,
    constant_H_closed_form,
    jacobi_propagator,
    lifted_jacobi_solve,
)
from .deform import continue_in_q, endpoint_error, geodesic_derivative
from .curvature import (
    curvature_component,
    n_sigma_count,
    ricci_diagonal,
    ricci_flow_step,
    scalar_curvature,
    sectional,
)
from .extension import boolean_unitaries, canonical_extension, special_extension_check

__version__ = "0.1.0"
