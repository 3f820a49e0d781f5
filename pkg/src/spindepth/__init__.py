"""Entanglement-depth detection from collective spin moments."""

from .boundary import (
    BoundaryCurve, CurveCache, GridSpec, compute_F_curve, compute_F_curve_halfinteger, compute_F_halfinteger,
    convexity_check, evaluate, evaluate_exact, g_from_f, producibility_boundary, tangent_bound, tilde_G,
)
from .criteria import (
    DepthVerdict, detect_depth, duan_criterion, nonlinear_criterion, observation3_predicate,
    qubit_tangent_criterion, sm_criterion, xi2, xi2_sm,
)
from .errors import *  # noqa: F401,F403
from .fluctuating import (
    ShotEnsemble, WStatistic, fluctuating_linear_parameters, fluctuating_nonlinear, fluctuating_sm, w_expectation,
)
from .records import CriterionResult, ExtendedMeasurementRecord, MeasurementRecord
from .spin import SpinLength, build_spin_matrices, ground_state, squeezing_hamiltonian
from .states import (
    SymmetricStateMoments, decohere_particles, dicke_moments, noisy_dicke_moments,
    random_producible_moments, squeezed_state_moments, tightness_diagnostics,
)

__version__ = "0.1.0"
