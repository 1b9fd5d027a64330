"""Lyapunov steering, spectral conditions and random chains for the
Galerkin-truncated bilinear Schroedinger equation on an interval."""

from .conditions import (
    ConditionReport, check_conditions, check_coupling, check_nonresonance,
    eigenvalue_perturbation_derivative, rational_independence_test,
    resonance_breaking_scan,
)
from .dynamics import (
    ControlSignal, Trajectory, basis_state, free_evolve, linearized_solve,
    propagate, propagate_final, propagate_many,
)
from .errors import ConfigError, DegenerateKernel, LineSearchFailed, NumericalFailure, Stalled
from .lyapunov import (
    LyapunovConfig, SteeringReport, alpha_admissible, auto_alpha, choose_probe,
    coercivity_constant, derivative_via_linearization, kernel_derivative,
    line_search_sigma, lyapunov_value, phi_kernel, steer_to_eigenstate,
)
from .markov import (
    ChainRun, RandomAmplitudeSpec, empirical_average, run_chain, sample_eta,
    step_chain, uniqueness_diagnostic,
)
from .spectral import (
    EigenBasis, Grid1D, SampledPotential, builtin_potential, coupling_matrix,
    project_away, sobolev_norm_sq, solve_dirichlet_eigs,
)

__version__ = "0.1.0"
