"""Spectral parameter selection for ADMM on linear quadratic problems."""

from .lqp import GroundTruth, LQProblem, augmented_lagrangian, ground_truth, objective
from .operators import GridDims, LinearOperator, Spectrum, apply, gram_spectrum, make_operator, materialize
from .solvers import ConvergenceTrace, SolverParams, lipschitz_step, solve
from .spectral import (
    IterationOperator,
    SpectralSummary,
    build_iteration_operator,
    empirical_convergence_factor,
    estimate_iteration_count,
    extremal_eigenvalues,
    spectral_radius,
)
from .tuning import (
    MriConstants,
    TunerConfig,
    TunerResult,
    closed_form_deblur,
    closed_form_mri,
    joint_objective,
    lambda_n_objective,
    mri_constants,
    optimal_alpha,
    tune_theta,
)
