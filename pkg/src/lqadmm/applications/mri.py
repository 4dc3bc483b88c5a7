"""Cartesian MRI: ``min (mu/2)||D F u - f||^2 + (1/2)||grad u||^2`` with periodic gradients."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import DegenerateConstantsError, DimensionMismatchError, EmptyPartitionError
from ..lqp import LQProblem, ground_truth
from ..operators import GridDims, fourier_grid_symbol, make_operator
from ..solvers import SolverParams
from ..tuning import SpectrumCache, TunerConfig, closed_form_mri, mri_branch, mri_constants, tune_theta
from .random_instances import exact_radius
from .report import ExperimentReport, run_baselines, run_solver, tuned_result

DEFAULT_NOISE = 1.0 / 255.0  # one grey level on an 8-bit scale


def mri_problem(image, mask, mu: float, noise_sigma: float = DEFAULT_NOISE, seed: int = 0) -> LQProblem:
    img = np.asarray(image, dtype=float)
    mask = np.asarray(mask)
    if mask.shape != img.shape:
        raise DimensionMismatchError(f"mask {mask.shape} and image {img.shape} differ")
    dims = GridDims(*img.shape)
    a = make_operator("fourier-sampling", dims=dims, mask=mask)
    rng = np.random.default_rng(seed)
    m = a.codomain_dim
    noise = noise_sigma * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    f = a.forward(img.ravel()) + noise
    return LQProblem(a, make_operator("periodic-gradient", dims=dims), mu, f, label="mri")


def mri_reconstruct(image, mask, mu: float = 1.0, noise_sigma: float = DEFAULT_NOISE, seed: int = 0,
                    max_iters: int = 5000, tol: float = 1e-10, config: Optional[TunerConfig] = None,
                    baselines: bool = True) -> ExperimentReport:
    """Reconstruct from undersampled noisy k-space with every solver.

    ADMM uses the closed-form theta (falling back to numerical tuning if the
    constants are degenerate); oADMM tunes theta on the joint objective.
    """
    problem = mri_problem(image, mask, mu, noise_sigma, seed)
    shape = np.asarray(image).shape
    dims = GridDims(*shape)
    report = ExperimentReport(
        f"mri {shape[0]}x{shape[1]}, mu={mu:g}, sampled fraction={float(np.mean(mask)):.3g}, "
        f"noise sigma={noise_sigma:g}, seed={seed}"
    )
    cache = SpectrumCache(problem)
    try:
        consts = mri_constants(mask, fourier_grid_symbol(dims))
        report.details.update(a=consts.a, b=consts.b, c=consts.c, d=consts.d)
        theta = closed_form_mri(mu, consts)
        report.details["branch"] = mri_branch(mu, consts)
        report.tuned["admm"] = tuned_result(theta, None, cache.lambda_n(theta), "lambda-n")
    except (DegenerateConstantsError, EmptyPartitionError) as exc:
        report.notes.append(f"closed form unavailable ({exc}); theta tuned numerically")
        report.tuned["admm"] = tune_theta(problem, "lambda-n", config, cache)
        theta = report.tuned["admm"].theta_star
    relaxed = tune_theta(problem, "joint", config, cache)
    report.tuned["oadmm"] = relaxed
    gt = ground_truth(problem)
    run_solver(report, "admm", problem, SolverParams("admm", theta=theta, max_iters=max_iters, tol=tol), gt.u_star,
               exact_radius(problem, theta))
    u = run_solver(report, "oadmm", problem,
                   SolverParams("oadmm", theta=relaxed.theta_star, alpha=relaxed.alpha_star, max_iters=max_iters,
                                tol=tol),
                   gt.u_star, exact_radius(problem, relaxed.theta_star, relaxed.alpha_star))
    if baselines:
        run_baselines(report, problem, gt.u_star, max_iters, tol)
    report.images = {
        "reconstruction": np.abs(u).reshape(shape),
        "zero_filled": np.abs(problem.A.adjoint(problem.f)).reshape(shape),
    }
    report.details["solvable"] = gt.solvable
    return report
