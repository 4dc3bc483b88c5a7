"""Image deblurring: ``min (mu/2)||K u - f||^2 + (1/2)||u||^2`` with a periodic Gaussian blur ``K``."""

from __future__ import annotations

import numpy as np

from ..lqp import LQProblem, ground_truth
from ..operators import GridDims, make_operator
from ..solvers import SolverParams
from ..tuning import SpectrumCache, closed_form_deblur, joint_value
from .random_instances import exact_radius
from .report import ExperimentReport, run_baselines, run_solver, tuned_result


def deblur_problem(image, mu: float, noise_sigma: float = 1e-4, seed: int = 0, kernel_size: int = 7,
                   kernel_sigma: float = 2.0, blur: bool = True) -> LQProblem:
    img = np.asarray(image, dtype=float)
    dims = GridDims(*img.shape)
    if blur:
        k = make_operator("gaussian-blur", dims=dims, size=kernel_size, sigma=kernel_sigma)
    else:
        k = make_operator("identity", dims=dims)
    rng = np.random.default_rng(seed)
    f = k.forward(img.ravel()) + noise_sigma * rng.standard_normal(dims.size)
    return LQProblem(k, make_operator("identity", dims=dims), mu, f, label="deblur")


def deblur(image, mu: float = 1e3, seed: int = 0, noise_sigma: float = 1e-4, max_iters: int = 5000,
           tol: float = 1e-10, blur: bool = True, baselines: bool = True) -> ExperimentReport:
    """Blur and corrupt ``image``, then restore it with every solver at closed-form parameters."""
    problem = deblur_problem(image, mu, noise_sigma, seed, blur=blur)
    shape = np.asarray(image).shape
    report = ExperimentReport(
        f"deblur {shape[0]}x{shape[1]}, mu={mu:g}, noise sigma={noise_sigma:g}, seed={seed}, blur={'7x7 sigma=2' if blur else 'none'}"
    )
    cache = SpectrumCache(problem)
    theta, _ = closed_form_deblur(mu)
    theta_r, alpha_r = closed_form_deblur(mu, relaxed=True)
    s_r = cache(theta_r)
    report.tuned = {
        "admm": tuned_result(theta, None, cache.lambda_n(theta), "lambda-n"),
        "oadmm": tuned_result(theta_r, alpha_r, joint_value(s_r.lambda_1, s_r.lambda_n), "joint"),
    }
    gt = ground_truth(problem)
    run_solver(report, "admm", problem, SolverParams("admm", theta=theta, max_iters=max_iters, tol=tol), gt.u_star,
               exact_radius(problem, theta))
    u = run_solver(report, "oadmm", problem,
                   SolverParams("oadmm", theta=theta_r, alpha=alpha_r, max_iters=max_iters, tol=tol), gt.u_star,
                   exact_radius(problem, theta_r, alpha_r))
    if baselines:
        run_baselines(report, problem, gt.u_star, max_iters, tol)
    report.images = {"observed": problem.f.reshape(shape), "restored": u.reshape(shape)}
    report.details["ground_truth_residual"] = gt.residual_norm
    return report
