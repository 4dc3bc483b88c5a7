"""Random dense linear quadratic problems."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from ..lqp import LQProblem, ground_truth
from ..operators import make_operator
from ..solvers import SolverParams
from ..spectral import IterationOperator, extremal_eigenvalues
from ..tuning import SpectrumCache, TunerConfig, tune_theta
from .report import ExperimentReport, run_solver

ALPHA_BAND = (1.5, 1.8)
LABELS = ("admm", "admm-theta/10", "admm-10theta", "oadmm")


def random_problem(rng: np.random.Generator, m: int, n: int, mu: float, f, l_rows: Optional[int] = None) -> LQProblem:
    """``A`` (m x n) and ``L`` (l_rows x n) with independent standard normal entries."""
    a = rng.standard_normal((m, n))
    l = rng.standard_normal((l_rows or m, n))
    return LQProblem(make_operator("dense", matrix=a), make_operator("dense", matrix=l), mu, f)


def exact_radius(problem: LQProblem, theta: float, alpha: float = 1.0) -> float:
    """Modulus of the largest eigenvalue of ``I + alpha Q`` (complex eigenvalues included)."""
    summary = extremal_eigenvalues(IterationOperator(problem, theta, alpha), strict=False)
    return summary.rho_exact if summary.rho_exact is not None else summary.rho


def run_instance(problem: LQProblem, index: int = 0, config: Optional[TunerConfig] = None,
                 max_iters: int = 20000, tol: float = 1e-10) -> ExperimentReport:
    cfg = config or TunerConfig()
    cache = SpectrumCache(problem, cfg.mode)
    plain = tune_theta(problem, "lambda-n", cfg, cache)
    relaxed = tune_theta(problem, "joint", cfg, cache)
    u_star = ground_truth(problem).u_star
    report = ExperimentReport(f"random instance {index}: A {problem.A.shape}, L {problem.L.shape}, mu={problem.mu:g}")
    report.tuned = {"admm": plain, "oadmm": relaxed}
    t = plain.theta_star
    for label, theta in zip(LABELS[:3], (t, t / 10.0, 10.0 * t)):
        params = SolverParams("admm", theta=theta, max_iters=max_iters, tol=tol)
        run_solver(report, label, problem, params, u_star, exact_radius(problem, theta))
    params = SolverParams("oadmm", theta=relaxed.theta_star, alpha=relaxed.alpha_star, max_iters=max_iters, tol=tol)
    run_solver(report, "oadmm", problem, params, u_star, exact_radius(problem, relaxed.theta_star, relaxed.alpha_star))
    lo, hi = ALPHA_BAND
    report.details["alpha_star"] = relaxed.alpha_star
    report.details["alpha_outside_band"] = not (lo <= relaxed.alpha_star <= hi)
    report.details["max_imag"] = cache.max_imag
    for res in (plain, relaxed):
        if res.note:
            report.notes.append(f"{res.objective_kind}: {res.note}")
    return report


def _run_packed(args):
    return run_instance(*args)


def run_random_experiment(m: int = 200, n: int = 50, mu: float = 1.0, instance_count: int = 50, seed: int = 0,
                          config: Optional[TunerConfig] = None, max_iters: int = 20000, tol: float = 1e-10,
                          l_rows: Optional[int] = None, jobs: int = 1) -> list:
    """Tune and run ADMM/oADMM on seeded random instances.

    ``f`` is drawn once; each instance then draws ``A`` and ``L``. All
    draws happen up front in a fixed order, so results do not depend on
    ``jobs``.
    """
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(m)
    problems = [random_problem(rng, m, n, mu, f, l_rows) for _ in range(instance_count)]
    tasks = [(p, i, config, max_iters, tol) for i, p in enumerate(problems)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_packed, tasks))
    return [_run_packed(t) for t in tasks]


def mean_iterations(reports, label: str, censor: int) -> float:
    """Mean iterations to the target error, counting runs that never reach it as ``censor``."""
    counts = [r.summary[label] if r.summary[label] is not None else censor for r in reports]
    return float(np.mean(counts))
