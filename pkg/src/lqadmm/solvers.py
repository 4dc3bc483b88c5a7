"""ADMM, over-relaxed ADMM and first-order baselines for linear quadratic problems.

Every solver records ``||u^k - u*||`` and the objective at each iterate so
runs can be compared on a common footing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse.linalg as spla

from .errors import IndefiniteSystemError, InvalidParameterError
from .lqp import LQProblem, ground_truth, objective
from .spectral import AUTO_DENSE_LIMIT, shifted_gram_solver

METHODS = ("admm", "oadmm", "gd", "gd-n", "gd-nr", "cg")
ADMM_METHODS = ("admm", "oadmm")


@dataclass
class SolverParams:
    method: str
    theta: Optional[float] = None
    alpha: Optional[float] = None
    step: Union[float, str] = "auto"
    max_iters: int = 5000
    tol: float = 1e-10

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method in ADMM_METHODS:
            if self.theta is None or not self.theta > 0:
                raise InvalidParameterError(f"{self.method} needs a positive theta")
        if self.method == "oadmm":
            if self.alpha is None or not self.alpha > 0:
                raise InvalidParameterError("oadmm needs a positive alpha")
        elif self.alpha is not None and self.method != "admm":
            raise InvalidParameterError(f"alpha does not apply to {self.method}")
        if self.step != "auto" and not (isinstance(self.step, (int, float)) and self.step > 0):
            raise InvalidParameterError("step must be positive or 'auto'")
        if self.max_iters < 1 or not self.tol > 0:
            raise InvalidParameterError("max_iters must be >= 1 and tol positive")

    @property
    def label(self) -> str:
        return self.method


@dataclass
class ConvergenceTrace:
    iterates_error: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    wall_time_per_iter: float = 0.0
    stop_reason: str = "max_iters"

    def __len__(self):
        return len(self.iterates_error)

    @property
    def iterations(self) -> int:
        return max(len(self.iterates_error) - 1, 0)

    def iterations_to(self, epsilon: float, relative: bool = True) -> Optional[int]:
        """First k with ``e_k <= epsilon * e_0`` (or ``<= epsilon`` when not relative)."""
        err = np.asarray(self.iterates_error)
        if err.size == 0:
            return None
        target = epsilon * err[0] if relative else epsilon
        hit = np.flatnonzero(err <= target)
        return int(hit[0]) if hit.size else None


def lipschitz_step(problem: LQProblem) -> float:
    """``1 / lambda_max(mu A^H A + L^T L)``."""
    if problem.fourier_symbols is not None:
        sa, sl = problem.fourier_symbols
        lmax = float((problem.mu * sa + sl).max())
    elif problem.n <= AUTO_DENSE_LIMIT:
        lmax = float(np.linalg.eigvalsh(problem.dense_hessian)[-1])
    else:
        op = spla.LinearOperator((problem.n, problem.n), matvec=problem.hessian, dtype=problem.dtype)
        v0 = np.random.default_rng(0).standard_normal(problem.n).astype(problem.dtype)
        lmax = float(spla.eigsh(op, k=1, which="LA", v0=v0, tol=1e-10, return_eigenvectors=False)[0])
    if not lmax > 0:
        raise InvalidParameterError("normal matrix is zero; no finite gradient step")
    return 1.0 / lmax


class _Recorder:
    def __init__(self, problem, u_star):
        self.problem = problem
        self.u_star = u_star
        self.trace = ConvergenceTrace()

    def __call__(self, u):
        self.trace.iterates_error.append(float(np.linalg.norm(u - self.u_star)))
        self.trace.objective.append(objective(self.problem, u))


def _small_change(u_new, u_old, tol) -> bool:
    return np.linalg.norm(u_new - u_old) <= tol * (1.0 + np.linalg.norm(u_old))


def _admm(problem, params, u, b, record):
    theta = params.theta
    alpha = params.alpha if params.alpha is not None else 1.0
    solve_w = shifted_gram_solver(problem, "L", theta)
    solve_u = shifted_gram_solver(problem, "A", theta)
    rhs = problem.data_rhs
    for _ in range(params.max_iters):
        w = solve_w(theta * (u + b))
        w_hat = alpha * w + (1.0 - alpha) * u if alpha != 1.0 else w
        u_new = solve_u(theta * (w_hat - b) + rhs)
        b = b + u_new - w_hat
        record(u_new)
        done = _small_change(u_new, u, params.tol)
        u = u_new
        if done:
            return u, "tol"
    return u, "max_iters"


def _step_size(problem, params):
    return lipschitz_step(problem) if params.step == "auto" else float(params.step)


def _gd(problem, params, u, record):
    s = _step_size(problem, params)
    for _ in range(params.max_iters):
        u_new = u - s * problem.gradient(u)
        record(u_new)
        done = _small_change(u_new, u, params.tol)
        u = u_new
        if done:
            return u, "tol"
    return u, "max_iters"


def _nesterov(problem, params, u, record, restart: bool):
    s = _step_size(problem, params)
    y = u
    k = 1
    f_old = objective(problem, u)
    for _ in range(params.max_iters):
        u_new = y - s * problem.gradient(y)
        record(u_new)
        f_new = record.trace.objective[-1]
        done = _small_change(u_new, u, params.tol)
        if restart and f_new > f_old:
            # function-value restart: drop the momentum
            k = 1
            y = u_new
        else:
            y = u_new + ((k - 1) / (k + 2)) * (u_new - u)
            k += 1
        u, f_old = u_new, f_new
        if done:
            return u, "tol"
    return u, "max_iters"


def _cg(problem, params, u, record):
    r = problem.data_rhs - problem.hessian(u)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    for _ in range(params.max_iters):
        hp = problem.hessian(p)
        curv = float(np.vdot(p, hp).real)
        pp = float(np.vdot(p, p).real)
        if curv < -1e-10 * pp:
            raise IndefiniteSystemError(f"negative curvature {curv:.3g} in the normal matrix")
        if curv <= 1e-300:
            return u, "tol"
        step = rs / curv
        u_new = u + step * p
        r = r - step * hp
        record(u_new)
        done = _small_change(u_new, u, params.tol)
        u = u_new
        rs_new = float(np.vdot(r, r).real)
        if done or rs_new == 0.0:
            return u, "tol"
        p = r + (rs_new / rs) * p
        rs = rs_new
    return u, "max_iters"


def solve(problem: LQProblem, params: SolverParams, u0=None, b0=None, u_star=None):
    """Run one solver from ``u0`` (and multiplier ``b0`` for the ADMM family).

    Returns ``(u, trace)``. Errors are measured against ``u_star``, which
    defaults to the normal-equation solution.
    """
    dtype = problem.dtype
    u = np.zeros(problem.n, dtype=dtype) if u0 is None else np.array(problem._check(u0, "u0"), dtype=dtype)
    b = np.zeros(problem.n, dtype=dtype) if b0 is None else np.array(problem._check(b0, "b0"), dtype=dtype)
    if u_star is None:
        u_star = ground_truth(problem).u_star
    record = _Recorder(problem, np.asarray(u_star))
    record(u)
    start = time.perf_counter()
    m = params.method
    if m in ADMM_METHODS:
        u, reason = _admm(problem, params, u, b, record)
    elif m == "gd":
        u, reason = _gd(problem, params, u, record)
    elif m in ("gd-n", "gd-nr"):
        u, reason = _nesterov(problem, params, u, record, restart=(m == "gd-nr"))
    else:
        u, reason = _cg(problem, params, u, record)
    trace = record.trace
    trace.stop_reason = reason
    trace.wall_time_per_iter = (time.perf_counter() - start) / max(trace.iterations, 1)
    return u, trace
