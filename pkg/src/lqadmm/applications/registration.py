"""Diffeomorphic registration by repeated linearization and Euler composition.

Each outer iteration linearizes the warped source around the current
deformation and solves

    min_v (mu/2)||I_x v_x + I_y v_y + I_t||^2 + (1/2)(||grad v_x||^2 + ||grad v_y||^2)

for a velocity ``v``, then composes ``phi <- phi o (Id + v/N)`` N times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import DimensionMismatchError, InvalidParameterError
from ..lqp import LQProblem, ground_truth
from ..operators import GridDims, make_operator
from ..solvers import SolverParams, solve
from ..tuning import SpectrumCache, TunerConfig, optimal_alpha, tune_theta
from .report import ExperimentReport, run_baselines, run_solver

MAX_HALVINGS = 8


@dataclass
class VelocityField:
    v_x: np.ndarray
    v_y: np.ndarray
    dims: GridDims

    def __post_init__(self):
        self.v_x = np.asarray(self.v_x, dtype=float).ravel()
        self.v_y = np.asarray(self.v_y, dtype=float).ravel()
        if self.v_x.shape != (self.dims.size,) or self.v_y.shape != (self.dims.size,):
            raise DimensionMismatchError("velocity components must match the grid")

    @classmethod
    def from_stacked(cls, v, dims: GridDims) -> "VelocityField":
        v = np.asarray(v).real
        return cls(v[: dims.size], v[dims.size :], dims)

    def scaled(self, factor: float) -> "VelocityField":
        return VelocityField(self.v_x * factor, self.v_y * factor, self.dims)


@dataclass
class DeformationField:
    """Absolute sampling coordinates: the identity maps each pixel to itself."""

    phi_x: np.ndarray
    phi_y: np.ndarray
    dims: GridDims

    def __post_init__(self):
        self.phi_x = np.asarray(self.phi_x, dtype=float).ravel()
        self.phi_y = np.asarray(self.phi_y, dtype=float).ravel()
        if self.phi_x.shape != (self.dims.size,) or self.phi_y.shape != (self.dims.size,):
            raise DimensionMismatchError("deformation components must match the grid")
        if not (np.all(np.isfinite(self.phi_x)) and np.all(np.isfinite(self.phi_y))):
            raise InvalidParameterError("deformation contains non-finite values")

    @classmethod
    def identity(cls, dims: GridDims) -> "DeformationField":
        yy, xx = np.mgrid[0 : dims.height, 0 : dims.width].astype(float)
        return cls(xx, yy, dims)

    def displacement(self):
        ident = DeformationField.identity(self.dims)
        return self.phi_x - ident.phi_x, self.phi_y - ident.phi_y


def _sample(field2d: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # bilinear, clamped at the border
    return map_coordinates(field2d, [y, x], order=1, mode="nearest")


def compose(phi: DeformationField, v: VelocityField, steps: int) -> DeformationField:
    """``phi o (Id + v/N) o ... o (Id + v/N)`` with ``N = steps`` factors."""
    if steps < 1:
        raise InvalidParameterError("steps must be >= 1")
    dims = phi.dims
    shape = dims.shape
    ident = DeformationField.identity(dims)
    dx, dy = phi.displacement()
    sx, sy = v.v_x / steps, v.v_y / steps
    for _ in range(steps):
        # (phi o psi)(x) = psi(x) + d(psi(x)), with psi = Id + v/N
        px, py = ident.phi_x + sx, ident.phi_y + sy
        dx = sx + _sample(dx.reshape(shape), px, py)
        dy = sy + _sample(dy.reshape(shape), px, py)
    return DeformationField(ident.phi_x + dx, ident.phi_y + dy, dims)


def compose_deformation(v: VelocityField, steps: int = 8) -> DeformationField:
    """Euler integration of a stationary velocity field from the identity."""
    return compose(DeformationField.identity(v.dims), v, steps)


def jacobian_determinant(phi: DeformationField) -> np.ndarray:
    """Per-pixel determinant of the central-difference Jacobian of ``phi``."""
    shape = phi.dims.shape
    px, py = phi.phi_x.reshape(shape), phi.phi_y.reshape(shape)
    dpx_dy, dpx_dx = np.gradient(px)
    dpy_dy, dpy_dx = np.gradient(py)
    return (dpx_dx * dpy_dy - dpx_dy * dpy_dx).ravel()


def warp(image, phi: DeformationField) -> np.ndarray:
    """``image o phi`` with bilinear interpolation and border clamping."""
    return _sample(np.asarray(image, dtype=float), phi.phi_x, phi.phi_y).reshape(phi.dims.shape)


def image_gradient(image) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with replicated borders; returns ``(I_x, I_y)``."""
    p = np.pad(np.asarray(image, dtype=float), 1, mode="edge")
    return (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0, (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0


def registration_problem(warped, target, mu: float) -> LQProblem:
    dims = GridDims(*np.shape(warped))
    ix, iy = image_gradient(warped)
    jac = make_operator("registration-jacobian", dims=dims, ix=ix, iy=iy)
    grad = make_operator("periodic-gradient", dims=dims)
    reg = make_operator("block-diagonal", blocks=[grad, grad])
    f = -(np.asarray(warped) - np.asarray(target)).ravel()
    return LQProblem(jac, reg, mu, f, label="registration")


@dataclass
class OuterStep:
    theta: float
    alpha: float
    lambda_1: float
    lambda_n: float
    min_jacobian: float
    halvings: int
    residual: float  # ||warped - target|| before the update


@dataclass
class RegistrationResult:
    phi: DeformationField
    report: ExperimentReport
    steps: list = field(default_factory=list)


def register(source, target, mu: float = 1000.0, integration_steps: int = 8, outer_iters: int = 4,
             inner_iters: int = 300, tol: float = 1e-10, config: Optional[TunerConfig] = None,
             baselines: bool = True) -> RegistrationResult:
    """Register ``source`` onto ``target``.

    Theta is tuned by descent on ``lambda_n`` (matrix-free spectrum), warm
    started from the previous outer iteration, and alpha follows from the
    closed form. oADMM supplies the velocity. A step whose composed map
    folds (non-positive Jacobian determinant somewhere) is halved until it
    does not. The last outer iteration also runs every baseline solver.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape:
        raise DimensionMismatchError(f"source {source.shape} and target {target.shape} differ")
    if integration_steps < 1 or outer_iters < 1:
        raise InvalidParameterError("integration_steps and outer_iters must be >= 1")
    dims = GridDims(*source.shape)
    phi = DeformationField.identity(dims)
    report = ExperimentReport(
        f"registration {dims.height}x{dims.width}, mu={mu:g}, N={integration_steps}, outer={outer_iters}"
    )
    steps = []
    theta_prev = math.sqrt(mu)
    for k in range(outer_iters):
        warped = warp(source, phi)
        problem = registration_problem(warped, target, mu)
        cfg = config or TunerConfig(theta_init=theta_prev, multistart_count=0, x_tol=1e-6)
        cache = SpectrumCache(problem)
        tuned = tune_theta(problem, "lambda-n", cfg, cache)
        theta = tuned.theta_star
        spec = cache(theta)
        alpha = optimal_alpha(spec.lambda_1, spec.lambda_n)
        tuned.alpha_star = alpha
        last = k == outer_iters - 1
        gt = ground_truth(problem)
        if last:
            report.tuned = {"admm": tuned}
            run_solver(report, "admm", problem, SolverParams("admm", theta=theta, max_iters=inner_iters, tol=tol),
                       gt.u_star, spec.rho)
        params = SolverParams("oadmm", theta=theta, alpha=alpha, max_iters=inner_iters, tol=tol)
        if last:
            u = run_solver(report, "oadmm", problem, params, gt.u_star, max(abs(1 + alpha * spec.lambda_1),
                                                                               abs(1 + alpha * spec.lambda_n)))
            if baselines:
                run_baselines(report, problem, gt.u_star, inner_iters, tol)
        else:
            u, _ = solve(problem, params, u_star=gt.u_star)
        v = VelocityField.from_stacked(u, dims)
        halvings = 0
        candidate = compose(phi, v, integration_steps)
        det = jacobian_determinant(candidate)
        while det.min() <= 0 and halvings < MAX_HALVINGS:
            halvings += 1
            v = v.scaled(0.5)
            candidate = compose(phi, v, integration_steps)
            det = jacobian_determinant(candidate)
        if det.min() <= 0:
            report.notes.append(f"outer iteration {k}: update rejected, Jacobian not positive after halving")
            det = jacobian_determinant(phi)
        else:
            phi = candidate
        steps.append(OuterStep(theta, alpha, spec.lambda_1, spec.lambda_n, float(det.min()), halvings,
                               float(np.linalg.norm(warped - target))))
        theta_prev = theta
    report.details["theta_per_outer"] = [s.theta for s in steps]
    report.details["min_jacobian_per_outer"] = [s.min_jacobian for s in steps]
    report.details["final_residual"] = float(np.linalg.norm(warp(source, phi) - target))
    report.images = {"warped": warp(source, phi), "jacobian": jacobian_determinant(phi).reshape(dims.shape)}
    return RegistrationResult(phi, report, steps)
