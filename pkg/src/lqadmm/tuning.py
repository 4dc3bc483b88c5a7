"""Penalty (theta) and relaxation (alpha) parameter selection.

Two numerical objectives are minimized over theta by finite-difference
gradient descent:

* ``lambda-n``: the largest eigenvalue of ``Q(theta)``; minimizing it
  minimizes the radius ``1 + lambda_n`` of plain ADMM.
* ``joint``: ``(lambda_1 - lambda_n) / (lambda_1 + lambda_n)``, the radius of
  over-relaxed ADMM once alpha is set to ``-2 / (lambda_1 + lambda_n)``.

Closed forms cover deblurring (A = K, L = I) and Cartesian MRI
(A = DF, L = periodic gradient).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateConstantsError,
    DegenerateSpectrumError,
    DimensionMismatchError,
    EmptyPartitionError,
    InvalidParameterError,
    NonConvergenceError,
)
from .lqp import SINGULAR_THRESHOLD, LQProblem
from .spectral import IterationOperator, SpectralSummary, arnoldi_extreme, extremal_eigenvalues

THETA_FLOOR = 1e-8
OBJECTIVES = ("lambda-n", "joint")


@dataclass
class TunerConfig:
    step_size: Optional[float] = None  # initial step t; default makes the first trial move 10% of theta
    fd_step: float = 1e-4
    max_iters: int = 500
    grad_tol: float = 1e-10
    theta_init: float = 1.0
    multistart_count: int = 3
    x_tol: float = 1e-8  # relative step below which descent is considered stalled
    mode: str = "auto"

    def __post_init__(self):
        if not self.fd_step > 0:
            raise InvalidParameterError("fd_step must be positive")
        if not self.theta_init > 0:
            raise InvalidParameterError("theta_init must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise InvalidParameterError("step_size must be positive")
        if self.max_iters < 1 or self.multistart_count < 0:
            raise InvalidParameterError("max_iters must be >= 1 and multistart_count >= 0")


@dataclass
class TunerResult:
    theta_star: float
    alpha_star: Optional[float]
    objective_at_optimum: float
    history: list = field(default_factory=list)
    converged: bool = False
    objective_kind: str = "lambda-n"
    note: str = ""


@dataclass(frozen=True)
class MriConstants:
    a: float
    b: float
    c: float
    d: float


class SpectrumCache:
    """Evaluates and memoizes the spectrum of ``Q(theta)`` for one problem.

    In matrix-free mode ``lambda_n`` alone needs a single Arnoldi run, and
    the eigenvectors of the last evaluation seed the next one. A complex
    spectrum does not stop tuning: the extreme real parts are used and the
    largest imaginary part seen is kept in ``max_imag``.
    """

    def __init__(self, problem: LQProblem, mode: str = "auto"):
        self.problem = problem
        self.mode = mode
        self._memo: dict[float, SpectralSummary] = {}
        self._memo_n: dict[float, float] = {}
        self._warm = [None, None]
        self.max_imag = 0.0
        self.evaluations = 0

    def __call__(self, theta: float) -> SpectralSummary:
        theta = float(theta)
        hit = self._memo.get(theta)
        if hit is not None:
            return hit
        it = IterationOperator(self.problem, theta, 1.0, self.mode)
        summary = extremal_eigenvalues(it, start=tuple(self._warm), strict=False)
        self.evaluations += 1
        if summary.vectors is not None:
            self._warm = list(summary.vectors)
        self.max_imag = max(self.max_imag, summary.max_imag)
        self._memo[theta] = summary
        return summary

    def lambda_n(self, theta: float) -> float:
        theta = float(theta)
        if theta in self._memo:
            return self._memo[theta].lambda_n
        it = IterationOperator(self.problem, theta, 1.0, self.mode)
        if it.mode != "matrix-free":
            return self(theta).lambda_n
        hit = self._memo_n.get(theta)
        if hit is None:
            hit, imag, vec = arnoldi_extreme(it, "LR", start=self._warm[1])
            self.evaluations += 1
            self._warm[1] = vec
            self.max_imag = max(self.max_imag, imag)
            self._memo_n[theta] = hit
        return hit


def _as_cache(problem_or_cache, mode="auto") -> SpectrumCache:
    if isinstance(problem_or_cache, SpectrumCache):
        return problem_or_cache
    return SpectrumCache(problem_or_cache, mode)


def lambda_n_objective(problem, theta: float, mode: str = "auto") -> float:
    return _as_cache(problem, mode).lambda_n(theta)


def joint_value(lambda_1: float, lambda_n: float) -> float:
    s = lambda_1 + lambda_n
    if s == 0.0:
        raise DegenerateSpectrumError("lambda_1 + lambda_n = 0; relaxation is undefined")
    return (lambda_1 - lambda_n) / s


def joint_objective(problem, theta: float, mode: str = "auto") -> float:
    summary = _as_cache(problem, mode)(theta)
    return joint_value(summary.lambda_1, summary.lambda_n)


def optimal_alpha(lambda_1: float, lambda_n: float) -> float:
    """Relaxation that balances ``|1 + alpha lambda_1|`` against ``|1 + alpha lambda_n|``."""
    s = lambda_1 + lambda_n
    if not s < 0:
        raise DegenerateSpectrumError(f"need lambda_1 + lambda_n < 0, got {s}")
    return -2.0 / s


def _objective_fn(cache: SpectrumCache, kind: str) -> Callable[[float], float]:
    if kind == "lambda-n":
        return cache.lambda_n
    if kind == "joint":
        return lambda t: joint_value(cache(t).lambda_1, cache(t).lambda_n)
    raise InvalidParameterError(f"unknown objective {kind!r}; choose from {OBJECTIVES}")


def _descend(obj: Callable[[float], float], theta0: float, cfg: TunerConfig):
    theta = max(float(theta0), THETA_FLOOR)
    val = obj(theta)
    history = [(theta, val)]
    step = cfg.step_size
    converged = False
    for _ in range(cfg.max_iters):
        eta = min(cfg.fd_step, theta / 2.0)
        try:
            grad = (obj(theta + eta) - obj(theta - eta)) / (2.0 * eta)
        except NonConvergenceError:
            break
        if abs(grad) < cfg.grad_tol:
            converged = True
            break
        if step is None:
            step = 0.1 * theta / abs(grad)
        accepted = False
        while True:
            # safeguard: one move changes theta by at most a factor of 10
            cand = min(max(theta - step * grad, theta / 10.0, THETA_FLOOR), 10.0 * theta)
            if abs(cand - theta) <= cfg.x_tol * theta:
                break
            try:
                cval = obj(cand)
            except NonConvergenceError:
                # an unresolvable spectrum counts as no decrease
                cval = math.inf
            if cval < val:
                theta, val = cand, cval
                accepted = True
                step *= 2.0
                break
            step *= 0.5
        if not accepted:
            # no decrease along the gradient at any resolvable step
            converged = True
            break
        history.append((theta, val))
    return theta, val, history, converged


def _starts(problem: LQProblem, cfg: TunerConfig) -> list[float]:
    if cfg.multistart_count <= 0:
        return [cfg.theta_init]
    k = cfg.multistart_count
    root = math.sqrt(problem.mu)
    if k == 1:
        return [root]
    return list(root * np.logspace(-2, 2, k))


def tune_theta(problem: LQProblem, objective_kind: str = "lambda-n", config: Optional[TunerConfig] = None,
               cache: Optional[SpectrumCache] = None) -> TunerResult:
    """Minimize the chosen spectral objective over theta.

    Central differences give the gradient; each step backtracks by halving
    until the objective decreases and the accepted step length doubles for
    the next iteration. Without an explicit ``step_size`` the first trial
    step moves theta by 10%, which keeps the descent scale-free. With ``multistart_count > 0`` descent is launched
    from log-spaced points around ``sqrt(mu)`` and the best end point wins.
    """
    cfg = config or TunerConfig()
    cache = cache or SpectrumCache(problem, cfg.mode)
    obj = _objective_fn(cache, objective_kind)
    best = None
    history: list = []
    all_converged = True
    for start in _starts(problem, cfg):
        theta, val, hist, conv = _descend(obj, start, cfg)
        history.extend(hist)
        all_converged &= conv
        if best is None or val < best[1]:
            best = (theta, val, conv)
    theta, val, conv = best
    alpha = None
    if objective_kind == "joint":
        s = cache(theta)
        alpha = optimal_alpha(s.lambda_1, s.lambda_n)
    note = ""
    if cache.max_imag > 1e-6:
        note = f"complex spectrum encountered (max |imag| = {cache.max_imag:.3g}); real parts used"
    return TunerResult(theta, alpha, val, history, conv, objective_kind, note)


def grid_search(problem_or_cache, thetas, objective_kind: str = "lambda-n", mode: str = "auto"):
    """Brute-force argmin over a theta grid; returns ``(theta, value, values)``."""
    cache = _as_cache(problem_or_cache, mode)
    obj = _objective_fn(cache, objective_kind)
    vals = np.array([obj(t) for t in thetas])
    i = int(np.argmin(vals))
    return float(thetas[i]), float(vals[i]), vals


def closed_form_deblur(mu: float, relaxed: bool = False) -> tuple[float, Optional[float]]:
    """Optimal parameters for ``A = K`` (normalized blur), ``L = I``."""
    if not mu > 0:
        raise InvalidParameterError(f"mu must be positive, got {mu}")
    if relaxed:
        return 1.0, 2.0
    return (math.sqrt(mu) if mu <= 1 else 1.0), None


def mri_constants(mask, G, exclude_null: bool = True) -> MriConstants:
    """Extremes of the Fourier symbol over sampled (a, c) and unsampled (b, d) frequencies.

    With ``exclude_null`` an unsampled frequency where the symbol vanishes is
    skipped: it is a null direction of the normal matrix, whose eigenvalue in
    ``Q`` is zero for every theta.
    """
    mask = np.asarray(mask).ravel()
    g = np.asarray(G, dtype=float).ravel()
    if mask.shape != g.shape:
        raise DimensionMismatchError(f"mask has {mask.size} entries but G has {g.size}")
    sampled = mask == 1
    unsampled = mask == 0
    if exclude_null:
        unsampled &= g >= SINGULAR_THRESHOLD
    if not sampled.any() or not unsampled.any():
        raise EmptyPartitionError("mask must contain both sampled and (non-null) unsampled entries")
    return MriConstants(
        a=float(g[sampled].min()),
        b=float(g[unsampled].min()),
        c=float(g[sampled].max()),
        d=float(g[unsampled].max()),
    )


def mri_branch(mu: float, consts: MriConstants) -> int:
    """Which of the four closed-form regimes applies (1-based)."""
    a, b = consts.a, consts.b
    if mu > b:
        return 4
    if mu > a:
        return 3
    if mu <= 2 * b - a:
        return 1
    return 2


def closed_form_mri(mu: float, consts: MriConstants) -> float:
    """Optimal ADMM theta for ``A = DF`` (Cartesian sampling), ``L = periodic gradient``.

    Regimes: ``sqrt(mu a)`` for ``mu <= min(a, 2b - a)``;
    ``sqrt(mu a b / (mu + a - b))`` for ``2b - a < mu <= min(a, b)``;
    ``mu`` for ``a < mu <= b``; ``sqrt(mu c b / (mu + c - b))`` for ``mu > b``.
    """
    if not mu > 0:
        raise InvalidParameterError(f"mu must be positive, got {mu}")
    a, b, c = consts.a, consts.b, consts.c
    branch = mri_branch(mu, consts)
    if branch == 1:
        theta = math.sqrt(mu * a)
    elif branch == 2:
        den = mu + a - b
        if den <= 0:
            raise DegenerateConstantsError(f"mu + a - b = {den} is not positive")
        theta = math.sqrt(mu * a * b / den)
    elif branch == 3:
        theta = mu
    else:
        den = mu + c - b
        if den <= 0:
            raise DegenerateConstantsError(f"mu + c - b = {den} is not positive")
        theta = math.sqrt(mu * c * b / den)
    if not theta > 0:
        raise DegenerateConstantsError(f"closed form gives theta = {theta} (a={a}, b={b}, c={c})")
    return theta
