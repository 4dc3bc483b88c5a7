"""Iteration matrix of (over-relaxed) ADMM on an LQP and its spectrum.

Eliminating ``w`` and ``b`` from the ADMM updates leaves the affine map

    u <- (I + alpha Q) u + alpha c,
    Q = -theta (mu A^H A + theta I)^{-1} (L^T L + theta I)^{-1} (mu A^H A + L^T L),
    c = theta (mu A^H A + theta I)^{-1} (L^T L + theta I)^{-1} mu A^H f,

whose eigenvalues satisfy ``lambda(Q) in [-1, 0]`` for every ``theta > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import (
    ComplexSpectrumError,
    DomainError,
    InsufficientDataError,
    InvalidParameterError,
    NonConvergenceError,
    UnsupportedOperatorError,
)
from .lqp import SINGULAR_THRESHOLD, LQProblem
from .operators import MAX_DENSE_DIM

MODES = ("auto", "dense", "fourier", "matrix-free")
EIGENSOLVERS = ("arnoldi", "power")
# auto mode uses a full eigendecomposition up to this size
AUTO_DENSE_LIMIT = 400

POWER_TOL = 1e-8
POWER_MAX_ITER = 10000
POWER_SEED = 20240613
ARNOLDI_K = 4


def _resolve_mode(problem: LQProblem, mode: str) -> str:
    if mode not in MODES:
        raise InvalidParameterError(f"unknown mode {mode!r}; choose from {MODES}")
    if mode != "auto":
        if mode == "fourier" and problem.fourier_symbols is None:
            raise UnsupportedOperatorError("A and L are not jointly Fourier-diagonal")
        return mode
    if problem.fourier_symbols is not None:
        return "fourier"
    if problem.n <= AUTO_DENSE_LIMIT:
        return "dense"
    return "matrix-free"


def _dense_shifted_solver(gram: np.ndarray, scale: float, shift: float) -> Callable:
    factor = scipy.linalg.cho_factor(scale * gram + shift * np.eye(gram.shape[0]))
    return lambda x: scipy.linalg.cho_solve(factor, x)


def shifted_gram_solver(problem: LQProblem, which: str, theta: float) -> Callable:
    """Solver for ``mu A^H A + theta I`` (which="A") or ``L^T L + theta I`` (which="L")."""
    op, scale = (problem.A, problem.mu) if which == "A" else (problem.L, 1.0)
    solver = op.gram_solver(scale, theta)
    if solver is not None:
        return solver
    if problem.n <= MAX_DENSE_DIM:
        gram = problem.gram_A if which == "A" else problem.gram_L
        return _dense_shifted_solver(gram, scale, theta)
    raise UnsupportedOperatorError(f"no structured inverse for {op.kind} at n={problem.n}")


def dense_q(problem: LQProblem, theta: float) -> np.ndarray:
    """``Q`` from the product form ``-(P + theta)^-1 (R + theta)^-1 theta (P + R)``."""
    p = problem.mu * problem.gram_A
    r = problem.gram_L
    eye = np.eye(problem.n)
    inner = scipy.linalg.solve(r + theta * eye, theta * (p + r), assume_a="pos")
    return -scipy.linalg.solve(p + theta * eye, inner, assume_a="pos")


def fourier_q_symbol(problem: LQProblem, theta: float) -> np.ndarray:
    sa, sl = problem.fourier_symbols
    p = problem.mu * sa
    return -theta * (p + sl) / ((p + theta) * (sl + theta))


class IterationOperator:
    """The linear part ``I + alpha Q`` of the ADMM fixed-point map for a given ``(theta, alpha)``.

    ``mode`` selects how ``Q`` is represented: ``dense`` (explicit matrix),
    ``fourier`` (per-frequency symbol, when A and L are jointly DFT-diagonal)
    or ``matrix-free`` (structured inner solves).
    """

    def __init__(self, problem: LQProblem, theta: float, alpha: float = 1.0, mode: str = "auto"):
        if not theta > 0:
            raise InvalidParameterError(f"theta must be positive, got {theta}")
        if not alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {alpha}")
        self.problem = problem
        self.theta = float(theta)
        self.alpha = float(alpha)
        self.mode = _resolve_mode(problem, mode)
        self.q_matrix = None
        self.q_symbol = None
        if self.mode == "dense":
            if problem.n > MAX_DENSE_DIM:
                raise InvalidParameterError(f"dense mode needs n <= {MAX_DENSE_DIM}, got {problem.n}")
            self.q_matrix = dense_q(problem, self.theta)
        elif self.mode == "fourier":
            self.q_symbol = fourier_q_symbol(problem, self.theta)
        else:
            self._solve_p = shifted_gram_solver(problem, "A", self.theta)
            self._solve_r = shifted_gram_solver(problem, "L", self.theta)

    @property
    def matrix(self) -> np.ndarray:
        if self.q_matrix is None:
            raise InvalidParameterError("explicit matrix only available in dense mode")
        return np.eye(self.problem.n) + self.alpha * self.q_matrix

    def apply_q(self, v):
        v = np.asarray(v)
        if self.mode == "dense":
            return self.q_matrix @ v
        if self.mode == "fourier":
            shape = self.q_symbol.shape
            out = np.fft.ifft2(self.q_symbol * np.fft.fft2(v.reshape(shape))).ravel()
            return out if (self.problem.is_complex or np.iscomplexobj(v)) else out.real
        # (R + theta)^{-1} (P + R) v = v + (R + theta)^{-1} (P v - theta v), saving one product with R
        pr = self.problem
        pv = pr.mu * pr.A.gram(v)
        return -self.theta * self._solve_p(v + self._solve_r(pv - self.theta * v))

    def apply(self, v):
        return v + self.alpha * self.apply_q(v)

    @property
    def offset(self) -> np.ndarray:
        """Constant term ``alpha c`` of the fixed-point map."""
        pr = self.problem
        if self.mode == "matrix-free":
            solve_p, solve_r = self._solve_p, self._solve_r
        else:
            solve_p = shifted_gram_solver(pr, "A", self.theta)
            solve_r = shifted_gram_solver(pr, "L", self.theta)
        return self.alpha * self.theta * solve_p(solve_r(pr.data_rhs))

    def step(self, u):
        """One fixed-point iteration ``(I + alpha Q) u + alpha c``."""
        return self.apply(u) + self.offset


def build_iteration_operator(problem, theta, alpha=1.0, mode="auto") -> IterationOperator:
    return IterationOperator(problem, theta, alpha, mode)


@dataclass
class SpectralSummary:
    lambda_1: float
    lambda_n: float
    rho: float
    zeta: float
    max_imag: float
    theta: float
    alpha: float
    # max |1 + alpha lambda| over every eigenvalue; differs from rho only for a complex spectrum
    rho_exact: Optional[float] = None
    # eigenvector estimates from the power method, reusable as warm starts
    vectors: Optional[tuple] = field(default=None, repr=False, compare=False)


def radius(lambda_1: float, lambda_n: float, alpha: float) -> float:
    return max(abs(1.0 + alpha * lambda_1), abs(1.0 + alpha * lambda_n))


def power_iteration(
    apply: Callable,
    n: int,
    dtype=float,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    seed: int = POWER_SEED,
    start=None,
    scale: float = 0.0,
):
    """Dominant eigenvalue (by magnitude) of a real-spectrum operator.

    Returns ``(eigenvalue, vector, iterations)``. Stops once the Rayleigh
    quotient change, and its geometric extrapolation, fall below
    ``tol * max(|lambda|, scale)``.
    """
    rng = np.random.default_rng(seed)
    restarted = False
    v = np.asarray(start) if start is not None else rng.standard_normal(n).astype(dtype)
    v = v / np.linalg.norm(v)
    lam = None
    prev_delta = None
    for k in range(1, max_iter + 1):
        w = apply(v)
        nrm = np.linalg.norm(w)
        ref = max(abs(lam) if lam is not None else 0.0, scale)
        if nrm <= 1e-300 or (ref > 0 and nrm <= 1e-14 * ref):
            if not restarted and start is not None:
                restarted = True
                v = rng.standard_normal(n).astype(dtype)
                v = v / np.linalg.norm(v)
                continue
            return 0.0, v, k
        new = float(np.vdot(v, w).real)
        v = w / nrm
        if lam is not None:
            delta = abs(new - lam)
            bound = tol * max(abs(new), scale)
            if delta <= bound:
                if prev_delta:
                    r = min(delta / prev_delta, 0.999)
                    if delta * r / (1.0 - r) <= bound:
                        return new, v, k
                elif delta == 0.0:
                    return new, v, k
            prev_delta = delta
        lam = new
    raise NonConvergenceError(f"power iteration did not reach tol={tol} in {max_iter} iterations")


def q_eigenvalues(it: IterationOperator, exclude_nullspace: bool = True) -> np.ndarray:
    """All eigenvalues of ``Q`` (dense or Fourier mode)."""
    if it.mode == "fourier":
        q = it.q_symbol.ravel()
        if exclude_nullspace:
            sa, sl = it.problem.fourier_symbols
            keep = (it.problem.mu * sa + sl >= SINGULAR_THRESHOLD).ravel()
            if keep.any():
                q = q[keep]
        return q.astype(complex)
    if it.mode != "dense":
        raise UnsupportedOperatorError("the full spectrum needs dense or Fourier mode")
    eig = np.linalg.eigvals(it.q_matrix)
    if exclude_nullspace:
        k = it.problem.null_count
        if 0 < k < len(eig):
            eig = eig[np.argsort(np.abs(eig))[k:]]
    return eig


def _power_extremes(it: IterationOperator, tol, max_iter, seed, start):
    n = it.problem.n
    dtype = complex if it.problem.is_complex else float
    s1, s2 = (start if start is not None else (None, None))
    lam1, v1, _ = power_iteration(it.apply_q, n, dtype, tol, max_iter, seed, s1)
    shifted = lambda v: it.apply_q(v) - lam1 * v
    gap, v2, _ = power_iteration(shifted, n, dtype, tol, max_iter, seed + 1, s2, scale=abs(lam1))
    return lam1, lam1 + gap, 0.0, (v1, v2)


def arnoldi_extreme(it: IterationOperator, which: str, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
                    seed: int = POWER_SEED, start=None):
    """Eigenvalue of ``Q`` with smallest (``"SR"``) or largest (``"LR"``) real part via ARPACK.

    Returns ``(real part, |imag|, eigenvector)``.
    """
    n = it.problem.n
    dtype = complex if it.problem.is_complex else float
    if n <= 20:
        # too small for ARPACK; materialize from basis vectors
        q = np.column_stack([it.apply_q(e) for e in np.eye(n, dtype=dtype)])
        vals, vecs = np.linalg.eig(q)
        i = int(np.argmin(vals.real) if which == "SR" else np.argmax(vals.real))
        vec = vecs[:, i] if dtype is complex else vecs[:, i].real
        return float(vals[i].real), float(abs(vals[i].imag)), vec
    op = spla.LinearOperator((n, n), matvec=it.apply_q, dtype=dtype)
    noise = np.random.default_rng(seed).standard_normal(n)
    if start is None:
        v0 = noise
    else:
        # a pure warm start can hide a nearby eigenvalue from the Krylov space
        start = np.asarray(start.real if dtype is float else start)
        v0 = start / np.linalg.norm(start) + 0.3 * noise / np.linalg.norm(noise)
    v0 = np.asarray(v0, dtype=dtype)
    # k > 1 so a complex pair or a tight cluster at the extreme fits in the subspace
    k = min(ARNOLDI_K, n - 2)
    try:
        vals, vecs = spla.eigs(op, k=k, which=which, v0=v0, tol=tol, maxiter=max_iter, ncv=min(n - 1, 40))
    except spla.ArpackNoConvergence:
        try:
            vals, vecs = spla.eigs(op, k=k, which=which, v0=np.asarray(noise, dtype=dtype), tol=tol,
                                   maxiter=max_iter, ncv=min(n - 1, 100))
        except spla.ArpackNoConvergence as exc:
            raise NonConvergenceError(f"ARPACK ({which}) did not converge in {max_iter} restarts") from exc
    i = int(np.argmin(vals.real) if which == "SR" else np.argmax(vals.real))
    vals = vals[i : i + 1]
    vec = vecs[:, i]
    if dtype is float:
        vec = vec.real if np.linalg.norm(vec.real) >= np.linalg.norm(vec.imag) else vec.imag
    return float(vals[0].real), float(abs(vals[0].imag)), vec


def _arnoldi_extremes(it, tol, max_iter, seed, start):
    s1, s2 = (start if start is not None else (None, None))
    lam1, im1, v1 = arnoldi_extreme(it, "SR", tol, max_iter, seed, s1)
    lamn, imn, v2 = arnoldi_extreme(it, "LR", tol, max_iter, seed, s2)
    return lam1, lamn, max(im1, imn), (v1, v2)


def extremal_eigenvalues(
    it: IterationOperator,
    exclude_nullspace: bool = True,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    seed: int = POWER_SEED,
    start=None,
    strict: bool = True,
    eigensolver: str = "arnoldi",
) -> SpectralSummary:
    """Smallest and largest eigenvalue of ``Q`` and the radius of ``I + alpha Q``.

    ``lambda_1`` and ``lambda_n`` are the extreme real parts. A spectrum
    with ``max |imag| > 1e-6 (1 + |lambda_1|)`` raises
    :class:`ComplexSpectrumError` unless ``strict`` is false, in which case
    the real parts are used and ``max_imag`` reports the discrepancy.

    Eigenvalues belonging to the null space of ``mu A^H A + L^T L`` are
    identically zero for every theta; with ``exclude_nullspace`` they are
    dropped (dense and Fourier modes only).

    Matrix-free mode uses ARPACK on the extreme real parts by default;
    ``eigensolver="power"`` selects two-stage power iteration instead
    (``Q``, then ``Q - lambda_1 I``), which is cheap when the extremes are
    well separated but stalls on clustered or complex spectra.
    """
    if eigensolver not in EIGENSOLVERS:
        raise InvalidParameterError(f"unknown eigensolver {eigensolver!r}; choose from {EIGENSOLVERS}")
    vectors = None
    rho_exact = None
    if it.mode in ("dense", "fourier"):
        eig = q_eigenvalues(it, exclude_nullspace)
        lam1, lamn = float(eig.real.min()), float(eig.real.max())
        imag = float(np.abs(eig.imag).max())
        rho_exact = float(np.abs(1.0 + it.alpha * eig).max())
    elif eigensolver == "power":
        lam1, lamn, imag, vectors = _power_extremes(it, tol, max_iter, seed, start)
    else:
        lam1, lamn, imag, vectors = _arnoldi_extremes(it, tol, max_iter, seed, start)
    if strict and imag > 1e-6 * (1.0 + abs(lam1)):
        raise ComplexSpectrumError(f"iteration matrix has complex eigenvalues (max |imag| = {imag:.3g})")
    rho = radius(lam1, lamn, it.alpha)
    return SpectralSummary(lam1, lamn, rho, rho, imag, it.theta, it.alpha, rho_exact, vectors)


def spectral_radius(problem: LQProblem, theta: float, alpha: float = 1.0, mode: str = "auto",
                    exact: bool = False) -> float:
    """``max(|1 + alpha lambda_1|, |1 + alpha lambda_n|)``.

    With ``exact`` the modulus is taken over every eigenvalue instead, which
    is the true spectral radius when the spectrum is complex.
    """
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    summary = extremal_eigenvalues(IterationOperator(problem, theta, alpha, mode), strict=not exact)
    if exact:
        if summary.rho_exact is None:
            raise UnsupportedOperatorError("exact radius needs dense or Fourier mode")
        return summary.rho_exact
    return summary.rho


def empirical_convergence_factor(trace, u_star=None) -> float:
    """Largest successive error ratio over the second half of a trace.

    Only iterates whose error is above the rounding floor
    ``max(1e-13, 1e-10 * ||u*||)`` are used.
    """
    errors = np.asarray(trace.iterates_error if hasattr(trace, "iterates_error") else trace, dtype=float)
    floor = 1e-13
    if u_star is not None:
        floor = max(floor, 1e-10 * float(np.linalg.norm(u_star)))
    above = np.flatnonzero(errors <= floor)
    usable = errors[: above[0]] if above.size else errors
    if usable.size < 10:
        raise InsufficientDataError(f"need at least 10 iterates above the error floor, have {usable.size}")
    ratios = usable[1:] / usable[:-1]
    return float(ratios[len(ratios) // 2 :].max())


def estimate_iteration_count(zeta: float, epsilon: float, sigma: float) -> int:
    """Iterations for a linearly converging sequence to shrink from ``sigma`` to ``epsilon``."""
    if not 0.0 < zeta < 1.0:
        raise DomainError(f"zeta must lie in (0, 1), got {zeta}")
    if not (epsilon > 0 and sigma > 0):
        raise DomainError("epsilon and sigma must be positive")
    if epsilon >= sigma:
        raise DomainError(f"epsilon ({epsilon}) must be below sigma ({sigma})")
    count = (math.log(epsilon) - math.log(sigma)) / math.log(zeta)
    # guard against rounding just above an integer
    return int(math.ceil(count - 1e-9))


def alpha_sweep(lambda_1: float, lambda_n: float, alphas: Sequence[float]) -> np.ndarray:
    """Radius of ``I + alpha Q`` for each alpha, given Q's extreme eigenvalues."""
    a = np.asarray(alphas, dtype=float)
    return np.maximum(np.abs(1 + a * lambda_1), np.abs(1 + a * lambda_n))
