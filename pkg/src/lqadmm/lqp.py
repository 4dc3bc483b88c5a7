"""Linear quadratic problems ``min_u (mu/2)||Au - f||^2 + (1/2)||Lu||^2``."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import DimensionMismatchError, InvalidParameterError, TooLargeError
from .operators import MAX_DENSE_DIM, LinearOperator, dense_gram

# Minimum eigenvalue of mu A^H A + L^T L below which the system counts as singular.
SINGULAR_THRESHOLD = 1e-10


def _sqnorm(x) -> float:
    return float(np.vdot(x, x).real)


@dataclass(frozen=True, eq=False)
class LQProblem:
    A: LinearOperator
    L: LinearOperator
    mu: float
    f: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParameterError(f"mu must be positive, got {self.mu}")
        if self.A.domain_dim != self.L.domain_dim:
            raise DimensionMismatchError(
                f"A acts on {self.A.domain_dim} unknowns but L on {self.L.domain_dim}"
            )
        f = np.asarray(self.f)
        if f.shape != (self.A.codomain_dim,):
            raise DimensionMismatchError(f"f has shape {f.shape}, expected ({self.A.codomain_dim},)")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n(self) -> int:
        return self.A.domain_dim

    @property
    def is_complex(self) -> bool:
        return self.A.is_complex or self.L.is_complex or np.iscomplexobj(self.f)

    @property
    def dtype(self):
        return complex if self.is_complex else float

    @cached_property
    def data_rhs(self) -> np.ndarray:
        """``mu A^H f``."""
        return self.mu * self.A.adjoint(self.f)

    def hessian(self, u):
        """``(mu A^H A + L^T L) u``."""
        return self.mu * self.A.gram(u) + self.L.gram(u)

    def gradient(self, u):
        return self.hessian(u) - self.data_rhs

    @cached_property
    def fourier_symbols(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """``(s_A, s_L)`` when both Gram matrices are diagonal in the same 2D DFT basis."""
        sa = self.A.fourier_symbol()
        sl = self.L.fourier_symbol()
        if sa is None or sl is None or sa.shape != sl.shape:
            return None
        return sa, sl

    @cached_property
    def gram_A(self) -> np.ndarray:
        return dense_gram(self.A)

    @cached_property
    def gram_L(self) -> np.ndarray:
        return dense_gram(self.L)

    @property
    def dense_hessian(self) -> np.ndarray:
        return self.mu * self.gram_A + self.gram_L

    @cached_property
    def null_count(self) -> int:
        """Number of eigenvalues of the dense normal matrix below the singularity threshold."""
        return int(np.sum(np.linalg.eigvalsh(self.dense_hessian) < SINGULAR_THRESHOLD))

    def _check(self, u, name="u"):
        u = np.asarray(u)
        if u.shape != (self.n,):
            raise DimensionMismatchError(f"{name} has shape {u.shape}, expected ({self.n},)")
        return u


def objective(problem: LQProblem, u) -> float:
    u = problem._check(u)
    return 0.5 * problem.mu * _sqnorm(problem.A.forward(u) - problem.f) + 0.5 * _sqnorm(problem.L.forward(u))


def augmented_lagrangian(problem: LQProblem, u, w, b, theta: float) -> float:
    u = problem._check(u)
    w = problem._check(w, "w")
    b = problem._check(b, "b")
    if not theta > 0:
        raise InvalidParameterError(f"theta must be positive, got {theta}")
    return (
        0.5 * problem.mu * _sqnorm(problem.A.forward(u) - problem.f)
        + 0.5 * _sqnorm(problem.L.forward(w))
        + 0.5 * theta * _sqnorm(w - u - b)
    )


@dataclass
class GroundTruth:
    u_star: np.ndarray
    residual_norm: float
    solvable: bool
    method: str = field(default="dense")


def _fourier_solve(problem: LQProblem):
    sa, sl = problem.fourier_symbols
    diag = problem.mu * sa + sl
    solvable = bool(diag.min() >= SINGULAR_THRESHOLD)
    rhs_hat = np.fft.fft2(problem.data_rhs.reshape(sa.shape), norm="ortho")
    keep = diag >= SINGULAR_THRESHOLD
    # least-norm: zero the null modes
    u_hat = np.where(keep, rhs_hat / np.where(keep, diag, 1.0), 0.0)
    u = np.fft.ifft2(u_hat, norm="ortho").ravel()
    if not problem.is_complex:
        u = u.real
    return u, solvable


def _dense_solve(problem: LQProblem):
    hess = problem.dense_hessian
    vals, vecs = scipy.linalg.eigh(hess)
    rhs = problem.data_rhs
    if vals[0] >= SINGULAR_THRESHOLD:
        u = scipy.linalg.cho_solve(scipy.linalg.cho_factor(hess), rhs)
        return u, True
    keep = vals >= SINGULAR_THRESHOLD
    coeff = vecs.conj().T @ rhs
    u = vecs[:, keep] @ (coeff[keep] / vals[keep])
    return u, False


def _sparse_solve(problem: LQProblem, sa, sl):
    hess = (problem.mu * (sa.conj().T @ sa) + sl.T @ sl).tocsc()
    u = spla.spsolve(hess, problem.data_rhs)
    return np.asarray(u), bool(np.all(np.isfinite(u)))


def ground_truth(problem: LQProblem) -> GroundTruth:
    """Solve the normal equation ``(mu A^H A + L^T L) u = mu A^H f``.

    Singular systems get the least-norm least-squares solution and
    ``solvable=False``. Jointly Fourier-diagonal problems are solved exactly
    in the DFT basis; other structured problems above the dense cap fall
    back to a sparse direct solve.
    """
    if problem.fourier_symbols is not None:
        u, solvable = _fourier_solve(problem)
        method = "fourier"
    elif problem.n <= MAX_DENSE_DIM:
        u, solvable = _dense_solve(problem)
        method = "dense"
    else:
        sa, sl = problem.A.to_sparse(), problem.L.to_sparse()
        if sa is None or sl is None:
            raise TooLargeError(f"n={problem.n} exceeds the dense cap and the operators have no sparse form")
        u, solvable = _sparse_solve(problem, sa, sl)
        method = "sparse"
    res = float(np.linalg.norm(problem.hessian(u) - problem.data_rhs))
    return GroundTruth(u, res, solvable, method)
