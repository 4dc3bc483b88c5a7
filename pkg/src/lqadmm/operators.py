"""Structured linear operators used as data (A) and regularization (L) maps.

Every operator acts on flat vectors. Image-backed operators reshape to a
``GridDims`` grid in row-major order and use periodic boundaries, so that
their Gram matrices are diagonalized by the unitary 2D DFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    TooLargeError,
    UnsupportedOperatorError,
)

# Dense materialization caps (columns, and total entries).
MAX_DENSE_DIM = 4096
MAX_DENSE_ENTRIES = 4096 * 4096

KINDS = (
    "dense",
    "identity",
    "gaussian-blur",
    "fourier-sampling",
    "periodic-gradient",
    "registration-jacobian",
    "block-diagonal",
)


@dataclass(frozen=True)
class GridDims:
    height: int
    width: int

    def __post_init__(self):
        if int(self.height) < 1 or int(self.width) < 1:
            raise InvalidParameterError(f"grid dims must be positive, got {self.height}x{self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.height * self.width

    @classmethod
    def parse(cls, text: str) -> "GridDims":
        """Parse ``"32x32"`` or ``"32"``."""
        parts = text.lower().replace("×", "x").split("x")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise InvalidParameterError(f"cannot parse grid dims {text!r}") from None
        if len(vals) == 1:
            vals = vals * 2
        if len(vals) != 2:
            raise InvalidParameterError(f"cannot parse grid dims {text!r}")
        return cls(*vals)


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues of a Gram matrix (or of a Fourier symbol)."""

    values: np.ndarray
    origin: str

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", vals)

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def max(self) -> float:
        return float(self.values[-1])


def fourier_grid_symbol(dims: GridDims) -> np.ndarray:
    """Eigenvalues of the periodic forward-difference Laplacian, indexed by frequency."""
    p = np.arange(dims.height)
    q = np.arange(dims.width)
    gy = 4.0 * np.sin(np.pi * p / dims.height) ** 2
    gx = 4.0 * np.sin(np.pi * q / dims.width) ** 2
    return gy[:, None] + gx[None, :]


def _fft2(x):
    return np.fft.fft2(x, norm="ortho")


def _ifft2(x):
    return np.fft.ifft2(x, norm="ortho")


class LinearOperator:
    """Base class: a linear map from length-``n`` to length-``m`` vectors."""

    kind: str = "abstract"
    is_complex: bool = False
    grid: Optional[GridDims] = None

    def __init__(self, codomain_dim: int, domain_dim: int):
        self.codomain_dim = int(codomain_dim)
        self.domain_dim = int(domain_dim)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.codomain_dim, self.domain_dim)

    def __repr__(self):
        return f"<{type(self).__name__} kind={self.kind} shape={self.shape}>"

    # subclasses implement these on validated 1-D input
    def _forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def forward(self, x):
        x = np.asarray(x)
        if x.shape != (self.domain_dim,):
            raise DimensionMismatchError(
                f"{self.kind}: expected input of length {self.domain_dim}, got shape {x.shape}"
            )
        return self._forward(x)

    def adjoint(self, y):
        y = np.asarray(y)
        if y.shape != (self.codomain_dim,):
            raise DimensionMismatchError(
                f"{self.kind}: expected adjoint input of length {self.codomain_dim}, got shape {y.shape}"
            )
        return self._adjoint(y)

    def gram(self, x):
        """``A^H A x``."""
        return self.adjoint(self.forward(x))

    def fourier_symbol(self) -> Optional[np.ndarray]:
        """Per-frequency Gram eigenvalues when ``A^H A = F^H diag(s) F``, else None."""
        return None

    def explicit_gram_spectrum(self) -> Optional[np.ndarray]:
        sym = self.fourier_symbol()
        return None if sym is None else sym.ravel()

    def gram_solver(self, scale: float, shift: float) -> Optional[Callable]:
        """Return ``x -> (scale * A^H A + shift * I)^{-1} x`` if a structured inverse exists."""
        sym = self.fourier_symbol()
        if sym is None:
            return None
        denom = scale * sym + shift
        shape = sym.shape
        real_ok = not self.is_complex

        def solve(x):
            out = _ifft2(_fft2(x.reshape(shape)) / denom).ravel()
            if real_ok and not np.iscomplexobj(x):
                return out.real
            return out

        return solve

    def to_sparse(self) -> Optional[sp.spmatrix]:
        return None


class DenseOperator(LinearOperator):
    kind = "dense"

    def __init__(self, matrix):
        mat = np.array(matrix)
        if mat.ndim != 2:
            raise InvalidParameterError("dense operator needs a 2-D matrix")
        if not np.all(np.isfinite(mat)):
            raise InvalidParameterError("dense operator entries must be finite")
        super().__init__(*mat.shape)
        self.matrix = mat
        self.matrix.setflags(write=False)
        self.is_complex = np.iscomplexobj(mat)

    def _forward(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.conj().T @ y

    def gram_solver(self, scale, shift):
        gram = self.matrix.conj().T @ self.matrix
        sys_mat = scale * gram + shift * np.eye(self.domain_dim)
        factor = scipy.linalg.cho_factor(sys_mat)
        return lambda x: scipy.linalg.cho_solve(factor, x)

    def explicit_gram_spectrum(self):
        return None

    def to_sparse(self):
        return sp.csr_matrix(self.matrix)


class IdentityOperator(LinearOperator):
    """Identity on ``n`` entries; optionally tied to a grid for Fourier analysis."""

    kind = "identity"

    def __init__(self, n: int, grid: Optional[GridDims] = None):
        if grid is not None and grid.size != n:
            raise DimensionMismatchError(f"grid {grid.shape} does not match n={n}")
        super().__init__(n, n)
        self.grid = grid

    def _forward(self, x):
        return x.copy()

    _adjoint = _forward

    def fourier_symbol(self):
        return None if self.grid is None else np.ones(self.grid.shape)

    def explicit_gram_spectrum(self):
        return np.ones(self.domain_dim)

    def gram_solver(self, scale, shift):
        inv = 1.0 / (scale + shift)
        return lambda x: x * inv

    def to_sparse(self):
        return sp.identity(self.domain_dim, format="csr")


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized (sum 1) square Gaussian kernel of odd ``size``."""
    if size < 1 or size % 2 == 0:
        raise InvalidParameterError(f"kernel size must be a positive odd integer, got {size}")
    if not sigma > 0:
        raise InvalidParameterError(f"standard deviation must be positive, got {sigma}")
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def kernel_transfer(kernel: np.ndarray, dims: GridDims) -> np.ndarray:
    """DFT of a centered kernel embedded periodically in the grid (psf2otf)."""
    kh, kw = kernel.shape
    if kh > dims.height or kw > dims.width:
        raise DimensionMismatchError(f"kernel {kernel.shape} larger than grid {dims.shape}")
    pad = np.zeros(dims.shape)
    pad[:kh, :kw] = kernel
    pad = np.roll(pad, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return np.fft.fft2(pad)


class GaussianBlur(LinearOperator):
    """Circular convolution with a normalized Gaussian kernel."""

    kind = "gaussian-blur"

    def __init__(self, dims: GridDims, size: int = 7, sigma: float = 2.0):
        self.kernel = gaussian_kernel(size, sigma)
        super().__init__(dims.size, dims.size)
        self.grid = dims
        self.size = size
        self.sigma = sigma
        transfer = kernel_transfer(self.kernel, dims)
        # symmetric kernel: the transfer function is real up to rounding
        self.transfer = transfer.real if np.allclose(transfer.imag, 0, atol=1e-12) else transfer

    def _convolve(self, x, transfer):
        out = np.fft.ifft2(np.fft.fft2(x.reshape(self.grid.shape)) * transfer).ravel()
        return out if np.iscomplexobj(x) else out.real

    def _forward(self, x):
        return self._convolve(x, self.transfer)

    def _adjoint(self, y):
        return self._convolve(y, np.conj(self.transfer))

    def fourier_symbol(self):
        return np.abs(self.transfer) ** 2

    def to_sparse(self):
        h, w = self.grid.shape
        kh, kw = self.kernel.shape
        rows, cols, vals = [], [], []
        idx = np.arange(h * w).reshape(h, w)
        for dy in range(kh):
            for dx in range(kw):
                shift = (dy - kh // 2, dx - kw // 2)
                # y[i] += k[dy,dx] * x[i - shift]
                src = np.roll(idx, shift, axis=(0, 1))
                rows.append(idx.ravel())
                cols.append(src.ravel())
                vals.append(np.full(h * w, self.kernel[dy, dx]))
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(h * w, h * w)
        )
        return mat.tocsr()


class FourierSampling(LinearOperator):
    """Unitary 2D DFT followed by selection of the k-space entries where ``mask`` is set."""

    kind = "fourier-sampling"
    is_complex = True

    def __init__(self, dims: GridDims, mask):
        mask = np.asarray(mask)
        if mask.shape != dims.shape:
            raise DimensionMismatchError(f"mask shape {mask.shape} does not match grid {dims.shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise InvalidParameterError("sampling mask must be binary")
        self.mask = mask.astype(bool)
        self._index = np.flatnonzero(self.mask)
        super().__init__(len(self._index), dims.size)
        self.grid = dims

    def _forward(self, x):
        return _fft2(x.reshape(self.grid.shape)).ravel()[self._index]

    def _adjoint(self, y):
        full = np.zeros(self.grid.size, dtype=complex)
        full[self._index] = y
        return _ifft2(full.reshape(self.grid.shape)).ravel()

    def fourier_symbol(self):
        return self.mask.astype(float)


class PeriodicGradient(LinearOperator):
    """Forward differences with wraparound, stacked as ``[D_x u; D_y u]`` (2n x n)."""

    kind = "periodic-gradient"

    def __init__(self, dims: GridDims):
        super().__init__(2 * dims.size, dims.size)
        self.grid = dims

    def _forward(self, x):
        img = x.reshape(self.grid.shape)
        dx = np.roll(img, -1, axis=1) - img
        dy = np.roll(img, -1, axis=0) - img
        return np.concatenate([dx.ravel(), dy.ravel()])

    def _adjoint(self, y):
        n = self.grid.size
        gx = y[:n].reshape(self.grid.shape)
        gy = y[n:].reshape(self.grid.shape)
        out = (np.roll(gx, 1, axis=1) - gx) + (np.roll(gy, 1, axis=0) - gy)
        return out.ravel()

    def fourier_symbol(self):
        return fourier_grid_symbol(self.grid)

    def to_sparse(self):
        h, w = self.grid.shape
        n = h * w
        idx = np.arange(n).reshape(h, w)
        eye = sp.identity(n, format="csr")
        right = sp.csr_matrix((np.ones(n), (idx.ravel(), np.roll(idx, -1, axis=1).ravel())), shape=(n, n))
        down = sp.csr_matrix((np.ones(n), (idx.ravel(), np.roll(idx, -1, axis=0).ravel())), shape=(n, n))
        return sp.vstack([right - eye, down - eye]).tocsr()


class RegistrationJacobian(LinearOperator):
    """``J = [diag(I_x) | diag(I_y)]``: maps a stacked velocity ``[v_x; v_y]`` to the linearized residual."""

    kind = "registration-jacobian"

    def __init__(self, dims: GridDims, ix, iy):
        ix = np.asarray(ix, dtype=float).ravel()
        iy = np.asarray(iy, dtype=float).ravel()
        if ix.shape != (dims.size,) or iy.shape != (dims.size,):
            raise DimensionMismatchError("derivative fields must match the grid size")
        super().__init__(dims.size, 2 * dims.size)
        self.grid = dims
        self.ix = ix
        self.iy = iy

    def _forward(self, v):
        n = self.grid.size
        return self.ix * v[:n] + self.iy * v[n:]

    def _adjoint(self, r):
        return np.concatenate([self.ix * r, self.iy * r])

    def explicit_gram_spectrum(self):
        # each per-pixel block g g^T has eigenvalues {0, |g|^2}
        return np.concatenate([np.zeros(self.grid.size), self.ix**2 + self.iy**2])

    def gram_solver(self, scale, shift):
        if not shift > 0:
            return None
        n = self.grid.size
        norm2 = self.ix**2 + self.iy**2
        coef = scale / (shift + scale * norm2)

        def solve(v):
            # Sherman-Morrison on each rank-1 block: (s g g^T + t I)^{-1}
            vx, vy = v[:n], v[n:]
            proj = coef * (self.ix * vx + self.iy * vy)
            return np.concatenate([vx - proj * self.ix, vy - proj * self.iy]) / shift

        return solve

    def to_sparse(self):
        return sp.hstack([sp.diags(self.ix), sp.diags(self.iy)]).tocsr()


class BlockDiagonal(LinearOperator):
    """``blockdiag(B_1, ..., B_k)`` acting on concatenated inputs."""

    kind = "block-diagonal"

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        if not self.blocks:
            raise InvalidParameterError("block-diagonal operator needs at least one block")
        super().__init__(sum(b.codomain_dim for b in self.blocks), sum(b.domain_dim for b in self.blocks))
        self.is_complex = any(b.is_complex for b in self.blocks)
        self._dsplit = np.cumsum([b.domain_dim for b in self.blocks])[:-1]
        self._csplit = np.cumsum([b.codomain_dim for b in self.blocks])[:-1]

    def _forward(self, x):
        return np.concatenate([b.forward(p) for b, p in zip(self.blocks, np.split(x, self._dsplit))])

    def _adjoint(self, y):
        return np.concatenate([b.adjoint(p) for b, p in zip(self.blocks, np.split(y, self._csplit))])

    def explicit_gram_spectrum(self):
        parts = [b.explicit_gram_spectrum() for b in self.blocks]
        if any(p is None for p in parts):
            return None
        return np.concatenate(parts)

    def gram_solver(self, scale, shift):
        solvers = [b.gram_solver(scale, shift) for b in self.blocks]
        if any(s is None for s in solvers):
            return None

        def solve(x):
            return np.concatenate([s(p) for s, p in zip(solvers, np.split(x, self._dsplit))])

        return solve

    def to_sparse(self):
        parts = [b.to_sparse() for b in self.blocks]
        if any(p is None for p in parts):
            return None
        return sp.block_diag(parts, format="csr")


def make_operator(kind: str, **params) -> LinearOperator:
    """Build an operator by kind name.

    ============================ ==========================================
    kind                         parameters
    ============================ ==========================================
    ``dense``                    ``matrix``
    ``identity``                 ``n`` and/or ``dims``
    ``gaussian-blur``            ``dims``, ``size`` (odd), ``sigma``
    ``fourier-sampling``         ``dims``, ``mask``
    ``periodic-gradient``        ``dims``
    ``registration-jacobian``    ``dims``, ``ix``, ``iy``
    ``block-diagonal``           ``blocks``
    ============================ ==========================================
    """
    dims = params.pop("dims", None)
    if isinstance(dims, tuple):
        dims = GridDims(*dims)
    try:
        op = _build(kind, dims, params)
    except KeyError as exc:
        raise InvalidParameterError(f"{kind}: missing parameter {exc}") from None
    except AttributeError:
        raise InvalidParameterError(f"{kind}: grid dims are required") from None
    if params:
        raise InvalidParameterError(f"{kind}: unexpected parameters {sorted(params)}")
    return op


def _build(kind, dims, params):
    if kind == "dense":
        return DenseOperator(params.pop("matrix"))
    if kind == "identity":
        n = params.pop("n", None)
        if n is None:
            if dims is None:
                raise InvalidParameterError("identity needs n or dims")
            n = dims.size
        return IdentityOperator(n, dims)
    if kind == "gaussian-blur":
        return GaussianBlur(dims, params.pop("size", 7), params.pop("sigma", 2.0))
    if kind == "fourier-sampling":
        return FourierSampling(dims, params.pop("mask"))
    if kind == "periodic-gradient":
        return PeriodicGradient(dims)
    if kind == "registration-jacobian":
        return RegistrationJacobian(dims, params.pop("ix"), params.pop("iy"))
    if kind == "block-diagonal":
        return BlockDiagonal(params.pop("blocks"))
    raise InvalidParameterError(f"unknown operator kind {kind!r}")


def apply(op: LinearOperator, x, adjoint: bool = False):
    return op.adjoint(x) if adjoint else op.forward(x)


def materialize(op: LinearOperator) -> np.ndarray:
    """Dense matrix of ``op`` built column by column from basis vectors."""
    m, n = op.shape
    if n > MAX_DENSE_DIM or m * n > MAX_DENSE_ENTRIES:
        raise TooLargeError(f"refusing to materialize a {m}x{n} operator (cap {MAX_DENSE_DIM} columns)")
    if isinstance(op, DenseOperator):
        return np.array(op.matrix)
    dtype = complex if op.is_complex else float
    out = np.empty((m, n), dtype=dtype)
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        out[:, j] = op.forward(e)
        e[j] = 0.0
    return out


def dense_gram(op: LinearOperator) -> np.ndarray:
    if isinstance(op, IdentityOperator):
        return np.eye(op.domain_dim)
    mat = materialize(op)
    return mat.conj().T @ mat


def gram_spectrum(op: LinearOperator) -> Spectrum:
    origin = "G" if op.kind == "periodic-gradient" else "A^H A"
    explicit = op.explicit_gram_spectrum()
    if explicit is not None:
        return Spectrum(explicit, origin)
    if op.domain_dim <= MAX_DENSE_DIM and op.codomain_dim * op.domain_dim <= MAX_DENSE_ENTRIES:
        vals = np.linalg.eigvalsh(dense_gram(op))
        return Spectrum(vals, origin)
    raise UnsupportedOperatorError(f"no explicit spectrum for {op.kind} and too large to materialize")
