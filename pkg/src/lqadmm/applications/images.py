"""Synthetic test images and sampling masks."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidParameterError
from ..operators import GridDims

# (intensity, semi-axis a, semi-axis b, centre x, centre y, rotation in degrees), unit-square coordinates
_PHANTOM_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def phantom(dims: GridDims) -> np.ndarray:
    """Modified Shepp-Logan head phantom with values in ``[0, 1]``."""
    h, w = dims.shape
    y, x = np.mgrid[1 : -1 : h * 1j, -1 : 1 : w * 1j]
    img = np.zeros((h, w))
    for val, a, b, cx, cy, deg in _PHANTOM_ELLIPSES:
        t = np.deg2rad(deg)
        xr = (x - cx) * np.cos(t) + (y - cy) * np.sin(t)
        yr = -(x - cx) * np.sin(t) + (y - cy) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    return np.clip(img, 0.0, 1.0)


def gaussian_blobs(dims: GridDims, blobs) -> np.ndarray:
    """Sum of isotropic Gaussians ``(cx, cy, sigma)`` in pixel units, scaled to peak 1."""
    h, w = dims.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    img = np.zeros((h, w))
    for cx, cy, s in blobs:
        img += np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * s * s))
    return img / img.max()


def blob_pair(dims: GridDims = GridDims(64, 64)):
    """Source/target pair of smooth blobs; the target moves each blob by about one pixel."""
    sx, sy = dims.width / 64.0, dims.height / 64.0
    s = min(sx, sy)
    src = [(24 * sx, 24 * sy, 6 * s), (40 * sx, 38 * sy, 5 * s), (30 * sx, 44 * sy, 4 * s)]
    tgt = [(25.5 * sx, 24 * sy, 6 * s), (41 * sx, 39 * sy, 5 * s), (31 * sx, 43 * sy, 4 * s)]
    return gaussian_blobs(dims, src), gaussian_blobs(dims, tgt)


def cartesian_mask(dims: GridDims, rows=None, fraction: float = 0.5, seed: int = 0,
                   sample_dc: bool = True) -> np.ndarray:
    """Binary k-space mask that samples whole rows (unshifted DFT indexing).

    Explicit ``rows`` win; otherwise ``round(fraction * height)`` rows are
    drawn at random without replacement, with row 0 (DC) forced in or out
    according to ``sample_dc``.
    """
    h, w = dims.shape
    if rows is None:
        if not 0.0 < fraction < 1.0:
            raise InvalidParameterError(f"fraction must lie in (0, 1), got {fraction}")
        count = max(1, int(round(fraction * h)))
        rng = np.random.default_rng(seed)
        others = rng.permutation(np.arange(1, h))
        rows = ([0] + list(others[: count - 1])) if sample_dc else list(others[:count])
    mask = np.zeros((h, w))
    rows = np.asarray(rows, dtype=int)
    if rows.size and (rows.min() < 0 or rows.max() >= h):
        raise InvalidParameterError(f"mask rows must lie in [0, {h})")
    mask[rows, :] = 1.0
    return mask
