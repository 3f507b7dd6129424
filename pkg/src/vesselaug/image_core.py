"""Raster conventions and shared pixel operations.

Images travel through the package as numpy arrays:

* an RGB image is ``(height, width, 3)``, either ``uint8`` storage or
  ``float64`` normalized to ``[0, 1]``;
* a plane is a single-channel ``(height, width)`` ``float64`` array.

All arithmetic happens on normalized floats. Conversion to 8 bits only
happens at I/O boundaries through :func:`quantize`.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


class Channel(IntEnum):
    R = 0
    G = 1
    B = 2


class DataContractError(ValueError):
    """Input data violates a documented contract (range, shape, class balance)."""


def check_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataContractError(f"expected an (H, W, 3) image, got shape {img.shape}")
    return img


def as_float(img: np.ndarray) -> np.ndarray:
    """Return the normalized float view of an image or plane.

    ``uint8`` data is divided by 255; float data is returned as ``float64``
    unchanged (it is assumed to already be normalized).
    """
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if np.issubdtype(arr.dtype, np.integer):
        raise DataContractError(f"unsupported integer dtype {arr.dtype}; only uint8 is stored")
    return arr.astype(np.float64, copy=False)


def clamp01(x: np.ndarray) -> np.ndarray:
    """Clip to ``[0, 1]``. NaN or infinite input is a bug upstream, not a value to clip."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise DataContractError("cannot clamp NaN or infinite values")
    return np.clip(x, 0.0, 1.0)


def quantize(x: np.ndarray) -> np.ndarray:
    """Map normalized values to ``uint8`` with round-half-away-from-zero.

    ``np.round`` rounds half to even, which would send 0.5 to 127 instead
    of 128, so the rounding is spelled out.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size and not (0.0 <= x.min() and x.max() <= 1.0):
        raise DataContractError("quantize expects finite values already clamped to [0, 1]")
    return np.floor(x * 255.0 + 0.5).astype(np.uint8)


def rgb_to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of a normalized RGB image, shape ``(H, W)``."""
    rgb = as_float(check_rgb(img))
    # explicit sum keeps the result bit-identical regardless of BLAS dispatch
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def mean_gray(img: np.ndarray) -> float:
    img = check_rgb(img)
    if img.shape[0] * img.shape[1] == 0:
        raise DataContractError("mean_gray of an empty image is undefined")
    return float(rgb_to_gray(img).mean())


def flip_horizontal(img: np.ndarray) -> np.ndarray:
    """Mirror columns. Works for images and planes alike."""
    return np.ascontiguousarray(np.asarray(img)[:, ::-1])


def flip_vertical(img: np.ndarray) -> np.ndarray:
    """Mirror rows. Works for images and planes alike."""
    return np.ascontiguousarray(np.asarray(img)[::-1])
