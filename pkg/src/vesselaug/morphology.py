"""Flat grayscale morphology with rotated line structuring elements.

A bright structure narrower than a line element, lying across it, is
removed by an opening with that element. Summing the top-hat residue over
lines rotated through ``[0, pi)`` therefore keeps thin elongated bright
structures at every orientation, which is what a vessel map needs once
the (dark) vessels have been inverted to be bright.

Element offsets that fall outside the image are ignored, so the image
edge never acts as a dark wall that the top-hat would report as structure.
Along rows and columns this is the same as replicating the border.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_NUM_ANGLES = 12
DEFAULT_LENGTH = 15


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class StructuringElement:
    """Flat line segment centred on the origin.

    ``offsets`` is an ``(length, 2)`` integer array of ``(dx, dy)`` pairs,
    ``dx`` along columns and ``dy`` along rows, ordered from one end of the
    segment to the other.
    """

    offsets: np.ndarray
    angle: float
    length: int

    @property
    def radius(self) -> int:
        return int(np.abs(self.offsets).max())


def line_element(angle: float, length: int) -> StructuringElement:
    """Rasterize a centred line of ``length`` pixels at ``angle`` radians.

    The line runs from ``-end`` to ``+end`` where ``end`` lies ``(length-1)/2``
    steps along the dominant axis; the minor coordinate at each step is the
    nearest pixel to the ideal line (Bresenham's choice), with ties rounded
    away from zero. Only the positive half is computed and then mirrored,
    so the offset set is exactly symmetric. Angles turn counter-clockwise
    on screen; since rows grow downward, an angle in ``(0, pi/2)`` pairs
    positive column offsets with negative row offsets.
    """
    if length < 3 or length % 2 == 0:
        raise ValueError(f"line length must be odd and >= 3, got {length}")
    half = (length - 1) // 2
    c, s = math.cos(angle), math.sin(angle)
    pos = []
    if abs(c) >= abs(s):
        slope = s / c
        for t in range(1, half + 1):
            pos.append((t, -_round_half_away(t * slope)))
    else:
        slope = c / s
        for t in range(1, half + 1):
            pos.append((_round_half_away(t * slope), -t))
    neg = [(-dx, -dy) for dx, dy in reversed(pos)]
    offsets = np.array(neg + [(0, 0)] + pos, dtype=np.intp)
    return StructuringElement(offsets=offsets, angle=float(angle), length=length)


@dataclass(frozen=True)
class StructuringElementBank:
    elements: tuple[StructuringElement, ...]

    @property
    def num_angles(self) -> int:
        return len(self.elements)

    @property
    def length(self) -> int:
        return self.elements[0].length

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)


def build_se_bank(num_angles: int = DEFAULT_NUM_ANGLES, length: int = DEFAULT_LENGTH) -> StructuringElementBank:
    """Lines at ``k * pi / num_angles`` for ``k = 0 .. num_angles - 1``."""
    if num_angles < 1:
        raise ValueError(f"num_angles must be >= 1, got {num_angles}")
    elements = tuple(line_element(k * math.pi / num_angles, length) for k in range(num_angles))
    return StructuringElementBank(elements)


def _check_plane(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {plane.shape}")
    if not np.isfinite(plane).all():
        raise ValueError("plane contains NaN or infinite values")
    return plane


def _rank_filter(plane: np.ndarray, se: StructuringElement, reduce, fill: float) -> np.ndarray:
    # Offsets landing outside the image are skipped: the pad holds the
    # reduction's identity, so it never wins. The centre offset is always
    # inside, so the result is finite.
    plane = _check_plane(plane)
    h, w = plane.shape
    r = se.radius
    padded = np.pad(plane, r, mode="constant", constant_values=fill)
    out = None
    for dx, dy in se.offsets:
        window = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        if out is None:
            out = window.copy()
        else:
            reduce(out, window, out=out)
    return out


def erode(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Minimum over the element's in-image offsets at every pixel.

    For horizontal and vertical elements this is identical to edge
    replication. For oblique ones, clamping each sample to the border would
    break the opening's anti-extensivity near the edge; skipping the sample
    keeps erode and dilate an adjoint pair.
    """
    return _rank_filter(plane, se, np.minimum, np.inf)


def dilate(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Maximum over the element's in-image offsets at every pixel.

    The element is symmetric, so no reflection is needed.
    """
    return _rank_filter(plane, se, np.maximum, -np.inf)


def opening(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    return dilate(erode(plane, se), se)


def top_hat(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    plane = _check_plane(plane)
    return plane - opening(plane, se)


def top_hat_sum(plane: np.ndarray, bank: StructuringElementBank) -> np.ndarray:
    """Sum of top-hats over every element of ``bank``, in bank order."""
    if len(bank) == 0:
        raise ValueError("structuring element bank is empty")
    plane = _check_plane(plane)
    total = np.zeros_like(plane)
    for se in bank:
        total += top_hat(plane, se)
    return total


def normalize_minmax(plane: np.ndarray) -> np.ndarray:
    """Rescale to span ``[0, 1]``; a constant plane maps to zeros."""
    plane = _check_plane(plane)
    if plane.size == 0:
        return plane.copy()
    lo, hi = plane.min(), plane.max()
    if hi == lo:
        return np.zeros_like(plane)
    return (plane - lo) / (hi - lo)
