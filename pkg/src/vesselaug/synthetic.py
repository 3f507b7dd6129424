"""Synthetic DRIVE-like fundus images with known vessel masks.

Good enough to exercise every code path without shipping real data: a
circular field of view with a reddish vignetted background, a bright
optic disc and dark branching vessels of 1 to 4 pixels width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vesselaug.image_core import clamp01, quantize


@dataclass
class SyntheticFundus:
    image: np.ndarray  # uint8 (H, W, 3)
    truth: np.ndarray  # bool (H, W)
    fov: np.ndarray  # bool (H, W)


def _segment_distance(yy, xx, p0, p1):
    d = p1 - p0
    denom = float(d @ d) or 1.0
    t = np.clip(((yy - p0[0]) * d[0] + (xx - p0[1]) * d[1]) / denom, 0.0, 1.0)
    return np.hypot(yy - (p0[0] + t * d[0]), xx - (p0[1] + t * d[1]))


def synthetic_fundus(size: int = 128, n_vessels: int = 8, seed: int = 0) -> SyntheticFundus:
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2
    radius = 0.46 * size
    dist = np.hypot(yy - c, xx - c)
    fov = dist <= radius

    falloff = 1.0 - 0.45 * (dist / radius) ** 2
    texture = rng.normal(0.0, 0.015, (size, size))
    rgb = np.stack([0.78 * falloff, 0.38 * falloff, 0.14 * falloff], axis=-1) + texture[..., None]

    disc = np.array([c, c - 0.3 * size])
    disc_d = np.hypot(yy - disc[0], xx - disc[1])
    glow = np.exp(-((disc_d / (0.07 * size)) ** 2))
    rgb += glow[..., None] * np.array([0.2, 0.45, 0.3])

    truth = np.zeros((size, size), dtype=bool)
    for _ in range(n_vessels):
        angle = rng.uniform(0, 2 * np.pi)
        width = rng.uniform(0.6, 2.0)
        p = disc.copy()
        step = size / 24
        for _ in range(30):
            angle += rng.normal(0.0, 0.25)
            q = p + step * np.array([np.sin(angle), np.cos(angle)])
            truth |= _segment_distance(yy, xx, p, q) <= width
            p = q
            if np.hypot(*(p - c)) > radius:
                break
            width = max(0.5, width * 0.97)
    truth &= fov

    rgb[truth] *= np.array([0.82, 0.5, 0.7])
    rgb[~fov] = 0.0
    return SyntheticFundus(quantize(clamp01(rgb)), truth, fov)
