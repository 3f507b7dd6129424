"""Photometric and geometric augmentations for color fundus images.

Two operators target vessel segmentation robustness:

* channel-wise random gamma correction (CWRGC) raises each RGB channel to
  its own random power, varying the global tonal rendition;
* channel-wise random vessel augmentation (CWRVA) locates vessels with a
  multi-angle top-hat and blends a random intensity into them, with a
  random strength per channel.

Random flips, additive Gaussian noise (RGN) and HSV saturation/value gamma
(SVGC) are provided as baselines. :func:`apply_pipeline` chains the stages
in the fixed order flips -> RGN -> SVGC -> CWRGC -> CWRVA.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np
from skimage.color import hsv2rgb, rgb2hsv

from vesselaug.image_core import (
    Channel,
    DataContractError,
    as_float,
    check_rgb,
    clamp01,
    flip_horizontal,
    flip_vertical,
    quantize,
    rgb_to_gray,
)
from vesselaug.morphology import (
    DEFAULT_LENGTH,
    DEFAULT_NUM_ANGLES,
    StructuringElementBank,
    build_se_bank,
    normalize_minmax,
    top_hat_sum,
)

DEFAULT_SEED = 20200901
RNG_ALGORITHM = "PCG64"

Sampling = Literal["log-uniform", "uniform"]
SourcePlane = Literal["inverted-green", "inverted-gray"]

# stage ids double as substream keys, so they must never be renumbered
STAGES = ("flips", "rgn", "svgc", "cwrgc", "cwrva")
_STAGE_KEY = {name: i for i, name in enumerate(STAGES)}


class RngStream:
    """Seeded PCG64 stream addressed by an integer key path.

    ``RngStream(seed).child(image_index, sample_index, stage)`` always yields
    the same draws, independently of which other children were consumed,
    so stages and images can be processed in any order or in parallel.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int = DEFAULT_SEED, key: Sequence[int] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.draws = 0
        self._gen = None

    def child(self, *key: int) -> RngStream:
        return RngStream(self.seed, self.key + key)

    @property
    def generator(self) -> np.random.Generator:
        # created on first draw: most streams in a key tree are only parents
        if self._gen is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
            self._gen = np.random.Generator(np.random.PCG64(seq))
        return self._gen

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        self.draws += 1 if size is None else int(np.prod(size))
        return self.generator.uniform(lo, hi, size)

    def normal(self, sigma: float = 1.0, size=None):
        self.draws += 1 if size is None else int(np.prod(size))
        return self.generator.normal(0.0, sigma, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key}, draws={self.draws})"


def _check_range(lo: float, hi: float) -> None:
    if not (0 < lo <= hi) or not math.isfinite(hi):
        raise ValueError(f"gamma range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")


def sample_gamma(rng: RngStream, lo: float, hi: float, size=None, sampling: Sampling = "log-uniform"):
    """Draw positive exponents from ``[lo, hi]``.

    Log-uniform is the default because ranges like ``[0.33, 3]`` are
    balanced around 1 only on a log scale.
    """
    _check_range(lo, hi)
    if sampling == "log-uniform":
        return np.exp(rng.uniform(math.log(lo), math.log(hi), size))
    if sampling == "uniform":
        return rng.uniform(lo, hi, size)
    raise ValueError(f"unknown sampling {sampling!r}")


# -- CWRGC ------------------------------------------------------------------


@dataclass(frozen=True)
class CwrgcParams:
    gamma: tuple[float, float, float]

    def __post_init__(self):
        if len(self.gamma) != 3 or not all(g > 0 and math.isfinite(g) for g in self.gamma):
            raise ValueError(f"gammas must be three positive finite values, got {self.gamma}")


def sample_cwrgc(rng: RngStream, lo: float = 0.33, hi: float = 3.0, sampling: Sampling = "log-uniform") -> CwrgcParams:
    g = sample_gamma(rng, lo, hi, 3, sampling)
    return CwrgcParams(tuple(float(v) for v in g))


def cwrgc(img: np.ndarray, params: CwrgcParams) -> np.ndarray:
    """Raise channel ``i`` of the normalized image to ``params.gamma[i]``."""
    rgb = as_float(check_rgb(img))
    out = np.empty_like(rgb)
    for ch in Channel:
        g = params.gamma[ch]
        out[..., ch] = rgb[..., ch] if g == 1.0 else np.power(rgb[..., ch], g)
    return clamp01(out)


# -- CWRVA ------------------------------------------------------------------


@dataclass(frozen=True)
class CwrvaParams:
    lam: tuple[float, float, float]
    disturb: float
    num_angles: int = DEFAULT_NUM_ANGLES
    length: int = DEFAULT_LENGTH
    source: SourcePlane = "inverted-green"

    def __post_init__(self):
        if len(self.lam) != 3 or not all(0.0 <= v <= 1.0 for v in self.lam):
            raise ValueError(f"decay coefficients must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.disturb <= 1.0:
            raise ValueError(f"disturbing intensity must lie in [0, 1], got {self.disturb}")


def sample_cwrva(rng: RngStream, num_angles: int = DEFAULT_NUM_ANGLES, length: int = DEFAULT_LENGTH,
                 source: SourcePlane = "inverted-green") -> CwrvaParams:
    """Three independent decays in ``[0, 1]`` and one shared disturbing intensity."""
    lam = rng.uniform(0.0, 1.0, 3)
    disturb = rng.uniform(0.0, 1.0)
    return CwrvaParams(tuple(float(v) for v in lam), float(disturb), num_angles, length, source)


def vessel_source_plane(img: np.ndarray, source: SourcePlane = "inverted-green") -> np.ndarray:
    """Plane in which vessels appear bright: ``1 - G`` or ``1 - gray``."""
    rgb = as_float(check_rgb(img))
    if source == "inverted-green":
        return 1.0 - rgb[..., Channel.G]
    if source == "inverted-gray":
        return 1.0 - rgb_to_gray(rgb)
    raise ValueError(f"unknown source plane {source!r}")


def vessel_map(img: np.ndarray, bank: StructuringElementBank, source: SourcePlane = "inverted-green") -> np.ndarray:
    """Normalized multi-angle top-hat response in ``[0, 1]``."""
    return normalize_minmax(top_hat_sum(vessel_source_plane(img, source), bank))


def attention_map(img: np.ndarray, params: CwrvaParams, bank: StructuringElementBank | None = None) -> np.ndarray:
    """Per-channel attention planes stacked as ``(H, W, 3)``.

    Channel ``i`` is the vessel map scaled by ``params.lam[i]``.
    """
    if bank is None:
        bank = build_se_bank(params.num_angles, params.length)
    vmap = vessel_map(img, bank, params.source)
    return vmap[..., None] * np.asarray(params.lam, dtype=np.float64)


def cwrva(img: np.ndarray, attention: np.ndarray, disturb: float) -> np.ndarray:
    """Blend every sample toward ``disturb`` with weight ``attention``."""
    if not 0.0 <= disturb <= 1.0:
        raise ValueError(f"disturbing intensity must lie in [0, 1], got {disturb}")
    rgb = as_float(check_rgb(img))
    m = np.asarray(attention, dtype=np.float64)
    if m.shape != rgb.shape:
        raise DataContractError(f"attention map shape {m.shape} does not match image {rgb.shape}")
    if m.size and (m.min() < 0.0 or m.max() > 1.0):
        raise DataContractError("attention map values must lie in [0, 1]")
    return clamp01(rgb * (1.0 - m) + m * disturb)


# -- baselines ----------------------------------------------------------------


def rgn(img: np.ndarray, rng: RngStream, sigma: float = 20 / 255) -> np.ndarray:
    """Add independent zero-mean Gaussian noise to every sample, then clamp."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    rgb = as_float(check_rgb(img))
    if sigma == 0:
        return rgb.copy()
    return clamp01(rgb + rng.normal(sigma, rgb.shape))


def svgc(img: np.ndarray, rng: RngStream, lo: float = 0.25, hi: float = 4.0,
         sampling: Sampling = "log-uniform") -> np.ndarray:
    """Random gamma on the S and V planes of the hexcone HSV model."""
    gs, gv = sample_gamma(rng, lo, hi, 2, sampling)
    return svgc_fixed(img, float(gs), float(gv))


def svgc_fixed(img: np.ndarray, gamma_s: float, gamma_v: float) -> np.ndarray:
    rgb = as_float(check_rgb(img))
    if gamma_s == 1.0 and gamma_v == 1.0:
        return rgb.copy()
    if rgb.size == 0:
        return rgb.copy()
    hsv = rgb2hsv(rgb)
    hsv[..., 1] **= gamma_s
    hsv[..., 2] **= gamma_v
    return clamp01(hsv2rgb(hsv))


def random_flips(img: np.ndarray, masks: Sequence[np.ndarray], rng: RngStream, p: float = 0.5):
    """Flip horizontally and vertically, each with probability ``p``.

    The same decisions apply to ``img`` and every array in ``masks``.
    Returns ``(img, masks, (flipped_h, flipped_v))``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"flip probability must lie in [0, 1], got {p}")
    u = rng.uniform(0.0, 1.0, 2)
    do_h, do_v = bool(u[0] < p), bool(u[1] < p)
    masks = list(masks)
    if do_h:
        img = flip_horizontal(img)
        masks = [flip_horizontal(m) for m in masks]
    if do_v:
        img = flip_vertical(img)
        masks = [flip_vertical(m) for m in masks]
    return img, masks, (do_h, do_v)


# -- pipeline -------------------------------------------------------------------


@dataclass
class AugmentationConfig:
    flips: bool = True
    flip_p: float = 0.5
    rgn: bool = False
    rgn_sigma: float = 20 / 255
    svgc: bool = False
    svgc_range: tuple[float, float] = (0.25, 4.0)
    cwrgc: bool = True
    cwrgc_range: tuple[float, float] = (0.33, 3.0)
    cwrva: bool = True
    lambda_range: tuple[float, float] = (0.0, 1.0)
    disturb_range: tuple[float, float] = (0.0, 1.0)
    gamma_sampling: Sampling = "log-uniform"
    num_angles: int = DEFAULT_NUM_ANGLES
    length: int = DEFAULT_LENGTH
    source: SourcePlane = "inverted-green"
    samples_per_image: int = 1

    def __post_init__(self):
        for name in ("svgc_range", "cwrgc_range", "lambda_range", "disturb_range"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        _check_range(*self.svgc_range)
        _check_range(*self.cwrgc_range)
        for name in ("lambda_range", "disturb_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1, got {(lo, hi)}")
        if self.gamma_sampling not in ("log-uniform", "uniform"):
            raise ValueError(f"unknown gamma_sampling {self.gamma_sampling!r}")
        if self.source not in ("inverted-green", "inverted-gray"):
            raise ValueError(f"unknown source {self.source!r}")
        if not 0.0 <= self.flip_p <= 1.0:
            raise ValueError(f"flip_p must lie in [0, 1], got {self.flip_p}")
        if self.rgn_sigma < 0:
            raise ValueError(f"rgn_sigma must be non-negative, got {self.rgn_sigma}")
        if self.samples_per_image < 1:
            raise ValueError("samples_per_image must be >= 1")
        build_se_bank(self.num_angles, self.length)  # validates the bank settings

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AugmentationConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown augmentation options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AugmentedSample:
    image: np.ndarray
    masks: list[np.ndarray]
    params: dict = field(default_factory=dict)


def augment_once(img: np.ndarray, masks: Sequence[np.ndarray], config: AugmentationConfig,
                 rng: RngStream, bank: StructuringElementBank | None = None) -> AugmentedSample:
    """Run every enabled stage once. Each stage draws from its own child stream."""
    rgb = as_float(check_rgb(img))
    masks = [np.asarray(m) for m in masks]
    for m in masks:
        if m.shape[:2] != rgb.shape[:2]:
            raise DataContractError(f"mask shape {m.shape} does not match image {rgb.shape}")
    params: dict = {}

    if config.flips:
        rgb, masks, (h, v) = random_flips(rgb, masks, rng.child(_STAGE_KEY["flips"]), config.flip_p)
        params["flips"] = {"horizontal": h, "vertical": v}
    if config.rgn:
        rgb = rgn(rgb, rng.child(_STAGE_KEY["rgn"]), config.rgn_sigma)
        params["rgn"] = {"sigma": config.rgn_sigma}
    if config.svgc:
        gs, gv = sample_gamma(rng.child(_STAGE_KEY["svgc"]), *config.svgc_range, 2, config.gamma_sampling)
        rgb = svgc_fixed(rgb, float(gs), float(gv))
        params["svgc"] = {"gamma_s": float(gs), "gamma_v": float(gv)}
    if config.cwrgc:
        p = sample_cwrgc(rng.child(_STAGE_KEY["cwrgc"]), *config.cwrgc_range, config.gamma_sampling)
        rgb = cwrgc(rgb, p)
        params["cwrgc"] = {"gamma": list(p.gamma)}
    if config.cwrva:
        sub = rng.child(_STAGE_KEY["cwrva"])
        lam = sub.uniform(*config.lambda_range, 3)
        disturb = float(sub.uniform(*config.disturb_range))
        p = CwrvaParams(tuple(float(v) for v in lam), disturb, config.num_angles, config.length, config.source)
        if bank is None:
            bank = build_se_bank(config.num_angles, config.length)
        # the vessel map is taken from the gamma-corrected image, not the input
        rgb = cwrva(rgb, attention_map(rgb, p, bank), p.disturb)
        params["cwrva"] = {"lambda": list(p.lam), "disturb": p.disturb}

    return AugmentedSample(quantize(rgb), masks, params)


def apply_pipeline(img: np.ndarray, masks: Sequence[np.ndarray], config: AugmentationConfig,
                   rng: RngStream, bank: StructuringElementBank | None = None) -> list[AugmentedSample]:
    """Produce ``config.samples_per_image`` quantized samples from one image.

    ``rng`` should be the image's own stream, e.g. ``RngStream(seed).child(i)``;
    sample ``k`` uses ``rng.child(k)``.
    """
    if bank is None and config.cwrva:
        bank = build_se_bank(config.num_angles, config.length)
    return [augment_once(img, masks, config, rng.child(k), bank) for k in range(config.samples_per_image)]
