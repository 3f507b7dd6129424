"""Brightness, contrast and saturation jitter, plus the robustness sweep.

The sweep perturbs a test set with each jitter at a grid of ratios and
writes one dataset per ``(kind, ratio)`` pair, so a trained model can be
re-evaluated on every perturbed copy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from vesselaug import dataset_io
from vesselaug.image_core import as_float, check_rgb, clamp01, mean_gray, quantize, rgb_to_gray

log = logging.getLogger(__name__)

JitterKind = Literal["brightness", "contrast", "saturation"]
KINDS: tuple[JitterKind, ...] = ("brightness", "contrast", "saturation")


def _check_ratio(ratio: float, name: str) -> None:
    if not -1.0 <= ratio <= 1.0:
        raise ValueError(f"{name} ratio must lie in [-1, 1], got {ratio}")


def brightness(img: np.ndarray, b: float) -> np.ndarray:
    _check_ratio(b, "brightness")
    return clamp01(as_float(check_rgb(img)) * (1.0 - b))


def contrast(img: np.ndarray, c: float) -> np.ndarray:
    """Blend toward the input's scalar mean gray level."""
    _check_ratio(c, "contrast")
    rgb = as_float(check_rgb(img))
    return clamp01(rgb * (1.0 - c) + mean_gray(rgb) * c)


def saturation(img: np.ndarray, s: float) -> np.ndarray:
    """Blend each pixel toward its own gray level."""
    _check_ratio(s, "saturation")
    rgb = as_float(check_rgb(img))
    return clamp01(rgb * (1.0 - s) + rgb_to_gray(rgb)[..., None] * s)


JITTERS = {"brightness": brightness, "contrast": contrast, "saturation": saturation}


def jitter(img: np.ndarray, kind: JitterKind, ratio: float) -> np.ndarray:
    try:
        fn = JITTERS[kind]
    except KeyError:
        raise ValueError(f"unknown jitter kind {kind!r}; expected one of {KINDS}") from None
    return fn(img, ratio)


def default_ratios() -> list[float]:
    """-0.5 .. 0.5 in steps of 0.1 without 0: ten values."""
    return [k / 10 for k in range(-5, 6) if k != 0]


def format_ratio(ratio: float) -> str:
    # one decimal is enough for the 0.1 grid; finer ratios keep their digits
    text = f"{ratio:.1f}" if round(ratio, 1) == ratio else repr(float(ratio))
    return "0.0" if text == "-0.0" else text


def dataset_name(kind: str, ratio: float) -> str:
    return f"{kind}_{format_ratio(ratio)}"


@dataclass
class SweepSpec:
    ratios: list[float] = field(default_factory=default_ratios)
    kinds: tuple[str, ...] = KINDS

    def __post_init__(self):
        for r in self.ratios:
            _check_ratio(r, "sweep")
        for k in self.kinds:
            if k not in JITTERS:
                raise ValueError(f"unknown jitter kind {k!r}")

    def pairs(self) -> list[tuple[str, float]]:
        return [(k, r) for k in self.kinds for r in self.ratios]


def jitter_dataset(manifest, kind: str, ratio: float, out_dir: Path):
    """Write one jittered copy of ``manifest`` under ``out_dir``.

    Images are re-encoded as PNG, except at ratio 0 where every jitter is
    the identity and the source files are copied byte for byte. Truth and
    FOV masks are always copied unmodified. Returns the new :class:`~vesselaug.dataset_io.DatasetManifest`.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for e in manifest.entries:
        src = manifest.resolve(e.image)
        if ratio == 0:
            image_rel = f"images/{e.id}{src.suffix}"
            dataset_io.copy_file(src, out_dir / image_rel)
        else:
            img = dataset_io.load_image(src)
            image_rel = f"images/{e.id}.png"
            dataset_io.save_image(quantize(jitter(img, kind, ratio)), out_dir / image_rel)
        truth_rel = fov_rel = None
        if e.truth:
            src = manifest.resolve(e.truth)
            truth_rel = f"truth/{e.id}{src.suffix}"
            dataset_io.copy_file(src, out_dir / truth_rel)
        if e.fov:
            src = manifest.resolve(e.fov)
            fov_rel = f"fov/{e.id}{src.suffix}"
            dataset_io.copy_file(src, out_dir / fov_rel)
        entries.append(dataset_io.ManifestEntry(e.id, image_rel, truth_rel, fov_rel))
    new = dataset_io.DatasetManifest(entries, out_dir, meta={"jitter": {"kind": kind, "ratio": ratio}})
    dataset_io.save_manifest(new, out_dir / "manifest.jsonl")
    return new


def generate_sweep(manifest, spec: SweepSpec, out_root: Path):
    """Build one jittered dataset per ``(kind, ratio)`` and a sweep manifest.

    A failing entry is logged and marked ``"failed"`` in the sweep manifest;
    the remaining datasets are still produced.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    records = []
    for kind, ratio in spec.pairs():
        name = dataset_name(kind, ratio)
        rec = dataset_io.SweepEntry(name=name, kind=kind, ratio=ratio, manifest=f"{name}/manifest.jsonl")
        try:
            jitter_dataset(manifest, kind, ratio, out_root / name)
        except (OSError, ValueError) as exc:
            log.error("sweep dataset %s failed: %s", name, exc)
            rec.status = "failed"
            rec.error = str(exc)
        records.append(rec)
    sweep = dataset_io.SweepManifest(records, out_root, source=str(manifest.path or manifest.root))
    dataset_io.save_sweep_manifest(sweep, out_root / "sweep.jsonl")
    return sweep
