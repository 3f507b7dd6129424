"""Raster I/O and dataset manifests.

Manifests are JSON Lines. The first line is a header naming the schema and
its version; each following line is one record::

    {"schema": "vesselaug/dataset", "version": 1, "meta": {}}
    {"id": "01", "image": "images/01.png", "truth": "truth/01.png", "fov": "mask/01.png"}

Relative paths resolve against the manifest's directory. Every file
written here goes through a temporary file and an atomic rename.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from vesselaug.image_core import DataContractError, check_rgb

log = logging.getLogger(__name__)

DATASET_SCHEMA = "vesselaug/dataset"
SWEEP_SCHEMA = "vesselaug/sweep"
SCHEMA_VERSION = 1

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class UnsupportedImageError(DataContractError):
    pass


class ManifestError(DataContractError):
    pass


# -- atomic writes ------------------------------------------------------------


@contextmanager
def atomic_path(path):
    """Yield a temporary sibling of ``path``; rename it over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp" + path.suffix, dir=path.parent)
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_text(path, text: str) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


def copy_file(src, dst) -> None:
    with atomic_path(dst) as tmp:
        shutil.copyfile(src, tmp)


# -- rasters ------------------------------------------------------------------


def _png_bit_depth(path: Path) -> int | None:
    with open(path, "rb") as fh:
        head = fh.read(26)
    if head[:8] != _PNG_MAGIC or len(head) < 26:
        return None
    return head[24]


def _open(path) -> Image.Image:
    path = Path(path)
    im = Image.open(path)
    im.load()  # surfaces truncation here rather than at first pixel access
    if im.width == 0 or im.height == 0:
        raise UnsupportedImageError(f"{path}: image has zero width or height")
    return im


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB raster as ``uint8`` ``(H, W, 3)``.

    Grayscale files are promoted to three equal channels. Deeper than 8-bit
    data and alpha channels are rejected.
    """
    path = Path(path)
    depth = _png_bit_depth(path)
    if depth is not None and depth > 8:
        raise UnsupportedImageError(f"{path}: {depth}-bit samples are not supported for color input (8-bit only)")
    im = _open(path)
    if im.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
        raise UnsupportedImageError(f"{path}: mode {im.mode} (more than 8 bits per sample) is not supported for color input")
    if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
        raise UnsupportedImageError(f"{path}: alpha channels are not supported")
    if im.mode != "RGB":
        im = im.convert("RGB")
    return np.asarray(im, dtype=np.uint8).copy()


def save_image(img: np.ndarray, path) -> None:
    img = check_rgb(img)
    if img.dtype != np.uint8:
        raise DataContractError(f"save_image expects uint8 samples, got {img.dtype}; quantize first")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise DataContractError("cannot save an image with zero width or height")
    with atomic_path(path) as tmp:
        Image.fromarray(img, "RGB").save(tmp, format="PNG")


def save_gray(plane: np.ndarray, path) -> None:
    """Write a ``uint8`` or ``uint16`` single-channel raster as PNG."""
    plane = np.asarray(plane)
    if plane.ndim != 2 or plane.dtype not in (np.uint8, np.uint16):
        raise DataContractError(f"save_gray expects a 2-D uint8/uint16 array, got {plane.dtype} {plane.shape}")
    with atomic_path(path) as tmp:
        Image.fromarray(plane).save(tmp, format="PNG")


def _load_single_channel(path) -> tuple[np.ndarray, int]:
    """Return ``(samples, max_value)`` for a single-channel raster."""
    im = _open(path)
    if im.mode == "1":
        return np.asarray(im.convert("L")), 255
    if im.mode == "L":
        return np.asarray(im), 255
    if im.mode.startswith("I;16") or im.mode == "I":
        arr = np.asarray(im).astype(np.int64)
        if arr.min() < 0 or arr.max() > 65535:
            raise UnsupportedImageError(f"{path}: 32-bit samples are not supported")
        return arr.astype(np.uint16), 65535
    if im.mode in ("RGB", "RGBA", "P", "LA"):
        rgb = np.asarray(im.convert("RGB"))
        if not (np.array_equal(rgb[..., 0], rgb[..., 1]) and np.array_equal(rgb[..., 0], rgb[..., 2])):
            raise UnsupportedImageError(f"{path}: multi-channel mask whose channels disagree")
        return rgb[..., 0].copy(), 255
    raise UnsupportedImageError(f"{path}: unsupported mode {im.mode}")


def load_binary_mask(path) -> np.ndarray:
    """Read a mask as a boolean plane: samples above half range are True."""
    arr, top = _load_single_channel(path)
    nonextremal = int(np.count_nonzero((arr != 0) & (arr != top)))
    if nonextremal:
        log.warning("%s: %d samples are neither 0 nor %d; thresholded at half range", path, nonextremal, top)
    return arr > top / 2


def save_binary_mask(mask: np.ndarray, path) -> None:
    save_gray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), path)


def encode_probability(prob: np.ndarray, bits: int = 16) -> np.ndarray:
    if bits not in (8, 16):
        raise ValueError(f"probability maps are 8 or 16 bit, got {bits}")
    prob = np.asarray(prob, dtype=np.float64)
    if prob.size and (not np.isfinite(prob).all() or prob.min() < 0 or prob.max() > 1):
        raise DataContractError("probabilities must be finite and lie in [0, 1]")
    top = (1 << bits) - 1
    return np.floor(prob * top + 0.5).astype(np.uint8 if bits == 8 else np.uint16)


def save_probability_map(prob: np.ndarray, path, bits: int = 16) -> None:
    save_gray(encode_probability(prob, bits), path)


def load_probability_map(path) -> np.ndarray:
    """Decode ``stored / (2**bits - 1)`` from an 8- or 16-bit raster."""
    arr, top = _load_single_channel(path)
    return arr.astype(np.float64) / top


# -- manifests ----------------------------------------------------------------


@dataclass
class ManifestEntry:
    id: str
    image: str
    truth: str | None = None
    fov: str | None = None

    def to_dict(self) -> dict:
        d = {"id": self.id, "image": self.image}
        if self.truth is not None:
            d["truth"] = self.truth
        if self.fov is not None:
            d["fov"] = self.fov
        return d


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path
    meta: dict = field(default_factory=dict)
    path: Path | None = None

    def __post_init__(self):
        self.root = Path(self.root)
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise ManifestError(f"duplicate id {e.id!r}")
            seen.add(e.id)

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def by_id(self) -> dict[str, ManifestEntry]:
        return {e.id: e for e in self.entries}


def _read_jsonl(path, schema: str) -> tuple[dict, list[tuple[int, dict]]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    records = []
    header = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg} at column {exc.colno})") from None
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}:{lineno}: expected a JSON object")
        if header is None:
            if obj.get("schema") != schema:
                raise ManifestError(f"{path}:{lineno}: header must have schema {schema!r}, got {obj.get('schema')!r}")
            if obj.get("version") != SCHEMA_VERSION:
                raise ManifestError(f"{path}:{lineno}: unsupported schema version {obj.get('version')!r}")
            header = obj
        else:
            records.append((lineno, obj))
    if header is None:
        raise ManifestError(f"{path}: empty manifest (missing header line)")
    return header, records


def _field(path, lineno, obj, name, required=True):
    value = obj.get(name)
    if value is None:
        if required:
            raise ManifestError(f"{path}:{lineno}: missing required field {name!r}")
        return None
    if not isinstance(value, str) or not value:
        raise ManifestError(f"{path}:{lineno}: field {name!r} must be a non-empty string")
    return value


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    header, records = _read_jsonl(path, DATASET_SCHEMA)
    entries = []
    seen = {}
    allowed = {"id", "image", "truth", "fov"}
    for lineno, obj in records:
        extra = set(obj) - allowed
        if extra:
            raise ManifestError(f"{path}:{lineno}: unknown fields {sorted(extra)}")
        e = ManifestEntry(
            id=_field(path, lineno, obj, "id"),
            image=_field(path, lineno, obj, "image"),
            truth=_field(path, lineno, obj, "truth", required=False),
            fov=_field(path, lineno, obj, "fov", required=False),
        )
        if e.id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate id {e.id!r} (first on line {seen[e.id]})")
        seen[e.id] = lineno
        entries.append(e)
    return DatasetManifest(entries, path.parent, meta=header.get("meta", {}), path=path)


def _dump_jsonl(header: dict, rows: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in [header, *rows])


def save_manifest(manifest: DatasetManifest, path) -> None:
    header = {"schema": DATASET_SCHEMA, "version": SCHEMA_VERSION, "meta": manifest.meta}
    write_text(path, _dump_jsonl(header, [e.to_dict() for e in manifest.entries]))
    manifest.path = Path(path)


@dataclass
class SweepEntry:
    name: str
    kind: str
    ratio: float
    manifest: str
    status: str = "ok"
    error: str | None = None

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "ratio": self.ratio, "manifest": self.manifest, "status": self.status}
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class SweepManifest:
    entries: list[SweepEntry]
    root: Path
    source: str = ""
    path: Path | None = None

    def resolve(self, rel: str) -> Path:
        return Path(self.root) / rel


def save_sweep_manifest(sweep: SweepManifest, path) -> None:
    header = {"schema": SWEEP_SCHEMA, "version": SCHEMA_VERSION, "source": sweep.source, "count": len(sweep.entries)}
    write_text(path, _dump_jsonl(header, [e.to_dict() for e in sweep.entries]))
    sweep.path = Path(path)


def load_sweep_manifest(path) -> SweepManifest:
    path = Path(path)
    header, records = _read_jsonl(path, SWEEP_SCHEMA)
    entries = []
    for lineno, obj in records:
        ratio = obj.get("ratio")
        if not isinstance(ratio, (int, float)) or isinstance(ratio, bool):
            raise ManifestError(f"{path}:{lineno}: field 'ratio' must be a number")
        entries.append(SweepEntry(
            name=_field(path, lineno, obj, "name"),
            kind=_field(path, lineno, obj, "kind"),
            ratio=float(ratio),
            manifest=_field(path, lineno, obj, "manifest"),
            status=obj.get("status", "ok"),
            error=obj.get("error"),
        ))
    return SweepManifest(entries, path.parent, source=header.get("source", ""), path=path)
