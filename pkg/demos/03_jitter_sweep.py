"""
Robustness sweep with brightness, contrast and saturation jitter
================================================================

To test how a segmenter copes with tonal shifts, perturb the test set
with each jitter at ratios -0.5 .. 0.5 (step 0.1, identity left out) and
evaluate on every copy. That gives 3 kinds x 10 ratios = 30 datasets.

Run: ``python demos/03_jitter_sweep.py [out_dir]``
"""

import sys
from pathlib import Path

from vesselaug import dataset_io
from vesselaug.image_core import mean_gray
from vesselaug.jitter import SweepSpec, generate_sweep, jitter
from vesselaug.synthetic import synthetic_fundus

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "03"

# %%
# What one jitter does to the mean gray level.
img = synthetic_fundus(96, seed=1).image
print(f"input mean gray {mean_gray(img):.4f}")
for kind in ("brightness", "contrast", "saturation"):
    row = [f"{mean_gray(jitter(img, kind, r)):.4f}" for r in (-0.5, 0.5)]
    print(f"{kind:>10}: -0.5 -> {row[0]}   +0.5 -> {row[1]}")

# %%
# A small test set on disk, then the full sweep.
entries = []
for i in range(3):
    f = synthetic_fundus(64, seed=20 + i)
    sid = f"{i + 1:02d}"
    dataset_io.save_image(f.image, out / "test" / "images" / f"{sid}.png")
    dataset_io.save_binary_mask(f.truth, out / "test" / "truth" / f"{sid}.png")
    dataset_io.save_binary_mask(f.fov, out / "test" / "fov" / f"{sid}.png")
    entries.append(dataset_io.ManifestEntry(sid, f"images/{sid}.png", f"truth/{sid}.png", f"fov/{sid}.png"))
manifest = dataset_io.DatasetManifest(entries, out / "test")
dataset_io.save_manifest(manifest, out / "test" / "manifest.jsonl")

sweep = generate_sweep(manifest, SweepSpec(), out / "sweep")
print(len(sweep.entries), "datasets:", ", ".join(e.name for e in sweep.entries[:4]), "...")
