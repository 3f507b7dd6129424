"""Acceptance criteria 1-10, one test each.

The terminal summary prints one ``criterion N PASS|FAIL`` line per test
(see ``conftest.py``). Tolerances and sizes are the contractual ones; do
not relax them here.
"""

import filecmp
import math
import time

import numpy as np
import pytest

from conftest import write_toy_dataset
from oracles import (
    naive_dilate,
    naive_erode,
    naive_open,
    naive_top_hat,
    naive_top_hat_sum,
    pairwise_auc,
)
from vesselaug import dataset_io
from vesselaug.augment import (
    AugmentationConfig,
    CwrgcParams,
    CwrvaParams,
    RngStream,
    attention_map,
    augment_once,
    cwrgc,
    cwrva,
    rgn,
)
from vesselaug.cli import main
from vesselaug.image_core import DataContractError, as_float, flip_horizontal, flip_vertical, quantize
from vesselaug.jitter import KINDS, SweepSpec, dataset_name, default_ratios, generate_sweep, jitter
from vesselaug.metrics import EvalPair, evaluate_pair, roc_from_arrays
from vesselaug.morphology import build_se_bank, dilate, erode, opening, top_hat, top_hat_sum
from vesselaug.synthetic import synthetic_fundus

pytestmark = pytest.mark.slow


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.criterion(1, "morphology matches the naive oracle bit for bit (100 images, < 10 s)")
def test_c01_morphology_oracle():
    rng = np.random.default_rng(1)
    banks = {(n, L): build_se_bank(n, L) for n in (1, 2, 4, 12) for L in (3, 5, 7)}
    keys = list(banks)
    elapsed = 0.0
    for i in range(100):
        h, w = (int(v) for v in rng.integers(1, 33, 2))
        # alternate continuous and heavily tied planes so min/max ties are exercised
        p = rng.random((h, w)) if i % 2 else rng.integers(0, 4, (h, w)) / 3
        bank = banks[keys[i % len(keys)]]
        t0 = time.perf_counter()
        got = [(erode(p, se), dilate(p, se), opening(p, se), top_hat(p, se)) for se in bank]
        got_sum = top_hat_sum(p, bank)
        elapsed += time.perf_counter() - t0
        for se, (e, d, o, th) in zip(bank, got):
            assert np.array_equal(e, naive_erode(p, se))
            assert np.array_equal(d, naive_dilate(p, se))
            assert np.array_equal(o, naive_open(p, se))
            assert np.array_equal(th, naive_top_hat(p, se))
        assert np.array_equal(got_sum, naive_top_hat_sum(p, bank))
    print(f"criterion 1: implementation time {elapsed:.3f} s")
    assert elapsed < 10.0


@pytest.mark.criterion(2, "top-hat >= 0 and opening idempotent on 1000 planes")
def test_c02_top_hat_contract():
    rng = np.random.default_rng(2)
    banks = [build_se_bank(12, L) for L in (3, 5, 7, 9, 15)]
    violations = 0
    for i in range(1000):
        h, w = (int(v) for v in rng.integers(1, 41, 2))
        p = rng.random((h, w)) if i % 2 else np.round(rng.normal(size=(h, w)), 1)
        for se in banks[i % len(banks)]:
            o = opening(p, se)
            violations += int(np.count_nonzero(top_hat(p, se) < 0))
            violations += int(not np.array_equal(opening(o, se), o))
    assert violations == 0


@pytest.mark.criterion(3, "sort-based AUC equals pairwise oracle within 1e-12; constant gives 0.5")
def test_c03_auc_exactness():
    rng = np.random.default_rng(3)
    n = 10_000
    worst = 0.0
    for i in range(100):
        labels = rng.random(n) < rng.uniform(0.05, 0.5)
        scores = rng.random(n)
        # a random share of at least 30% of pixels is snapped to a coarse grid
        tied = rng.random(n) < rng.uniform(0.3, 1.0)
        scores[tied] = np.round(scores[tied] * rng.integers(1, 50)) / 50
        _, counts = np.unique(scores, return_counts=True)
        assert counts[counts > 1].sum() >= 0.3 * n
        auc, _ = roc_from_arrays(scores, labels)
        worst = max(worst, abs(auc - pairwise_auc(scores, labels)))
        if i < 10:
            assert roc_from_arrays(np.full(n, scores[0]), labels)[0] == 0.5
    print(f"criterion 3: max |AUC - oracle| = {worst:.3e}")
    assert worst <= 1e-12


@pytest.mark.criterion(4, "4-pixel fixture gives AUC = ACC = SP = SE = F1 = 0.5 exactly")
def test_c04_metric_fixture():
    r = evaluate_pair(EvalPair(np.array([0.9, 0.4, 0.35, 0.8]), np.array([1, 0, 1, 0])), 0.5)
    assert (r.auc, r.acc, r.sp, r.se, r.f1) == (0.5, 0.5, 0.5, 0.5, 0.5)


@pytest.mark.criterion(5, "identity endpoints are byte-identical on a DRIVE-sized fundus image")
def test_c05_identity_endpoints(tmp_path):
    f = synthetic_fundus(584, seed=5)
    dataset_io.save_image(f.image, tmp_path / "drive.png")
    img = dataset_io.load_image(tmp_path / "drive.png")
    checks = {
        "cwrgc gamma=1": quantize(cwrgc(img, CwrgcParams((1.0, 1.0, 1.0)))),
        "cwrva lambda=0": quantize(cwrva(img, attention_map(img, CwrvaParams((0.0, 0.0, 0.0), 0.7)), 0.7)),
        "rgn sigma=0": quantize(rgn(img, RngStream(0), 0.0)),
    }
    for kind in KINDS:
        checks[f"{kind} 0"] = quantize(jitter(img, kind, 0.0))
    off = AugmentationConfig(flips=False, rgn=False, svgc=False, cwrgc=False, cwrva=False)
    checks["pipeline disabled"] = augment_once(img, [f.truth], off, RngStream(0)).image
    for name, out in checks.items():
        assert out.dtype == np.uint8 and out.tobytes() == img.tobytes(), name


@pytest.mark.criterion(6, "10^5 randomized pipeline applications stay in range with no NaN/inf")
def test_c06_range_safety():
    rng = np.random.default_rng(6)
    banks = {(n, L): build_se_bank(n, L) for n in (1, 4) for L in (3, 5)}
    bad = 0
    configs = []
    for k in range(64):
        n, L = list(banks)[k % len(banks)]
        lo = float(rng.uniform(0.05, 1.0))
        configs.append(AugmentationConfig(
            flips=True, rgn=True, rgn_sigma=float(rng.uniform(0, 0.5)), svgc=True,
            svgc_range=(lo, lo * float(rng.uniform(1, 30))), cwrgc=True,
            cwrgc_range=(lo, lo * float(rng.uniform(1, 30))), cwrva=True,
            gamma_sampling="log-uniform" if k % 2 else "uniform", num_angles=n, length=L,
            source="inverted-green" if k % 3 else "inverted-gray",
        ))
    pool = [rng.integers(0, 256, (6, 6, 3)).astype(np.uint8) for _ in range(32)]
    pool += [np.zeros((6, 6, 3), np.uint8), np.full((6, 6, 3), 255, np.uint8)]
    root = RngStream(6)
    for i in range(100_000):
        cfg = configs[i % len(configs)]
        img = pool[i % len(pool)]
        # every stage ends in clamp01 and the sample in quantize; both raise on
        # NaN/inf or out-of-range values, so a violation surfaces as an error
        try:
            out = augment_once(img, [], cfg, root.child(i), banks[(cfg.num_angles, cfg.length)]).image
        except DataContractError:
            bad += 1
            continue
        bad += int(out.dtype != np.uint8 or out.shape != img.shape)
    print(f"criterion 6: {bad} violations in 100000 applications")
    assert bad == 0


@pytest.mark.criterion(7, "default sweep on 3 images: 30 named datasets, masks byte-identical, ratio 0 copies")
def test_c07_sweep(tmp_path):
    toy = write_toy_dataset(tmp_path / "toy", n=3, size=40)
    src = dataset_io.load_manifest(toy)
    sweep = generate_sweep(src, SweepSpec(), tmp_path / "sweep")
    expected = [dataset_name(k, r) for k in KINDS for r in default_ratios()]
    assert len(sweep.entries) == 30 and [e.name for e in sweep.entries] == expected
    assert sorted(p.name for p in (tmp_path / "sweep").iterdir() if p.is_dir()) == sorted(expected)
    assert all(e.status == "ok" for e in sweep.entries)
    for e in sweep.entries:
        ds = dataset_io.load_manifest(sweep.resolve(e.manifest))
        assert len(ds.entries) == 3
        for a, b in zip(src.entries, ds.entries):
            assert filecmp.cmp(src.resolve(a.truth), ds.resolve(b.truth), shallow=False)
            assert filecmp.cmp(src.resolve(a.fov), ds.resolve(b.fov), shallow=False)
            img = dataset_io.load_image(ds.resolve(b.image))
            assert img.dtype == np.uint8 and img.shape == (40, 40, 3)
    zero = generate_sweep(src, SweepSpec(ratios=[0.0]), tmp_path / "zero")
    for e in zero.entries:
        ds = dataset_io.load_manifest(zero.resolve(e.manifest))
        for a, b in zip(src.entries, ds.entries):
            for x, y in [(a.image, b.image), (a.truth, b.truth), (a.fov, b.fov)]:
                assert filecmp.cmp(src.resolve(x), ds.resolve(y), shallow=False)


@pytest.mark.criterion(8, "augment with seed 42 is byte-identical across runs and at 1 vs 8 threads")
def test_c08_determinism(tmp_path):
    toy = write_toy_dataset(tmp_path / "toy", n=3, size=64)
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"augment": {"rgn": true, "svgc": true, "samples_per_image": 3}}')
    trees = []
    for name, threads in [("run1", 1), ("run2", 1), ("run8", 8)]:
        out = tmp_path / name
        code = main(["augment", "--manifest", str(toy), "--out", str(out), "--seed", "42",
                     "--threads", str(threads), "--config", str(cfg)])
        assert code == 0
        trees.append(tree_bytes(out))
    assert len(trees[0]) == 3 * 3 * 3 + 3
    assert trees[0] == trees[1] == trees[2]


@pytest.mark.criterion(9, "flips move image and masks together; photometric stages leave masks alone (1000 draws)")
def test_c09_mask_correspondence():
    h, w, y0, x0 = 13, 17, 3, 5
    img = np.full((h, w, 3), 128, np.uint8)
    img[y0, x0] = (255, 0, 255)
    truth = np.zeros((h, w), bool)
    truth[y0, x0] = True
    fov = np.ones((h, w), bool)
    fov[0, :] = False
    full = AugmentationConfig(rgn=True, svgc=True, num_angles=4, length=5)
    geometric = AugmentationConfig(flips=True, cwrgc=False, cwrva=False)
    seen = set()
    for k in range(1000):
        rng = RngStream(9).child(k)
        a = augment_once(img, [truth, fov], full, rng)
        g = augment_once(img, [truth, fov], geometric, RngStream(9).child(k))
        dec = (a.params["flips"]["horizontal"], a.params["flips"]["vertical"])
        seen.add(dec)
        expect_t, expect_f = truth, fov
        if dec[0]:
            expect_t, expect_f = flip_horizontal(expect_t), flip_horizontal(expect_f)
        if dec[1]:
            expect_t, expect_f = flip_vertical(expect_t), flip_vertical(expect_f)
        # photometric stages: masks equal the geometric-only run and the expected flip
        assert np.array_equal(a.masks[0], expect_t) and np.array_equal(a.masks[1], expect_f)
        assert np.array_equal(a.masks[0], g.masks[0]) and np.array_equal(a.masks[1], g.masks[1])
        # geometric stage: the marked image pixel sits under the marked mask pixel
        ys, xs = np.nonzero(g.masks[0])
        assert (len(ys), tuple(g.image[ys[0], xs[0]])) == (1, (255, 0, 255))
        assert np.count_nonzero(np.all(g.image == (255, 0, 255), axis=-1)) == 1
    assert seen == {(False, False), (True, False), (False, True), (True, True)}


@pytest.mark.criterion(10, "640x640 image through the 12-angle, length-15 pipeline in < 2 s")
def test_c10_performance():
    img = synthetic_fundus(640, seed=10).image
    cfg = AugmentationConfig()
    assert (cfg.num_angles, cfg.length) == (12, 15)
    t0 = time.perf_counter()
    out = augment_once(img, [], cfg, RngStream(10))
    elapsed = time.perf_counter() - t0
    print(f"criterion 10: {elapsed:.3f} s")
    assert out.image.shape == (640, 640, 3)
    assert elapsed < 2.0


def test_quantized_endpoints_helper_is_exact():
    # guards criterion 5: the float path of a uint8 image quantizes back exactly
    s = np.arange(256, dtype=np.uint8).reshape(16, 16, 1).repeat(3, axis=2)
    assert quantize(as_float(s)).tobytes() == s.tobytes()
    assert math.isclose(float(as_float(s).max()), 1.0)
