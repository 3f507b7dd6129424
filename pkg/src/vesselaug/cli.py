"""Command-line entry point: ``vesselaug {augment,tophat,jitter,eval,preview}``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 data-contract violation (bad ranges, shapes, single-class truth, ...).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import secrets
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from vesselaug import dataset_io, jitter, metrics
from vesselaug.augment import (
    DEFAULT_SEED,
    RNG_ALGORITHM,
    AugmentationConfig,
    CwrvaParams,
    RngStream,
    apply_pipeline,
    attention_map,
    cwrgc,
    cwrva,
    sample_cwrgc,
    vessel_map,
)
from vesselaug.image_core import DataContractError, quantize
from vesselaug.morphology import build_se_bank

log = logging.getLogger("vesselaug")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3
METRIC_COLUMNS = ("AUC", "ACC", "SP", "SE", "F1")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- configuration ------------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON config ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    allowed = {"seed", "threads", "augment", "threshold", "sweep"}
    unknown = set(cfg) - allowed
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return cfg


def _resolve(args) -> dict:
    """Merge defaults < config file < command-line flags."""
    cfg = _load_config(args.config)
    if args.entropy_seed:
        seed = secrets.randbits(63)
    elif args.seed is not None:
        seed = args.seed
    else:
        seed = cfg.get("seed", DEFAULT_SEED)
    threads = args.threads if args.threads is not None else cfg.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise UsageError(f"threads must be a positive integer, got {threads!r}")
    try:
        aug = AugmentationConfig.from_dict(cfg.get("augment", {}))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid augment config: {exc}") from None
    if getattr(args, "samples", None) is not None:
        aug.samples_per_image = args.samples
    threshold = getattr(args, "threshold", None)
    if threshold is None:
        threshold = cfg.get("threshold", metrics.DEFAULT_THRESHOLD)
    sweep_cfg = cfg.get("sweep", {})
    return {
        "command": args.command,
        "seed": int(seed),
        "rng": RNG_ALGORITHM,
        "threads": threads,
        "augment": aug.to_dict(),
        "threshold": float(threshold),
        "sweep": {
            "ratios": list(sweep_cfg.get("ratios", jitter.default_ratios())),
            "kinds": list(sweep_cfg.get("kinds", jitter.KINDS)),
        },
    }


def _write_resolved(resolved: dict, out: Path, extra: dict | None = None, name: str = "config.resolved.json") -> None:
    payload = dict(resolved, **(extra or {}))
    dataset_io.write_text(out / name, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    log.info("resolved config: %s", json.dumps(payload, sort_keys=True))


def _load_manifest_arg(path: str | None) -> dataset_io.DatasetManifest:
    if path is None:
        raise UsageError("--manifest is required")
    return dataset_io.load_manifest(path)


# -- augment --------------------------------------------------------------------


def cmd_augment(args) -> int:
    resolved = _resolve(args)
    aug = AugmentationConfig.from_dict(resolved["augment"])
    manifest = _load_manifest_arg(args.manifest)
    out = Path(args.out)
    root = RngStream(resolved["seed"])
    bank = build_se_bank(aug.num_angles, aug.length) if aug.cwrva else None

    def work(index_entry):
        index, e = index_entry
        img = dataset_io.load_image(manifest.resolve(e.image))
        names = [n for n in ("truth", "fov") if getattr(e, n)]
        masks = [dataset_io.load_binary_mask(manifest.resolve(getattr(e, n))) for n in names]
        samples = apply_pipeline(img, masks, aug, root.child(index), bank)
        rows = []
        for k, s in enumerate(samples):
            sid = f"{e.id}_aug{k}"
            entry = dataset_io.ManifestEntry(sid, f"images/{sid}.png")
            dataset_io.save_image(s.image, out / entry.image)
            for name, mask in zip(names, s.masks):
                rel = f"{name}/{sid}.png"
                dataset_io.save_binary_mask(mask, out / rel)
                setattr(entry, name, rel)
            rows.append((entry, {"id": sid, "source": e.id, "image_index": index, "sample": k, **s.params}))
        return rows

    jobs = list(enumerate(manifest.entries))
    with ThreadPoolExecutor(max_workers=resolved["threads"]) as pool:
        results = list(pool.map(work, jobs))

    entries, params = [], []
    for rows in results:
        for entry, p in rows:
            entries.append(entry)
            params.append(p)
    new = dataset_io.DatasetManifest(entries, out, meta={"augmented_from": str(manifest.path)})
    dataset_io.save_manifest(new, out / "manifest.jsonl")
    dataset_io.write_text(out / "params.jsonl", "".join(json.dumps(p, sort_keys=True) + "\n" for p in params))
    # thread count is deliberately not part of the tree: output bytes must not depend on it
    _write_resolved({k: v for k, v in resolved.items() if k != "threads"}, out)
    log.info("wrote %d samples to %s", len(entries), out)
    return EXIT_OK


# -- tophat ---------------------------------------------------------------------


def _image_sources(args) -> list[tuple[str, Path]]:
    sources = []
    if args.manifest:
        m = dataset_io.load_manifest(args.manifest)
        sources += [(e.id, m.resolve(e.image)) for e in m.entries]
    sources += [(Path(p).stem, Path(p)) for p in args.images]
    if not sources:
        raise UsageError("give --manifest or one or more image paths")
    return sources


def cmd_tophat(args) -> int:
    resolved = _resolve(args)
    aug = AugmentationConfig.from_dict(resolved["augment"])
    bank = build_se_bank(aug.num_angles, aug.length)
    out = Path(args.out)

    def work(item):
        sid, path = item
        vmap = vessel_map(dataset_io.load_image(path), bank, aug.source)
        dataset_io.save_gray(quantize(vmap), out / f"{sid}_tophat.png")

    with ThreadPoolExecutor(max_workers=resolved["threads"]) as pool:
        list(pool.map(work, _image_sources(args)))
    _write_resolved({k: v for k, v in resolved.items() if k != "threads"}, out)
    return EXIT_OK


# -- jitter ---------------------------------------------------------------------


def cmd_jitter(args) -> int:
    resolved = _resolve(args)
    manifest = _load_manifest_arg(args.manifest)
    out = Path(args.out)
    if args.sweep:
        if args.kind or args.ratio is not None:
            raise UsageError("--sweep cannot be combined with --kind/--ratio")
        try:
            spec = jitter.SweepSpec(ratios=resolved["sweep"]["ratios"], kinds=tuple(resolved["sweep"]["kinds"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        sweep = jitter.generate_sweep(manifest, spec, out)
        _write_resolved(resolved, out)
        failed = [e.name for e in sweep.entries if e.status != "ok"]
        if failed:
            log.error("%d sweep datasets failed: %s", len(failed), ", ".join(failed))
            return EXIT_IO
        log.info("wrote %d datasets to %s", len(sweep.entries), out)
        return EXIT_OK
    if not args.kind or args.ratio is None:
        raise UsageError("give --kind and --ratio, or --sweep")
    if not -1.0 <= args.ratio <= 1.0:
        raise UsageError(f"--ratio must lie in [-1, 1], got {args.ratio}")
    jitter.jitter_dataset(manifest, args.kind, args.ratio, out)
    _write_resolved(resolved, out, {"kind": args.kind, "ratio": args.ratio})
    return EXIT_OK


# -- eval -----------------------------------------------------------------------


def _pairs(pred: dataset_io.DatasetManifest, truth: dataset_io.DatasetManifest) -> list[metrics.EvalPair]:
    pred_ids, truth_map = pred.by_id(), truth.by_id()
    problems = [f"prediction {i!r} has no truth entry" for i in pred_ids if i not in truth_map]
    problems += [f"truth {i!r} has no prediction entry" for i in truth_map if i not in pred_ids]
    problems += [f"truth entry {i!r} has no truth path" for i, e in truth_map.items() if i in pred_ids and not e.truth]
    if problems:
        for p in problems:
            log.error(p)
        raise DataContractError(f"{len(problems)} id mismatches between prediction and truth manifests")
    pairs = []
    for i, e in pred_ids.items():
        t = truth_map[i]
        pairs.append(metrics.EvalPair(
            prediction=dataset_io.load_probability_map(pred.resolve(e.image)),
            truth=dataset_io.load_binary_mask(truth.resolve(t.truth)),
            fov=dataset_io.load_binary_mask(truth.resolve(t.fov)) if t.fov else None,
            id=i,
        ))
    return pairs


def _fmt(v: float) -> str:
    return "undefined" if isinstance(v, float) and math.isnan(v) else f"{v:.6f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def metrics_table(report: metrics.DatasetReport) -> str:
    header = ["id", *METRIC_COLUMNS, "tp", "fp", "tn", "fn"]
    rows = []
    for r in [*report.per_image, report.pooled]:
        c = r.counts
        rows.append([r.id, *(_fmt(v) for v in r.row().values()), c.tp, c.fp, c.tn, c.fn])
    mean = report.mean()
    rows.append(["mean", *(_fmt(mean[k]) for k in METRIC_COLUMNS), "", "", "", ""])
    return _csv(header, rows)


def roc_table(report: metrics.MetricsReport) -> str:
    return _csv(["fpr", "tpr"], [[repr(float(f)), repr(float(t))] for f, t in report.roc])


def cmd_eval(args) -> int:
    resolved = _resolve(args)
    out = Path(args.out)
    threshold = resolved["threshold"]
    if not 0.0 <= threshold <= 1.0:
        raise UsageError(f"--threshold must lie in [0, 1], got {threshold}")
    if bool(args.manifest) == bool(args.sweep):
        raise UsageError("give exactly one of --manifest or --sweep")

    if args.manifest:
        pred = dataset_io.load_manifest(args.manifest)
        truth = dataset_io.load_manifest(args.truth) if args.truth else pred
        report = metrics.evaluate_dataset(_pairs(pred, truth), threshold)
        dataset_io.write_text(out / "metrics.csv", metrics_table(report))
        dataset_io.write_text(out / "roc.csv", roc_table(report.pooled))
        _write_resolved(resolved, out)
        print(" & ".join(METRIC_COLUMNS))
        print(" & ".join(f"{v:.4f}" for v in report.pooled.row().values()))
        return EXIT_OK

    if not args.truth:
        raise UsageError("--sweep evaluation needs --truth")
    sweep = dataset_io.load_sweep_manifest(args.sweep)
    truth = dataset_io.load_manifest(args.truth)
    rows = []
    for e in sweep.entries:
        pred = dataset_io.load_manifest(sweep.resolve(e.manifest))
        report = metrics.evaluate_dataset(_pairs(pred, truth), threshold)
        rows.append([e.kind, e.ratio, *(_fmt(v) for v in report.pooled.row().values())])
        dataset_io.write_text(out / e.name / "metrics.csv", metrics_table(report))
    rows.sort(key=lambda r: (r[0], r[1]))
    dataset_io.write_text(out / "curves.csv", _csv(["kind", "ratio", *METRIC_COLUMNS], rows))
    _write_resolved(resolved, out)
    return EXIT_OK


# -- preview --------------------------------------------------------------------


def preview_montage(img: np.ndarray, aug: AugmentationConfig, rng: RngStream) -> np.ndarray:
    """Four panels side by side: input, CWRGC, vessel map, CWRGC + CWRVA."""
    bank = build_se_bank(aug.num_angles, aug.length)
    gamma = sample_cwrgc(rng.child(0), *aug.cwrgc_range, aug.gamma_sampling)
    toned = cwrgc(img, gamma)
    sub = rng.child(1)
    lam = sub.uniform(*aug.lambda_range, 3)
    disturb = float(sub.uniform(*aug.disturb_range))
    p = CwrvaParams(tuple(float(v) for v in lam), disturb, aug.num_angles, aug.length, aug.source)
    vmap = quantize(vessel_map(toned, bank, aug.source))
    both = quantize(cwrva(toned, attention_map(toned, p, bank), disturb))
    panels = [img, quantize(toned), np.repeat(vmap[..., None], 3, axis=2), both]
    return np.concatenate(panels, axis=1)


def cmd_preview(args) -> int:
    resolved = _resolve(args)
    aug = AugmentationConfig.from_dict(resolved["augment"])
    img = dataset_io.load_image(args.image)
    montage = preview_montage(img, aug, RngStream(resolved["seed"]))
    out = Path(args.out)
    dataset_io.save_image(montage, out)
    _write_resolved({k: v for k, v in resolved.items() if k != "threads"}, out.parent,
                    {"image": str(args.image)}, name=f"{out.stem}.resolved.json")
    log.info("preview seed %d written to %s", resolved["seed"], out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file (seed, threads, augment, threshold, sweep)")
    seed = common.add_mutually_exclusive_group()
    seed.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")
    seed.add_argument("--entropy-seed", action="store_true", help="draw a fresh seed from the OS and log it")
    common.add_argument("--threads", type=int, help="worker threads (output does not depend on it)")
    common.add_argument("--out", required=True, help="output directory (file for preview)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="vesselaug", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", parents=[common], help="write augmented copies of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--samples", type=int, help="augmented samples per input image")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("tophat", parents=[common], help="write normalized multi-angle top-hat vessel maps")
    p.add_argument("--manifest")
    p.add_argument("images", nargs="*")
    p.set_defaults(func=cmd_tophat)

    p = sub.add_parser("jitter", parents=[common], help="brightness/contrast/saturation jitter or the full sweep")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=jitter.KINDS)
    p.add_argument("--ratio", type=float)
    p.add_argument("--sweep", action="store_true", help="write all (kind, ratio) datasets")
    p.set_defaults(func=cmd_jitter)

    p = sub.add_parser("eval", parents=[common], help="AUC/ACC/SP/SE/F1 of probability maps")
    p.add_argument("--manifest", help="prediction manifest (image = probability map)")
    p.add_argument("--sweep", help="sweep manifest whose datasets hold prediction manifests")
    p.add_argument("--truth", help="manifest with truth (and optional fov) paths; defaults to --manifest")
    p.add_argument("--threshold", type=float, help="binarization threshold (default 0.5)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("preview", parents=[common], help="montage: input | CWRGC | vessel map | CWRGC+CWRVA")
    p.add_argument("image")
    p.set_defaults(func=cmd_preview)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vesselaug: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataContractError as exc:
        print(f"vesselaug: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"vesselaug: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"vesselaug: invalid value: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
