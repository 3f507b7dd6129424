"""Pixelwise segmentation metrics: ACC, SP, SE, F1 and exact ROC AUC.

AUC is the Mann-Whitney statistic: the probability that a random vessel
pixel scores above a random background pixel, ties counting one half. It
is computed from tie-grouped counts in integer arithmetic, so the only
rounding is the final division.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from vesselaug.image_core import DataContractError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


class SingleClassError(DataContractError):
    pass


@dataclass
class EvalPair:
    prediction: np.ndarray
    truth: np.ndarray
    fov: np.ndarray | None = None
    id: str = ""

    def __post_init__(self):
        self.prediction = np.asarray(self.prediction, dtype=np.float64)
        self.truth = _as_binary(self.truth, "truth")
        if self.fov is not None:
            self.fov = _as_binary(self.fov, "fov mask")
        shapes = {self.prediction.shape, self.truth.shape} | ({self.fov.shape} if self.fov is not None else set())
        if len(shapes) != 1:
            raise DataContractError(f"{self.id or 'pair'}: shape mismatch between prediction, truth and mask: {sorted(shapes)}")
        if not np.isfinite(self.prediction).all():
            raise DataContractError(f"{self.id or 'pair'}: prediction contains NaN or infinite values")
        if self.prediction.size and (self.prediction.min() < 0.0 or self.prediction.max() > 1.0):
            raise DataContractError(f"{self.id or 'pair'}: prediction values must lie in [0, 1]")

    def scores_and_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened in-mask scores and boolean labels."""
        if self.fov is None:
            return self.prediction.ravel(), self.truth.ravel()
        return self.prediction[self.fov], self.truth[self.fov]


def _as_binary(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype == bool:
        return a
    if not np.isin(a, (0, 1)).all():
        raise DataContractError(f"{name} must be strictly binary (0/1)")
    return a.astype(bool)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def confusion_from_arrays(scores: np.ndarray, labels: np.ndarray, threshold: float) -> ConfusionCounts:
    pred = scores >= threshold
    tp = int(np.count_nonzero(pred & labels))
    fp = int(np.count_nonzero(pred & ~labels))
    fn = int(np.count_nonzero(~pred & labels))
    tn = int(labels.size - tp - fp - fn)
    return ConfusionCounts(tp, fp, tn, fn)


def confusion_at_threshold(pair: EvalPair, threshold: float = DEFAULT_THRESHOLD) -> ConfusionCounts:
    """Scores ``>= threshold`` count as vessel; only in-mask pixels are counted."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return confusion_from_arrays(*pair.scores_and_labels(), threshold)


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def binary_metrics(counts: ConfusionCounts) -> dict[str, float]:
    """ACC, SP, SE and F1. A 0/0 ratio comes back as NaN (see :func:`undefined_metrics`)."""
    if counts.total == 0:
        raise DataContractError("no evaluated pixels")
    c = counts
    return {
        "acc": (c.tp + c.tn) / c.total,
        "sp": _ratio(c.tn, c.tn + c.fp),
        "se": _ratio(c.tp, c.tp + c.fn),
        "f1": _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
    }


def undefined_metrics(values: dict[str, float]) -> list[str]:
    return [k for k, v in values.items() if isinstance(v, float) and math.isnan(v)]


def roc_from_arrays(scores: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact AUC and ROC vertices ``(fpr, tpr)`` from ``(0, 0)`` to ``(1, 1)``."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    n_pos = int(np.count_nonzero(labels))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        which = "positive" if n_pos == 0 else "negative"
        raise SingleClassError(f"AUC is undefined: ground truth has no {which} pixels inside the evaluation mask")

    # descending score; each run of equal scores is one threshold
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    boundaries = np.flatnonzero(np.diff(s)) + 1
    starts = np.concatenate(([0], boundaries))
    pos_in = np.add.reduceat(lab.astype(np.int64), starts)
    neg_in = np.add.reduceat((~lab).astype(np.int64), starts)
    pos_above = np.concatenate(([0], np.cumsum(pos_in)[:-1]))

    # twice the Mann-Whitney U, in integers: each negative counts the
    # positives scored above it plus half of those tied with it
    twice_u = int(np.sum(neg_in * (2 * pos_above + pos_in), dtype=np.int64))
    auc = twice_u / (2 * n_pos * n_neg)

    tpr = np.concatenate(([0], np.cumsum(pos_in))) / n_pos
    fpr = np.concatenate(([0], np.cumsum(neg_in))) / n_neg
    return auc, np.column_stack([fpr, tpr])


def roc_auc(pair: EvalPair) -> tuple[float, np.ndarray]:
    return roc_from_arrays(*pair.scores_and_labels())


@dataclass
class MetricsReport:
    auc: float
    acc: float
    sp: float
    se: float
    f1: float
    threshold: float
    counts: ConfusionCounts
    roc: np.ndarray
    undefined: list[str] = field(default_factory=list)
    id: str = ""

    @property
    def n_pixels(self) -> int:
        return self.counts.total

    def row(self) -> dict[str, float]:
        return {"AUC": self.auc, "ACC": self.acc, "SP": self.sp, "SE": self.se, "F1": self.f1}


def _report(scores, labels, threshold: float, id: str = "") -> MetricsReport:
    counts = confusion_from_arrays(scores, labels, threshold)
    values = binary_metrics(counts)
    auc, roc = roc_from_arrays(scores, labels)
    return MetricsReport(auc=auc, threshold=threshold, counts=counts, roc=roc,
                         undefined=undefined_metrics(values), id=id, **values)


def evaluate_pair(pair: EvalPair, threshold: float = DEFAULT_THRESHOLD) -> MetricsReport:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return _report(*pair.scores_and_labels(), threshold, pair.id)


@dataclass
class DatasetReport:
    pooled: MetricsReport
    per_image: list[MetricsReport]

    def mean(self) -> dict[str, float]:
        """Per-image average of each metric, skipping images where it is undefined."""
        out = {}
        for key in ("AUC", "ACC", "SP", "SE", "F1"):
            vals = [r.row()[key] for r in self.per_image if not math.isnan(r.row()[key])]
            out[key] = float(np.mean(vals)) if vals else math.nan
        return out


def evaluate_dataset(pairs: list[EvalPair], threshold: float = DEFAULT_THRESHOLD) -> DatasetReport:
    """Pool every in-mask pixel of every pair and score once; also score each pair.

    A pair with single-class truth gets no per-image report (its AUC is
    undefined) but still contributes its pixels to the pooled one.
    """
    if not pairs:
        raise ValueError("evaluate_dataset needs at least one pair")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    gathered = [p.scores_and_labels() for p in pairs]
    scores = np.concatenate([g[0] for g in gathered])
    labels = np.concatenate([g[1] for g in gathered])
    pooled = _report(scores, labels, threshold, "pooled")
    per_image = []
    for p, (s, lab) in zip(pairs, gathered):
        try:
            per_image.append(_report(s, lab, threshold, p.id))
        except SingleClassError as exc:
            log.warning("%s: no per-image report (%s)", p.id or "pair", exc)
    return DatasetReport(pooled, per_image)
