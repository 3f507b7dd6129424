"""Seeded retinal-image augmentation, robustness jitter and segmentation metrics."""

from vesselaug.augment import (
    AugmentationConfig,
    CwrgcParams,
    CwrvaParams,
    RngStream,
    apply_pipeline,
    attention_map,
    cwrgc,
    cwrva,
    random_flips,
    rgn,
    sample_cwrgc,
    svgc,
    vessel_map,
)
from vesselaug.image_core import DataContractError, as_float, clamp01, mean_gray, quantize, rgb_to_gray
from vesselaug.jitter import SweepSpec, brightness, contrast, generate_sweep, saturation
from vesselaug.metrics import EvalPair, binary_metrics, confusion_at_threshold, evaluate_dataset, roc_auc
from vesselaug.morphology import build_se_bank, normalize_minmax, top_hat, top_hat_sum

__version__ = "0.1.0"
