"""The full prediction path: calibrate, segment, mask, features, regress,
classify. One code path feeds the CLI and the HTTP service, so the two
surfaces return identical numbers by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .calibration import apply_gains, compute_gains
from .errors import PallorError
from .features import MIN_MASK_AREA, extract_features
from .imaging import BinaryMask, RgbImage, Roi, crop, mask_to_rle
from .nn import Network
from .screening import (
    DEFAULT_CUTOFFS,
    RegressorModel,
    classify,
    format_cutoff,
    predict_hb,
)
from .segmentation import ClassicalParams, classical_segment, cnn_segment, to_mask

__all__ = ["PredictOutcome", "run_predict", "predict_response_dict"]


@dataclass(frozen=True)
class PredictOutcome:
    gains: tuple[float, float, float]
    features: object
    prediction: object
    decisions: dict[float, bool]
    mask: BinaryMask
    timings_ms: dict[str, float]


def _segment_region(
    image: RgbImage,
    segmenter: str,
    segmenter_net: Network | None,
    classical_params: ClassicalParams,
    conjunctiva_roi: Roi | None,
) -> tuple[BinaryMask, dict]:
    region = image if conjunctiva_roi is None else crop(image, conjunctiva_roi)
    t0 = time.perf_counter()
    if segmenter == "classical":
        soft = classical_segment(region, classical_params)
    elif segmenter == "cnn":
        if segmenter_net is None:
            raise PallorError("cnn segmenter requested but no segmenter weights loaded")
        soft = cnn_segment(region, segmenter_net)
    else:
        raise ValueError(f"segmenter must be 'classical' or 'cnn', got {segmenter!r}")
    t1 = time.perf_counter()
    mask, _hist = to_mask(soft)
    t2 = time.perf_counter()
    if conjunctiva_roi is not None:
        bits = np.zeros((image.height, image.width), dtype=bool)
        bits[
            conjunctiva_roi.y : conjunctiva_roi.y + conjunctiva_roi.h,
            conjunctiva_roi.x : conjunctiva_roi.x + conjunctiva_roi.w,
        ] = mask.bits
        mask = BinaryMask(bits)
    timings = {"segmentation": (t1 - t0) * 1e3, "mask": (t2 - t1) * 1e3}
    return mask, timings


def run_predict(
    image: RgbImage,
    card_roi: Roi,
    regressor: RegressorModel,
    segmenter: str = "cnn",
    segmenter_net: Network | None = None,
    conjunctiva_roi: Roi | None = None,
    cutoffs: tuple[float, ...] = DEFAULT_CUTOFFS,
    classical_params: ClassicalParams = ClassicalParams(),
    min_area: int = MIN_MASK_AREA,
) -> PredictOutcome:
    """Run the whole screening pipeline on one image.

    Raises the owning module's domain error when a stage rejects its input
    (ROI out of bounds, white square not white, mask too small, ...).
    """
    card_roi.check_within(image.width, image.height)
    if conjunctiva_roi is not None:
        conjunctiva_roi.check_within(image.width, image.height)

    start = time.perf_counter()
    gains = compute_gains(image, card_roi)
    calibrated = apply_gains(image, gains)
    t_cal = time.perf_counter()

    mask, seg_timings = _segment_region(
        calibrated, segmenter, segmenter_net, classical_params, conjunctiva_roi
    )
    t_seg = time.perf_counter()

    features = extract_features(calibrated, mask, min_area=min_area)
    t_feat = time.perf_counter()

    prediction = predict_hb(regressor, features)
    t_reg = time.perf_counter()

    decisions = {c: classify(prediction, c).anemic for c in cutoffs}
    timings = {
        "calibration": (t_cal - start) * 1e3,
        **seg_timings,
        "features": (t_feat - t_seg) * 1e3,
        "regression": (t_reg - t_feat) * 1e3,
        "total": (time.perf_counter() - start) * 1e3,
    }
    return PredictOutcome(
        gains=gains.gains,
        features=features,
        prediction=prediction,
        decisions=decisions,
        mask=mask,
        timings_ms=timings,
    )


def predict_response_dict(outcome: PredictOutcome) -> dict:
    """The PredictResponse wire object shared by the CLI and the service."""
    pred = outcome.prediction
    return {
        "gains": {
            "r": outcome.gains[0],
            "g": outcome.gains[1],
            "b": outcome.gains[2],
        },
        "features": outcome.features.as_dict(),
        "hb": pred.hb,
        "hb_clamped": pred.clamped,
        "decisions": {format_cutoff(c): bool(v) for c, v in outcome.decisions.items()},
        "mask_rle": mask_to_rle(outcome.mask),
        "model_id": pred.model_id,
        "timings": outcome.timings_ms,
    }
