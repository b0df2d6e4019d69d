"""Hemoglobin regression and anemia screening metrics.

The regressor maps (mean_r, mean_g, ei) to hemoglobin in g/dL. Inputs are
standardized per feature with constants learned on the training split and
stored in the weights file. Predictions are clamped to the physiological
reporting range [3, 20] g/dL, with a flag when clamping fired.

Classification uses strict ``hb < cutoff`` (the conventional "below
threshold" reading) and anemia is the positive class throughout. Rates with
a zero denominator are reported as undefined (``None``), never as zero:
a silent zero would corrupt any dashboard averaging them.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError
from .features import FeatureVector
from .imaging import Roi
from .nn import (
    Dense,
    Network,
    NetworkSpec,
    Relu,
    Standardization,
    TrainingConfig,
    forward,
    init_network,
    load_weights,
    save_weights,
    train,
)

__all__ = [
    "HB_REPORT_RANGE",
    "DEFAULT_CUTOFFS",
    "HbPrediction",
    "CutoffDecision",
    "ScreeningMetrics",
    "RegressorModel",
    "default_regressor_spec",
    "train_regressor",
    "predict_hb",
    "classify",
    "evaluate",
    "render_report",
    "metrics_to_dict",
    "save_regressor",
    "load_regressor",
    "ManifestRow",
    "read_manifest",
    "format_cutoff",
]

HB_REPORT_RANGE = (3.0, 20.0)
DEFAULT_CUTOFFS = (9.0, 10.0, 11.0)


@dataclass(frozen=True)
class HbPrediction:
    hb: float  # g/dL, clamped to HB_REPORT_RANGE
    clamped: bool
    features: FeatureVector
    model_id: str | None


@dataclass(frozen=True)
class CutoffDecision:
    cutoff: float
    anemic: bool


@dataclass(frozen=True)
class ScreeningMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float | None
    sensitivity: float | None
    specificity: float | None

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "ScreeningMetrics":
        def rate(num: int, den: int) -> float | None:
            return None if den == 0 else 100.0 * num / den

        return cls(
            tp=tp,
            fp=fp,
            tn=tn,
            fn=fn,
            accuracy=rate(tp + tn, tp + fp + tn + fn),
            sensitivity=rate(tp, tp + fn),
            specificity=rate(tn, tn + fp),
        )


@dataclass(frozen=True)
class RegressorModel:
    net: Network
    standardization: Standardization
    model_id: str | None = None


def default_regressor_spec(seed: int = 0) -> NetworkSpec:
    """Smallest network that fits a smooth monotone map from the three
    color features to hemoglobin."""
    return NetworkSpec(
        input_shape=(3,),
        layers=(Dense(3, 16), Relu(), Dense(16, 8), Relu(), Dense(8, 1)),
        seed=seed,
    )


def _feature_matrix(features: list[FeatureVector]) -> np.ndarray:
    x = np.array([[f.mean_r, f.mean_g, f.ei] for f in features], dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DatasetError("dataset contains non-finite feature values")
    return x


def train_regressor(
    dataset: list[tuple[FeatureVector, float]],
    config: TrainingConfig,
    spec: NetworkSpec | None = None,
    on_epoch=None,
) -> tuple[RegressorModel, dict]:
    """Train on (features, gold hb) pairs; 80/20 train/validation split by
    seeded shuffle. Returns the model and a history dict with per-epoch
    training loss, per-epoch validation loss, and final validation MAE.
    """
    if len(dataset) < 10:
        raise DatasetError(f"need at least 10 samples to train, got {len(dataset)}")
    golds = np.array([g for _, g in dataset], dtype=np.float64)
    if not np.all(np.isfinite(golds)):
        raise DatasetError("dataset contains non-finite gold hb")
    if np.any(golds < HB_REPORT_RANGE[0]) or np.any(golds > HB_REPORT_RANGE[1]):
        raise DatasetError(
            f"gold hb values must lie in {HB_REPORT_RANGE}, "
            f"got range [{golds.min()}, {golds.max()}]"
        )
    x = _feature_matrix([f for f, _ in dataset])

    from .rng import SplitMix64

    order = SplitMix64(config.seed).permutation(len(dataset))
    split = max(1, int(round(len(dataset) * 0.8)))
    if split >= len(dataset):
        split = len(dataset) - 1
    train_idx, val_idx = order[:split], order[split:]

    mean = x[train_idx].mean(axis=0)
    std = x[train_idx].std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    standardization = Standardization(mean=tuple(mean), std=tuple(std))

    xs = standardization.apply(x)
    ts = golds[:, None]

    net = init_network(spec if spec is not None else default_regressor_spec(seed=config.seed))
    trained, train_losses = train(net, xs[train_idx], ts[train_idx], config, on_epoch=on_epoch)

    val_pred = forward(trained, xs[val_idx])
    val_mae = float(np.mean(np.abs(val_pred[:, 0] - golds[val_idx])))
    val_mse = float(np.mean((val_pred[:, 0] - golds[val_idx]) ** 2))
    history = {
        "train_loss": train_losses,
        "val_mse": val_mse,
        "val_mae": val_mae,
        "n_train": len(train_idx),
        "n_val": len(val_idx),
    }
    return RegressorModel(net=trained, standardization=standardization), history


def predict_hb(model: RegressorModel, features: FeatureVector) -> HbPrediction:
    if model.standardization is None or len(model.standardization.mean) != 3:
        raise DatasetError("regressor model lacks 3-feature standardization constants")
    x = model.standardization.apply(
        np.array([features.mean_r, features.mean_g, features.ei], dtype=np.float64)
    )
    raw = float(forward(model.net, x)[0])
    lo, hi = HB_REPORT_RANGE
    clamped = raw < lo or raw > hi
    return HbPrediction(
        hb=min(max(raw, lo), hi),
        clamped=clamped,
        features=features,
        model_id=model.model_id,
    )


def classify(pred: HbPrediction, cutoff: float) -> CutoffDecision:
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    return CutoffDecision(cutoff=cutoff, anemic=pred.hb < cutoff)


def evaluate(pairs: list[tuple[float, float]], cutoff: float) -> ScreeningMetrics:
    """Confusion counts and rates for (predicted hb, gold hb) pairs.

    Gold labels are derived from gold hb at the same cutoff, so the metrics
    match a cut-off sweep over a regression test set.
    """
    if not pairs:
        raise DatasetError("cannot evaluate an empty dataset")
    tp = fp = tn = fn = 0
    for pred_hb, gold_hb in pairs:
        pred_pos = pred_hb < cutoff
        gold_pos = gold_hb < cutoff
        if pred_pos and gold_pos:
            tp += 1
        elif pred_pos and not gold_pos:
            fp += 1
        elif not pred_pos and gold_pos:
            fn += 1
        else:
            tn += 1
    return ScreeningMetrics.from_counts(tp=tp, fp=fp, tn=tn, fn=fn)


def format_cutoff(cutoff: float) -> str:
    return f"{cutoff:g}"


def _format_rate(value: float | None) -> str:
    return "—" if value is None else f"{value:.2f}"


def render_report(metrics_by_cutoff: dict[float, ScreeningMetrics]) -> str:
    """Text table: one column per cut-off, rows accuracy/sensitivity/specificity."""
    if not metrics_by_cutoff:
        raise DatasetError("report needs at least one cutoff")
    cutoffs = sorted(metrics_by_cutoff)
    headers = ["Cut-off point"] + [f"Hb = {format_cutoff(c)}" for c in cutoffs]
    rows = [
        ["Accuracy"] + [_format_rate(metrics_by_cutoff[c].accuracy) for c in cutoffs],
        ["Sensitivity"] + [_format_rate(metrics_by_cutoff[c].sensitivity) for c in cutoffs],
        ["Specificity"] + [_format_rate(metrics_by_cutoff[c].specificity) for c in cutoffs],
    ]
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) for i in range(len(headers))
    ]
    lines = []
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for row in rows:
        cells = [row[0].ljust(widths[0])] + [
            row[i].rjust(widths[i]) for i in range(1, len(row))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def metrics_to_dict(metrics_by_cutoff: dict[float, ScreeningMetrics]) -> dict:
    out = {}
    for cutoff in sorted(metrics_by_cutoff):
        m = metrics_by_cutoff[cutoff]
        out[format_cutoff(cutoff)] = {
            "tp": m.tp,
            "fp": m.fp,
            "tn": m.tn,
            "fn": m.fn,
            "accuracy": m.accuracy,
            "sensitivity": m.sensitivity,
            "specificity": m.specificity,
        }
    return out


def save_regressor(model: RegressorModel, path) -> RegressorModel:
    model_id = save_weights(model.net, path, standardization=model.standardization)
    return RegressorModel(net=model.net, standardization=model.standardization, model_id=model_id)


def load_regressor(path) -> RegressorModel:
    net, standardization, model_id = load_weights(path)
    if standardization is None:
        raise DatasetError(f"weights file {path} holds no standardization constants")
    return RegressorModel(net=net, standardization=standardization, model_id=model_id)


# ---------------------------------------------------------------------------
# Evaluation dataset manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestRow:
    image_path: str
    card_roi: Roi
    gold_hb: float
    gold_ei: float | None = None
    mask_path: str | None = None


def read_manifest(manifest_path) -> list[ManifestRow]:
    """CSV with header image_path,card_x,card_y,card_w,card_h,gold_hb and
    optional gold_ei,mask_path columns; paths are relative to the CSV."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    rows: list[ManifestRow] = []
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"image_path", "card_x", "card_y", "card_w", "card_h", "gold_hb"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DatasetError(
                f"manifest must have columns {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        for rec in reader:
            try:
                roi = Roi(int(rec["card_x"]), int(rec["card_y"]),
                          int(rec["card_w"]), int(rec["card_h"]))
                gold_hb = float(rec["gold_hb"])
            except (ValueError, KeyError) as exc:
                raise DatasetError(f"bad manifest row {rec!r}: {exc}") from exc
            if not math.isfinite(gold_hb):
                raise DatasetError(f"non-finite gold_hb in row {rec!r}")
            gold_ei = float(rec["gold_ei"]) if rec.get("gold_ei") else None
            mask_rel = rec.get("mask_path") or None
            rows.append(
                ManifestRow(
                    image_path=os.path.join(base, rec["image_path"]),
                    card_roi=roi,
                    gold_hb=gold_hb,
                    gold_ei=gold_ei,
                    mask_path=os.path.join(base, mask_rel) if mask_rel else None,
                )
            )
    if not rows:
        raise DatasetError(f"manifest {manifest_path} has no data rows")
    return rows
