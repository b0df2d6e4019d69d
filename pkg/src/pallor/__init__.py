"""Non-invasive anemia screening from conjunctiva photos.

Pipeline: calibrate colors against a reference card's white square, segment
the palpebral conjunctiva, compute erythema-index features, regress
hemoglobin with a small neural network, and classify anemia at configurable
cut-off points. Ships as a library, a CLI (``pallor``), and an HTTP service;
a deterministic synthetic-eye generator provides the verification oracle.
"""

from .calibration import CalibrationResult, apply_gains, compute_gains
from .errors import PallorError
from .features import FeatureVector, erythema_index, extract_features
from .imaging import BinaryMask, RgbImage, Roi, channel_means, load_image, save_image
from .screening import (
    CutoffDecision,
    HbPrediction,
    ScreeningMetrics,
    classify,
    evaluate,
    predict_hb,
    render_report,
    train_regressor,
)
from .segmentation import classical_segment, cnn_segment, iou, to_mask
from .synthdata import SynthConfig, SynthSample, generate_dataset, generate_sample

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult",
    "apply_gains",
    "compute_gains",
    "PallorError",
    "FeatureVector",
    "erythema_index",
    "extract_features",
    "BinaryMask",
    "RgbImage",
    "Roi",
    "channel_means",
    "load_image",
    "save_image",
    "CutoffDecision",
    "HbPrediction",
    "ScreeningMetrics",
    "classify",
    "evaluate",
    "predict_hb",
    "render_report",
    "train_regressor",
    "classical_segment",
    "cnn_segment",
    "iou",
    "to_mask",
    "SynthConfig",
    "SynthSample",
    "generate_dataset",
    "generate_sample",
    "__version__",
]
