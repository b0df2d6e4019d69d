"""Deterministic synthetic-eye generator with a known hemoglobin/color map.

Each scene is a skin-tone background (180, 140, 120), a conjunctiva ellipse,
and a white reference square at a fixed corner, drawn at exact float values,
then degraded by per-pixel Gaussian noise and per-channel illumination gains
(noise first, so calibration has to genuinely undo the cast).

The generator's published contract, the ground truth every downstream stage
is verified against:

    true_ei = -0.9 + 0.1 * hb          (dimensionless, log10 units)
    mean_g  = 80.0                     (green brightness, fixed)
    mean_r  = 80.0 * 10**true_ei       (red brightness)
    conjunctiva fill = (mean_r, 80, 90)

The linear map and its constants are fabricated test fixtures - they exist
so that every claim about the pipeline can be checked without clinical data.
The slope is positive so less hemoglobin means a paler (less red)
conjunctiva, and the inverse map ``hb = (ei + 0.9) / 0.1`` recovers the
label from a measured erythema index.

All randomness is counter-based: sample ``i`` of seed ``s`` draws from
``derive_seed(s, i)``, so parallel and serial generation agree byte for
byte and regenerating any single sample is cheap.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .imaging import BinaryMask, RgbImage, Roi, save_image, save_mask_pbm
from .rng import SplitMix64, derive_seed, mix64

__all__ = [
    "SynthConfig",
    "SynthSample",
    "generate_sample",
    "generate_dataset",
    "hb_from_ei",
    "ei_from_hb",
    "snap_hb_to_file_grid",
    "CARD_ROI",
    "BACKGROUND_COLOR",
    "CONJUNCTIVA_GREEN",
    "CONJUNCTIVA_BLUE",
    "CARD_WHITE",
]

CARD_ROI = Roi(8, 8, 32, 32)
BACKGROUND_COLOR = (180.0, 140.0, 120.0)
CONJUNCTIVA_GREEN = 80.0
CONJUNCTIVA_BLUE = 90.0
CARD_WHITE = 200.0

# Keeps the ellipse's bounding box clear of the reference square.
_ELLIPSE_MARGIN = 48

# Tag mixed into the seed for the dataset-level hb stream, so hb draws do
# not alias any per-sample stream.
_HB_STREAM_TAG = 0x68625F687562

MANIFEST_COLUMNS = [
    "image_path",
    "card_x",
    "card_y",
    "card_w",
    "card_h",
    "gold_hb",
    "gold_ei",
    "mask_path",
]


def ei_from_hb(hb: float) -> float:
    return -0.9 + 0.1 * hb

def hb_from_ei(ei: float) -> float:
    return (ei + 0.9) / 0.1


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 1
    hb_range: tuple[float, float] = (7.0, 14.0)
    noise_sigma: float = 2.0
    gain_range: tuple[float, float] = (0.5, 2.0)
    image_size: tuple[int, int] = (256, 256)  # (width, height)
    seed: int = 0

    def __post_init__(self):
        # a degenerate range (lo == hi) pins every sample to one hb value
        if not self.hb_range[0] <= self.hb_range[1]:
            raise ConfigError(f"hb_range must be non-decreasing, got {self.hb_range}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 < self.gain_range[0] <= self.gain_range[1]:
            raise ConfigError(f"gain range must be positive, got {self.gain_range}")
        if min(self.image_size) < 96:
            raise ConfigError(
                f"image_size must be at least 96x96 to fit card and ellipse, "
                f"got {self.image_size}"
            )


@dataclass(frozen=True)
class SynthSample:
    image: RgbImage  # raw: noisy and illumination-distorted
    mask_gt: BinaryMask
    card_roi: Roi
    gold_hb: float
    true_ei: float
    gains: tuple[float, float, float] = field(default=(1.0, 1.0, 1.0))


def generate_sample(hb: float, config: SynthConfig, seed: int) -> SynthSample:
    """One deterministic scene for the given hemoglobin value.

    Draw order from the per-sample stream: ellipse area fraction, aspect,
    centre x, centre y, then the noise field, then the three illumination
    gains.
    """
    lo, hi = config.hb_range
    if not lo <= hb <= hi:
        raise ConfigError(f"hb {hb} outside configured range [{lo}, {hi}]")
    width, height = config.image_size
    rng = SplitMix64(seed)

    true_ei = ei_from_hb(hb)
    mean_r = CONJUNCTIVA_GREEN * 10.0**true_ei

    frac = rng.uniform(0.02, 0.08)
    aspect = rng.uniform(0.5, 2.0)
    area = frac * width * height
    ax = math.sqrt(area * aspect / math.pi)
    ay = ax / aspect
    cx = rng.uniform(_ELLIPSE_MARGIN + ax, width - 2 - ax)
    cy = rng.uniform(_ELLIPSE_MARGIN + ay, height - 2 - ay)

    planes = np.empty((3, height, width), dtype=np.float64)
    for c, v in enumerate(BACKGROUND_COLOR):
        planes[c].fill(v)
    planes[:, CARD_ROI.y : CARD_ROI.y + CARD_ROI.h, CARD_ROI.x : CARD_ROI.x + CARD_ROI.w] = CARD_WHITE

    ys, xs = np.ogrid[0:height, 0:width]
    inside = ((xs - cx) / ax) ** 2 + ((ys - cy) / ay) ** 2 <= 1.0
    for c, v in enumerate((mean_r, CONJUNCTIVA_GREEN, CONJUNCTIVA_BLUE)):
        planes[c][inside] = v

    if config.noise_sigma > 0:
        noise = rng.normal_array(3 * height * width, sigma=config.noise_sigma)
        planes += noise.reshape(3, height, width)

    gains = tuple(rng.uniform(*config.gain_range) for _ in range(3))
    for c in range(3):
        planes[c] *= gains[c]

    return SynthSample(
        image=RgbImage(planes),
        mask_gt=BinaryMask(inside),
        card_roi=CARD_ROI,
        gold_hb=hb,
        true_ei=true_ei,
        gains=gains,
    )


def snap_hb_to_file_grid(hb: float, hb_range: tuple[float, float]) -> float:
    """Nearest hb whose conjunctiva red brightness is an exact integer.

    8-bit export rounds channel values; labelling file datasets with the
    snapped hb keeps the label consistent with what the file actually
    stores, so noise-free file round-trips are exact.
    """
    r = CONJUNCTIVA_GREEN * 10.0 ** ei_from_hb(hb)
    for r_int in sorted((round(r), math.floor(r), math.ceil(r)), key=lambda v: abs(v - r)):
        if r_int < 1:
            continue
        snapped = hb_from_ei(math.log10(r_int / CONJUNCTIVA_GREEN))
        if hb_range[0] <= snapped <= hb_range[1]:
            return snapped
    return hb


def generate_dataset(config: SynthConfig, out_dir) -> str:
    """Write ``images/NNNN.ppm``, ``masks/NNNN.pbm`` and ``manifest.csv``.

    hb values are drawn uniformly over ``hb_range`` from a dedicated stream,
    then snapped to the 8-bit file grid (see ``snap_hb_to_file_grid``).
    Returns the manifest path.
    """
    if config.n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {config.n_samples}")
    out_dir = str(out_dir)
    images_dir = os.path.join(out_dir, "images")
    masks_dir = os.path.join(out_dir, "masks")
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)

    hb_rng = SplitMix64(mix64(config.seed ^ _HB_STREAM_TAG))
    hbs = hb_rng.uniform_array(config.n_samples, *config.hb_range)

    manifest_path = os.path.join(out_dir, "manifest.csv")
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for i in range(config.n_samples):
            hb = snap_hb_to_file_grid(float(hbs[i]), config.hb_range)
            sample = generate_sample(hb, config, derive_seed(config.seed, i))
            image_rel = f"images/{i:04d}.ppm"
            mask_rel = f"masks/{i:04d}.pbm"
            save_image(sample.image, os.path.join(out_dir, image_rel))
            save_mask_pbm(sample.mask_gt, os.path.join(out_dir, mask_rel))
            writer.writerow(
                [
                    image_rel,
                    sample.card_roi.x,
                    sample.card_roi.y,
                    sample.card_roi.w,
                    sample.card_roi.h,
                    repr(sample.gold_hb),
                    repr(sample.true_ei),
                    mask_rel,
                ]
            )
    return manifest_path
