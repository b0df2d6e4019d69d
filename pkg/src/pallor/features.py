"""Erythema-index color features over the segmented conjunctiva.

The erythema index is ``log10(mean R) - log10(mean G)`` of the region's mean
brightness: redder tissue scores higher, pale tissue lower. Computing it from
region means (rather than averaging per-pixel indices) follows the reading
that R and G are statistics of the conjunctiva as a whole.

Log base 10 matches the classical erythema-index convention; switching base
would rescale the index linearly and nothing downstream depends on the
absolute scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BrightnessFloorError, MaskTooSmallError
from .imaging import BinaryMask, RgbImage, channel_means

__all__ = ["FeatureVector", "erythema_index", "extract_features", "MIN_MASK_AREA"]

# Region means darker than this are capture failures; the log would blow up.
BRIGHTNESS_FLOOR = 1.0

# Masks smaller than this carry no usable color statistics.
MIN_MASK_AREA = 50


@dataclass(frozen=True)
class FeatureVector:
    mean_r: float
    mean_g: float
    ei: float
    mask_area: int

    def as_dict(self) -> dict:
        return {
            "mean_r": self.mean_r,
            "mean_g": self.mean_g,
            "ei": self.ei,
            "mask_area": self.mask_area,
        }


def erythema_index(mean_r: float, mean_g: float) -> float:
    """``log10(mean_r) - log10(mean_g)``; inputs must clear the brightness floor."""
    if mean_r < BRIGHTNESS_FLOOR or mean_g < BRIGHTNESS_FLOOR:
        raise BrightnessFloorError(
            f"region means ({mean_r:.4g}, {mean_g:.4g}) are below the brightness "
            f"floor {BRIGHTNESS_FLOOR}; region too dark to be conjunctiva"
        )
    return math.log10(mean_r) - math.log10(mean_g)


def extract_features(
    image: RgbImage, mask: BinaryMask, min_area: int = MIN_MASK_AREA
) -> FeatureVector:
    """Mean R/G brightness over the mask plus the erythema index."""
    mask.check_matches(image)
    if mask.popcount < min_area:
        raise MaskTooSmallError(
            f"mask covers {mask.popcount} px, below the minimum usable area {min_area}"
        )
    mean_r, mean_g, _ = channel_means(image, mask)
    return FeatureVector(
        mean_r=mean_r,
        mean_g=mean_g,
        ei=erythema_index(mean_r, mean_g),
        mask_area=mask.popcount,
    )
