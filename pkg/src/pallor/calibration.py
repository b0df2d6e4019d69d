"""White-balance correction anchored on a reference card's white square.

Ambient lighting multiplies each channel by an unknown gain. The white square
is known to be neutral, so dividing each channel by its measured mean over
the square (and rescaling to a fixed target brightness, 200 by default)
cancels the cast. Gains are computed per channel; that is what makes the
square neutral after correction and what makes downstream color features
invariant to diagonal illumination changes.

Corrected brightness is intentionally not clamped: a gain above 1 can push
bright pixels past 255, and those values must survive until file export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CalibrationFloorError
from .imaging import RgbImage, Roi, channel_means

__all__ = ["CalibrationResult", "compute_gains", "apply_gains", "DEFAULT_TARGET"]

DEFAULT_TARGET = 200.0

# A white-square channel mean below this is a capture failure, not data;
# dividing by it would blow the gains up.
MEAN_FLOOR = 1.0


@dataclass(frozen=True)
class CalibrationResult:
    """Per-channel gains plus the measurements they came from."""

    gains: tuple[float, float, float]
    card_means: tuple[float, float, float]
    target: float

    def __post_init__(self):
        if not all(math.isfinite(g) and g > 0.0 for g in self.gains):
            raise ValueError(f"gains must be finite and positive, got {self.gains}")


def compute_gains(
    image: RgbImage, white_square: Roi, target: float = DEFAULT_TARGET
) -> CalibrationResult:
    """Measure the white square and derive gain = target / channel mean."""
    means = channel_means(image, white_square)
    low = [m for m in means if m < MEAN_FLOOR]
    if low:
        raise CalibrationFloorError(
            f"white-square channel means {tuple(round(m, 3) for m in means)} fall below "
            f"{MEAN_FLOOR}; the reference square is not white or not visible"
        )
    gains = tuple(target / m for m in means)
    return CalibrationResult(gains=gains, card_means=means, target=target)


def apply_gains(image: RgbImage, result: CalibrationResult) -> RgbImage:
    """Scale every sample of channel c by gains[c]; no clamping."""
    planes = image.planes.copy()
    for c in range(3):
        planes[c] *= result.gains[c]
    return RgbImage(planes)
