"""Exception hierarchy shared by the whole pipeline.

``PallorError`` is the base for every domain failure; callers that need to
distinguish "the input was bad" from "the code is broken" can catch it and
let everything else propagate.
"""


class PallorError(Exception):
    """Base class for all domain errors raised by this package."""


class ImageFileMissingError(PallorError, FileNotFoundError):
    """The image path does not exist."""


class UnsupportedImageFormatError(PallorError):
    """The file exists but is not a raster format we accept."""


class CorruptImageError(PallorError):
    """The file claims a supported format but its contents are broken."""


class EmptyRegionError(PallorError):
    """A statistic was requested over a region containing no pixels."""


class RoiBoundsError(PallorError):
    """A rectangular ROI does not fit inside the image it is bound to."""


class CalibrationFloorError(PallorError):
    """A white-square channel mean is below the floor; the reference patch
    is not actually white (or not visible)."""


class BrightnessFloorError(PallorError):
    """A region-mean brightness is too dark for a log-domain feature."""


class MaskTooSmallError(PallorError):
    """Segmentation produced a mask under the minimum usable area."""


class DimensionMismatchError(PallorError):
    """Two rasters that must share dimensions do not."""


class NetworkCompositionError(PallorError):
    """Adjacent network layers have incompatible shapes."""


class WeightsFormatError(PallorError):
    """A weights file is truncated, has a bad magic string, or an
    unsupported version."""


class WeightsSpecMismatchError(WeightsFormatError):
    """A weights file holds a different architecture than expected."""


class DatasetError(PallorError):
    """A training/evaluation dataset violates its preconditions."""


class ConfigError(PallorError):
    """A configuration value is out of its legal range."""
