"""Exception types shared across the package.

File-system problems are reported with the builtin OSError; everything
else derives from BgStereoError so callers can catch package errors in
one clause.
"""


class BgStereoError(Exception):
    """Base class for all bgstereo errors."""


class InvalidShape(BgStereoError):
    """Array construction with a bad rank, extent, or element count."""


class IndexOutOfBounds(BgStereoError):
    """Element access outside the array extents."""


class ShapeMismatch(BgStereoError):
    """Operands whose shapes disagree where equality is required."""


class FormatError(BgStereoError):
    """Malformed or unsupported image/grid file contents."""


class InvalidWindow(BgStereoError):
    """Census window size outside the supported set."""


class GroupMismatch(BgStereoError):
    """Group count that does not divide the feature channel count."""


class InvalidFactor(BgStereoError):
    """Downsampling factor outside the supported set."""


class EmptyOverlap(BgStereoError):
    """No pixel is valid in both maps, so the metric is undefined."""


class DegenerateInput(BgStereoError):
    """Input without enough structure for the requested operation."""


class ConfigError(BgStereoError):
    """Invalid pipeline configuration value or unknown config key."""
