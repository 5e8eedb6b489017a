"""Exception types raised by the localization pipeline."""


class RadarLocError(Exception):
    """Base class for all radarloc domain errors."""


class NegativeRangeError(RadarLocError):
    """Doppler compensation or distortion drove a range below zero.

    Signals a corrupt detection; callers drop the detection rather than
    clamping it.
    """


class EmptySubmapError(RadarLocError):
    """Submap construction produced no usable points."""


class NoMatchesError(RadarLocError):
    """Descriptor matching yielded no mutually-nearest pairs."""


class DegenerateSampleError(RadarLocError):
    """A minimal sample was geometrically degenerate (coincident points)."""


class InsufficientInliersError(RadarLocError):
    """RANSAC could not find enough geometrically consistent matches."""


class SingularCovarianceError(RadarLocError):
    """A combined residual covariance is not invertible within the
    conditioning bound."""


class EmptyGridError(RadarLocError):
    """Grid binning of the reference cloud produced no occupied cell."""


class AllOutliersError(RadarLocError):
    """Every benchmark pair exceeded the inlier threshold."""
