"""Exception types shared across the package."""


class PlaneDepthError(Exception):
    """Base class for all errors raised by this package."""


class OutOfBoundsError(PlaneDepthError):
    """A pixel coordinate falls outside the image."""


class DuplicatePixelError(PlaneDepthError):
    """A sparse depth set contains more than one entry for a pixel."""


class DimensionMismatchError(PlaneDepthError):
    """Two images that must share dimensions do not."""


class InsufficientFloorError(PlaneDepthError):
    """Too few valid floor-labeled normals to estimate gravity."""


class DegenerateGravityError(PlaneDepthError):
    """Gravity is too close to the optical axis for a roll angle."""


class InsufficientPointsError(PlaneDepthError):
    """Too few valid 3D points to fit a plane."""


class NoValidNormalsError(PlaneDepthError):
    """A plane mask contains no valid surface normals."""


class NoSupportError(PlaneDepthError):
    """No 3D points support a plane distance estimate."""


class EmptyOverlapError(PlaneDepthError):
    """No pixel is valid in both images being compared."""


class UnknownLabelError(PlaneDepthError):
    """A plane instance label does not exist in the mask set."""


class InvalidConfigError(PlaneDepthError):
    """A configuration value violates its documented constraints."""


class ParseError(PlaneDepthError):
    """A file could not be parsed.

    Carries the byte offset at which parsing failed when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
