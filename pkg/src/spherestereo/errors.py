"""Exception types raised across the package."""


class StereoError(Exception):
    """Base class for all errors raised by spherestereo."""


class BehindCamera(StereoError):
    """A point or ray has non-positive depth in the camera frame."""


class DegenerateBaseline(StereoError):
    """The two camera centers coincide."""


class DegeneratePrincipalRays(StereoError):
    """The summed principal rays are (nearly) parallel to the baseline."""


class SingularHomography(StereoError):
    pass


class PoleSingularity(StereoError):
    """A ray lies on the +/-Y axis where latitude is undefined."""


class OutOfGrid(StereoError):
    pass


class WindowTooLarge(StereoError):
    pass


class EmptyRange(StereoError):
    pass


class ImageTooSmall(StereoError):
    pass


class NonPositiveDisparity(StereoError):
    pass


class MalformedPly(StereoError):
    pass


class EmptyReference(StereoError):
    pass


class SceneNotVisible(StereoError):
    pass


class InvalidDepthBounds(StereoError):
    pass


class ConfigError(StereoError):
    """Invalid pipeline configuration (bad key, missing file, ...)."""
