"""Exception hierarchy shared across the package."""


class QlfError(Exception):
    """Base class for all errors raised by this package."""


class InputError(QlfError):
    """Unreadable, malformed, or missing input data (files, manifests)."""


class ParameterError(QlfError):
    """A configuration value outside its allowed range."""


class CalibrationError(QlfError):
    """Threshold calibration cannot proceed (e.g. a class is missing)."""


class IntegrityError(QlfError):
    """A compound result fails its internal consistency check."""


class InternalError(QlfError):
    """A contract between modules was violated; indicates a bug."""
