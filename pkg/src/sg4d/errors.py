"""Exception taxonomy shared across the toolkit.

Every error raised by this package derives from :class:`Sg4dError` so callers
can catch the whole family with one clause.  Subclasses are grouped by the
stage that raises them; none of them carry state beyond the message.
"""

from __future__ import annotations

__all__ = [
    "Sg4dError",
    "MalformedFrame",
    "CalibrationInvalid",
    "ManifestError",
    "EmptyCloudWarning",
    "InconsistentViews",
    "InvalidCostMatrix",
    "EmptyPointSet",
    "InvariantViolation",
    "BackendError",
    "BackendUnavailable",
    "BackendTimeout",
    "MaskShapeMismatch",
    "PoseLookupError",
    "SchemaVersionMismatch",
    "ClientUnavailable",
    "ClientTimeout",
    "MissingProvenance",
    "LengthMismatch",
    "ConfigError",
]


class Sg4dError(Exception):
    """Base class for all errors raised by this package."""


class MalformedFrame(Sg4dError):
    """Frame data violates a structural invariant (shape, dtype, finiteness)."""


class CalibrationInvalid(Sg4dError):
    """Camera intrinsics or extrinsics fail validation."""


class ManifestError(Sg4dError):
    """Sequence manifest is missing, unreadable, or self-inconsistent."""


class EmptyCloudWarning(UserWarning):
    """A frame carries zero points; processing continues with empty outputs."""


class InconsistentViews(Sg4dError):
    """Masks and projections disagree about which camera views exist."""


class InvalidCostMatrix(Sg4dError):
    """Assignment cost matrix contains NaN or is otherwise unusable."""


class EmptyPointSet(Sg4dError):
    """An operation that needs at least one point received none."""


class InvariantViolation(Sg4dError):
    """A token set or graph violates one of its declared invariants."""


class BackendError(Sg4dError):
    """Segmentation backend failed to produce masks."""


class BackendUnavailable(BackendError):
    """Segmentation backend cannot be reached."""


class BackendTimeout(BackendError):
    """Segmentation backend did not answer within its deadline."""


class MaskShapeMismatch(Sg4dError):
    """A mask raster does not match the image resolution of its camera."""


class PoseLookupError(Sg4dError):
    """No ego pose is available for a requested timestamp."""


class SchemaVersionMismatch(Sg4dError):
    """Serialized scene graph was written under an incompatible schema."""


class ClientUnavailable(Sg4dError):
    """Language-model client cannot be reached."""


class ClientTimeout(Sg4dError):
    """Language-model client did not answer within its deadline."""


class MissingProvenance(Sg4dError):
    """A token set lacks the source point indices needed for label projection."""


class LengthMismatch(Sg4dError):
    """Predicted and reference label arrays differ in length."""


class ConfigError(Sg4dError):
    """Configuration file or override is invalid."""
