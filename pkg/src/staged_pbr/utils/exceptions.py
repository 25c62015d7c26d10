"""Custom exceptions for staged-pbr"""

from __future__ import annotations

from typing import Sequence, TYPE_CHECKING

if TYPE_CHECKING:
    from staged_pbr.core.materials import Violation


class StagedPBRError(Exception):
    """Base class for every error raised by the toolkit"""


class ParameterError(StagedPBRError, ValueError):
    """Raised when a scalar or pixel argument is outside its allowed range"""


class DimensionError(StagedPBRError, ValueError):
    """Raised when buffers that must be aligned have different shapes"""


class ConfigurationError(StagedPBRError):
    """Raised for inconsistent schedules, policies, or observation sets"""


class MaterialValidationError(StagedPBRError):
    """Raised when material maps break their invariants"""

    def __init__(self, violations: Sequence["Violation"], limit: int = 5):
        """Initialize MaterialValidationError

        Args:
            violations: Every violation reported by validate_maps
            limit: How many violations to spell out in the message
        """
        shown = "; ".join(str(v) for v in list(violations)[:limit])
        more = len(violations) - limit
        suffix = f" (+{more} more)" if more > 0 else ""
        super().__init__(f"{len(violations)} material violation(s): {shown}{suffix}")
        self.violations = list(violations)


class PFMError(StagedPBRError):
    """Base class for PFM parse failures"""


class PFMHeaderError(PFMError):
    """Malformed magic, dimension, or scale line"""


class PFMChannelError(PFMError):
    """Channel count does not match the header tag"""


class PFMTruncatedError(PFMError):
    """Payload shorter than the header promises"""


class PFMEndiannessError(PFMError):
    """Big-endian payloads (positive scale) are not supported"""


__all__ = [
    "StagedPBRError",
    "ParameterError",
    "DimensionError",
    "ConfigurationError",
    "MaterialValidationError",
    "PFMError",
    "PFMHeaderError",
    "PFMChannelError",
    "PFMTruncatedError",
    "PFMEndiannessError",
]
