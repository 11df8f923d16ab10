"""Numerics for the sine-kernel gap probability and its constant term."""

from .constants import NAMES, all_constants, constant
from .errors import AccuracyError, DomainError, SineGapError, UsageError

__all__ = ["NAMES", "all_constants", "constant", "AccuracyError", "DomainError", "SineGapError", "UsageError"]
