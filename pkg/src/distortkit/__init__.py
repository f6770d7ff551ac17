"""Schlumprecht and Tsirelson norms on finitely supported vectors, the
constructions behind arbitrary distortion, and probes that measure them."""

from .exceptions import (DistortkitError, InfeasibleConstructionError, InvalidInputError,
                         NotFoundError)
from .vectors import BlockSequence, Segment, SparseVector
from .schlumprecht import s_norm, s_norm_bounds, s_norming_functional
from .tsirelson import t_norm, t_norming_functional, tp_norm, tp_norming_functional
from .spaces import CalibrationTable, SpaceParams, calibrate, estimate_An_constants

__all__ = [
    "BlockSequence", "CalibrationTable", "DistortkitError", "InfeasibleConstructionError",
    "InvalidInputError", "NotFoundError", "Segment", "SpaceParams", "SparseVector", "calibrate",
    "estimate_An_constants", "s_norm", "s_norm_bounds", "s_norming_functional", "t_norm",
    "t_norming_functional", "tp_norm", "tp_norming_functional",
]
__version__ = "0.1.0"
