"""Delay and loss analysis of multi-link EDCA, plus a genetic parameter optimiser."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .scenario import (AcEdcaConfig, ConfigError, LinkScenario, MloScenario, PhyProfile,
                       DSSS_PHY, check, validate)
from .fixed_point import FixedPointSolution, solve
from .delay_gf import build_context, build_contexts
from .ccdf import CcdfResult, delay_violation, invert_ccdf
from .analysis import analyze

__all__ = [
    "AcEdcaConfig", "ConfigError", "LinkScenario", "MloScenario", "PhyProfile", "DSSS_PHY",
    "check", "validate", "FixedPointSolution", "solve", "build_context", "build_contexts",
    "CcdfResult", "delay_violation", "invert_ccdf", "analyze",
]
