"""Wideband STAR-RIS THz beamforming: channel synthesis, beam-split gains and
alternating sum-rate optimization with time-delay hardware."""

__version__ = "0.1.0"

from .errors import (ConfigError, GeometryError, InvariantError, ProblemError,  # noqa: E402
                     SolverError)
from .scenario import ScenarioConfig, subcarrier_frequencies  # noqa: E402

__all__ = ["ConfigError", "GeometryError", "InvariantError", "ProblemError",
           "SolverError", "ScenarioConfig", "subcarrier_frequencies", "__version__"]
