"""Simulation laboratory for first passage percolation on Z^d."""

__version__ = "0.1.0"

from .errors import (AssumptionViolation, ConfigurationError, DomainError, FormatError, FPPError,  # noqa: E402
                     ResourceRefusal)
from .lattice import (ArrayField, LatticeSpec, WeightDistribution, WeightField, parse_distribution,  # noqa: E402
                      round_to_lattice, validate_assumptions)
from .passage import (PassageResult, box_region, directional_passage, passage_time,  # noqa: E402
                      passage_time_sets, sandwich_check)

__all__ = [
    "ArrayField", "AssumptionViolation", "ConfigurationError", "DomainError", "FPPError", "FormatError",
    "LatticeSpec", "PassageResult", "ResourceRefusal", "WeightDistribution", "WeightField", "box_region",
    "directional_passage", "parse_distribution", "passage_time", "passage_time_sets", "round_to_lattice",
    "sandwich_check", "validate_assumptions",
]
