"""Symbiotic control with a low-pass-filtered fixed-gain law: simulation,
Lyapunov certificates and loop stability margins."""

from .config import RunConfig, load_config, default_config
from .freq import FrequencyResponse, MarginReport, compute_margins, frequency_response, loop_margins
from .model import (
    ClosedLoopModel,
    LtiSystem,
    NominalGains,
    PlantModel,
    SymbioticConfig,
    Variant,
    assemble_closed_loop,
    open_loop_at_plant_input,
    realize_controller,
)
from .simulate import Constant, FilteredSquareWave, Sinusoid, Trajectory, Zero, integrate, quadratic_cost

__all__ = [
    "ClosedLoopModel",
    "Constant",
    "FilteredSquareWave",
    "FrequencyResponse",
    "LtiSystem",
    "MarginReport",
    "NominalGains",
    "PlantModel",
    "RunConfig",
    "Sinusoid",
    "SymbioticConfig",
    "Trajectory",
    "Variant",
    "Zero",
    "assemble_closed_loop",
    "compute_margins",
    "frequency_response",
    "integrate",
    "load_config",
    "loop_margins",
    "open_loop_at_plant_input",
    "default_config",
    "quadratic_cost",
    "realize_controller",
]
