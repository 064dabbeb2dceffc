"""basinuq: 1D basin compaction forward model + sparse-grid UQ."""

__version__ = "0.1.0"

from .materials import (
    FluidProperties,
    MaterialProperties,
    QuartzKinetics,
    mech_equilibrium_porosity,
    permeability,
    quartz_rate,
    thermal_coefficients,
)
from .scenario import (
    DepositionEvent,
    ParameterSpace,
    ScenarioConfig,
    UncertainParameter,
    apply_parameters,
    load_scenario,
)

__all__ = [
    "DepositionEvent",
    "FluidProperties",
    "MaterialProperties",
    "ParameterSpace",
    "QuartzKinetics",
    "ScenarioConfig",
    "UncertainParameter",
    "apply_parameters",
    "load_scenario",
    "mech_equilibrium_porosity",
    "permeability",
    "quartz_rate",
    "thermal_coefficients",
    "__version__",
]
