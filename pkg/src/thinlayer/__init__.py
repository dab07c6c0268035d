"""Desk-scale lab for a rotating radiative gas layer and its thin 2D limit.

The package integrates a compressible barotropic flow coupled to grey
discrete-ordinates transport on a slab of aspect ratio eps, the matching
2D system on the horizontal domain, and the relative-entropy machinery
that measures how fast the first collapses onto the second as eps shrinks.
Two gravity regimes are covered: a fixed external field, and self-gravity
with the Froude number tied to eps.

Entry points: `run_epsilon_sweep` for the headline convergence study,
`run_scenario` for a single aspect ratio, `manufactured_convergence` and
the `verify` module for order and invariant checks, and the `thinlayer`
command line tool wrapping all of them.
"""

from .angular import AngularQuadrature
from .entropy import (gronwall_envelope, lower_bound_constant,
                      lower_bound_margin_grid, relative_entropy,
                      remainder_blocks)
from .grid import LayerGrid
from .hydro import (EnergyLedger, HydroStepConfig, HydroStepError, step2d,
                    step3d)
from .model import ModelParams, Opacities, gauss_laguerre_bands, pressure
from .mms import manufactured_convergence
from .radiation import (RadField, equilibrium_field, transport_step_2d,
                        transport_step_3d)
from .reporting import (config_from_file, config_to_file, export_sweep,
                        read_series_csv, summary_dict, write_run_reports)
from .scenarios import ScenarioConfig, build_params, build_well_prepared
from .states import FluidState2, FluidState3
from .sweep import (RunResult, SweepResult, alpha_scaling_check,
                    run_epsilon_sweep, run_scenario)
from .verify import specular_conservation_check, stationarity_check

__version__ = "0.1.0"

__all__ = [
    "AngularQuadrature",
    "EnergyLedger",
    "FluidState2",
    "FluidState3",
    "HydroStepConfig",
    "HydroStepError",
    "LayerGrid",
    "ModelParams",
    "Opacities",
    "RadField",
    "RunResult",
    "ScenarioConfig",
    "SweepResult",
    "alpha_scaling_check",
    "build_params",
    "build_well_prepared",
    "config_from_file",
    "config_to_file",
    "equilibrium_field",
    "export_sweep",
    "gauss_laguerre_bands",
    "gronwall_envelope",
    "lower_bound_constant",
    "lower_bound_margin_grid",
    "manufactured_convergence",
    "pressure",
    "read_series_csv",
    "relative_entropy",
    "remainder_blocks",
    "run_epsilon_sweep",
    "run_scenario",
    "specular_conservation_check",
    "stationarity_check",
    "step2d",
    "step3d",
    "summary_dict",
    "transport_step_2d",
    "transport_step_3d",
    "write_run_reports",
    "__version__",
]
