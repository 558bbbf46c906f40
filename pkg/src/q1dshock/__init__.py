"""Transonic shocks in quasi-one-dimensional nozzles: steady construction,
linearised energy and spectrum, and shock-capturing simulation."""

from .gas import GasLaw, pressure, regime, sound_speed
from .nozzle import Nozzle, area, check_widening, darea
from .steady import BoundaryData, SteadyShock, build_steady_shock, rh_jump
from .linear import (assemble_coefficients, assemble_ST, check_dissipation_identity, energy,
                     linearized_shock_rate, spectral_radius, step_linear)
from .fitting import decay_fit
from .unsteady import PerturbationSpec, check_lax, locate_shock, perturb_initial, simulate
from .config import ScenarioConfig, load_config
from .experiments import RunReport, refinement_study, run_scenario, sweep

__version__ = "0.1.0"
