"""Reduced-scale Kaplan / variable-speed propeller test bench for FCR studies.

Ground-truth hill chart, MARS efficiency surrogate, CAM optimisation, plant
and governor models, KPI computation and batch scenario orchestration.
"""

from .core import DomainError, DroopConfig, fcr_setpoint, specific_speed, speed_coefficient
from .hillchart import GroundTruthHillChart, generate_training_set
from .surrogate import EfficiencySurrogate, MARSRegressor, fit_surrogate
from .cam import build_kaplan_cam, build_varspeed_cam
from .kpi import KpiReport, Trace
from .scenario import ScenarioConfig, run_batch, run_scenario, synthesize_frequency

__version__ = "0.1.0"

__all__ = [
    "DomainError", "DroopConfig", "EfficiencySurrogate", "GroundTruthHillChart", "KpiReport", "MARSRegressor",
    "ScenarioConfig", "Trace", "build_kaplan_cam", "build_varspeed_cam", "fcr_setpoint", "fit_surrogate",
    "generate_training_set", "run_batch", "run_scenario", "specific_speed", "speed_coefficient",
    "synthesize_frequency",
]
