"""SAE J1772 control-pilot co-simulator with cable-borne attack models."""

from .circuit import OPEN, DiodeModel, PilotSolution, PilotSource, solve_baseline, solve_parallel, solve_serial
from .duty import AmpacityReading, DutyDomainError, current_to_duty, duty_to_current
from .states import ChargerProfile, ChargingState, EvProfile, classify_state

__version__ = "0.1.0"

__all__ = [
    "OPEN", "DiodeModel", "PilotSolution", "PilotSource",
    "solve_baseline", "solve_parallel", "solve_serial",
    "AmpacityReading", "DutyDomainError", "current_to_duty", "duty_to_current",
    "ChargerProfile", "ChargingState", "EvProfile", "classify_state",
]
