"""Charging-state classification and the EVSE / EV protocol state machines.

Both machines are immutable ``MachineStatus`` values advanced by pure step
functions. The caller (normally ``pilotsim.sim``) owns sequencing: solve the
circuit, step the EVSE on its end's voltage, step the EV on its end's.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .circuit import DEFAULT_SOURCE, IDEAL_DIODE, OPEN, DiodeModel, solve_baseline
from .duty import current_to_duty, duty_to_current


class ChargingState(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"

    @property
    def rank(self) -> int:
        """Position in the high-pilot-voltage order; F (negative) is lowest."""
        return _RANK[self]

    def __str__(self) -> str:
        return self.value


_RANK = {ChargingState.A: 5, ChargingState.B: 4, ChargingState.C: 3, ChargingState.D: 2,
         ChargingState.E: 1, ChargingState.F: 0}

NOMINAL_VOLTS = {"A": 12.0, "B": 9.0, "C": 6.0, "D": 3.0, "E": 0.0}


@dataclass(frozen=True)
class ChargerProfile:
    """Electrical constants and measured state boundaries of one EVSE.

    ``v_cf`` is None for chargers without a state F. ``v_cd``/``v_de`` are
    only set on profiles that classify state D.
    """

    name: str
    v_ab: float
    v_bc: float
    v_cf: float | None = None
    max_amps: float = 16.0
    supply_volts: float = 220.0
    pwm_freq: float = 1000.0
    r1: float = 1000.0
    v_cd: float | None = None
    v_de: float | None = None
    e_band: float = 0.5
    latch_on_error: bool = False
    lambdas: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if not self.v_ab > self.v_bc:
            raise ValueError(f"{self.name}: need v_ab > v_bc")
        if self.v_cf is not None and not self.v_bc > self.v_cf:
            raise ValueError(f"{self.name}: need v_bc > v_cf")
        if (self.v_cd is None) != (self.v_de is None):
            raise ValueError(f"{self.name}: v_cd and v_de go together")
        if self.v_cd is not None and not self.v_bc > self.v_cd > self.v_de:
            raise ValueError(f"{self.name}: need v_bc > v_cd > v_de")
        if not 0 < self.max_amps <= 80:
            raise ValueError(f"{self.name}: max_amps must be in (0, 80]")

    @property
    def has_state_f(self) -> bool:
        return self.v_cf is not None

    @property
    def advertised_duty(self) -> float:
        return current_to_duty(self.max_amps)


@dataclass(frozen=True)
class EvProfile:
    """Vehicle-side loads, perception thresholds, detectors and battery.

    The perception thresholds default to the measured charger boundaries; the
    EV keeps its own state-F boundary even on chargers that have none.
    """

    name: str = "ev"
    r_state_b: float = 2740.0
    r_state_c: float = 882.0
    r_state_d: float = 246.0
    diode: DiodeModel = IDEAL_DIODE
    error_latch: bool = True
    expected_band_tolerance: float = 2.0
    battery_capacity_kwh: float = 75.0
    charge_limit_fraction: float = 0.9
    initial_soc: float = 0.5
    v_ab: float = 10.6
    v_bc: float = 7.8
    v_cf: float | None = 4.4
    v_cd: float | None = None
    v_de: float | None = None
    e_band: float = 0.5
    handshake_delay: float = 0.5
    debounce: float = 0.2
    parasitic_amps: float = 6.0
    forced_power_to_battery: bool = False

    def __post_init__(self):
        if not self.r_state_b > self.r_state_c > self.r_state_d > 0:
            raise ValueError("need r_state_b > r_state_c > r_state_d > 0")
        if not 0 < self.charge_limit_fraction <= 1:
            raise ValueError("charge_limit_fraction must be in (0, 1]")
        if not 0 <= self.initial_soc <= 1:
            raise ValueError("initial_soc must be in [0, 1]")


def classify_state(v_high: float, profile) -> ChargingState:
    """Charging state implied by a high pilot level.

    ``profile`` is anything carrying the boundary attributes (``v_ab``,
    ``v_bc``, ``v_cf``, ``v_cd``, ``v_de``, ``e_band``), so chargers and
    EVs classify with the same rule.
    """
    if v_high > profile.v_ab:
        return ChargingState.A
    if v_high > profile.v_bc:
        return ChargingState.B
    if profile.v_cd is not None:
        if v_high > profile.v_cd:
            return ChargingState.C
        if v_high > profile.v_de:
            return ChargingState.D
        return ChargingState.E if v_high >= -profile.e_band else ChargingState.F
    if profile.v_cf is not None:
        return ChargingState.C if v_high > profile.v_cf else ChargingState.F
    # no state F: everything positive below B is C
    if v_high > profile.e_band:
        return ChargingState.C
    return ChargingState.E


def ev_load_for_state(state: ChargingState, profile: EvProfile) -> float:
    state = ChargingState(state)
    return {
        ChargingState.B: profile.r_state_b,
        ChargingState.C: profile.r_state_c,
        ChargingState.D: profile.r_state_d,
    }.get(state, OPEN)


def nominal_pilot(load: float, diode: DiodeModel = IDEAL_DIODE) -> float:
    """High pilot level an EV expects for its own load on a nominal EVSE."""
    return solve_baseline(DEFAULT_SOURCE, load, diode).v_ev


@dataclass(frozen=True)
class Perception:
    v_high: float
    duty: float = 100.0
    pwm_present: bool = False


@dataclass(frozen=True)
class MachineStatus:
    side: str
    state: ChargingState = ChargingState.A
    latched_error: bool = False
    presented_load: float = OPEN
    pwm_active: bool = False
    duty: float = 100.0
    contactor_closed: bool = False
    plugged: bool = False
    charge_requested: bool = False
    handshake_timer: float = 0.0
    fault_timer: float = 0.0
    error_kind: str | None = None


def evse_initial() -> MachineStatus:
    return MachineStatus(side="EVSE")


def ev_initial(plugged: bool = False, charge_requested: bool = False) -> MachineStatus:
    return MachineStatus(side="EV", plugged=plugged, charge_requested=charge_requested)


def evse_step(status: MachineStatus, measured_v_high: float, profile: ChargerProfile,
              dt: float) -> MachineStatus:
    if status.side != "EVSE":
        raise ValueError("evse_step needs an EVSE status")
    if status.latched_error:
        return status

    state = classify_state(measured_v_high, profile)
    if state is ChargingState.A:
        return replace(status, state=state, pwm_active=False, duty=100.0, contactor_closed=False)
    if state in (ChargingState.B, ChargingState.C, ChargingState.D):
        return replace(status, state=state, pwm_active=True, duty=profile.advertised_duty,
                       contactor_closed=state is ChargingState.C)
    return replace(status, state=state, pwm_active=False, duty=100.0, contactor_closed=False,
                   latched_error=profile.latch_on_error,
                   error_kind=status.error_kind or f"evse_state_{state.value}")


def ev_step(status: MachineStatus, perceived: Perception, profile: EvProfile,
            command: str | None = None, dt: float = 0.0) -> MachineStatus:
    """Advance the vehicle one tick.

    ``command`` is None, ``"start_charging"`` or ``"stop_charging"``. A
    latched vehicle ignores everything; only :func:`replug` clears it.
    """
    if status.side != "EV":
        raise ValueError("ev_step needs an EV status")
    if status.latched_error:
        return status
    if not status.plugged:
        return replace(status, state=ChargingState.A, presented_load=OPEN, handshake_timer=0.0,
                       fault_timer=0.0)

    wants = status.charge_requested
    if command == "start_charging":
        wants = True
    elif command == "stop_charging":
        wants = False
    elif command is not None:
        raise ValueError(f"unknown EV command {command!r}")

    seen = classify_state(perceived.v_high, profile)
    load = status.presented_load if status.presented_load != OPEN else profile.r_state_b

    low_pilot = profile.v_cf is not None and seen is ChargingState.F
    off_band = abs(perceived.v_high - nominal_pilot(load, profile.diode)) > profile.expected_band_tolerance
    fault_timer = status.fault_timer + dt if (low_pilot or off_band) else 0.0
    if fault_timer >= profile.debounce and (low_pilot or off_band):
        kind = "low_pilot_voltage" if low_pilot else "communication"
        if profile.error_latch:
            return replace(status, state=ChargingState.F, latched_error=True, presented_load=OPEN,
                           charge_requested=wants, handshake_timer=0.0, fault_timer=fault_timer,
                           error_kind=kind)
        return replace(status, state=ChargingState.F, presented_load=profile.r_state_b,
                       charge_requested=wants, handshake_timer=0.0, fault_timer=fault_timer,
                       error_kind=kind)

    offered = perceived.pwm_present and duty_to_current(perceived.duty).is_amps
    timer = 0.0
    if wants and offered and seen in (ChargingState.B, ChargingState.C):
        if load == profile.r_state_c:
            timer = status.handshake_timer
        else:
            timer = status.handshake_timer + dt
            if timer >= profile.handshake_delay:
                load = profile.r_state_c
    else:
        load = profile.r_state_b

    return replace(status, state=seen, presented_load=load, charge_requested=wants,
                   handshake_timer=timer, fault_timer=fault_timer)


def replug(status: MachineStatus) -> MachineStatus:
    """Physical reconnect: clears latches and restarts the handshake."""
    if status.side == "EV":
        return ev_initial(plugged=True, charge_requested=status.charge_requested)
    return evse_initial()


def detect_disparity(evse_state: ChargingState, ev_state: ChargingState, hold_time: float,
                     t_detect: float) -> bool:
    """True when the two ends have disagreed for at least ``t_detect`` seconds."""
    if hold_time < 0:
        raise ValueError("hold_time must be >= 0")
    return ChargingState(evse_state) != ChargingState(ev_state) and hold_time >= t_detect
