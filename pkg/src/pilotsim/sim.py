"""Fixed-step co-simulation of EVSE, cable (with optional attack) and EV.

Each tick: apply the tick's timeline events, solve the pilot circuit for
the loads currently presented, step the EVSE on its end's voltage, step
the EV on its end's voltage and perceived duty, then account energy and
flags. Duty-cycle attacks are resolved at waveform level once per distinct
(duty, level) pair and cached.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

from .analysis import source_for
from .attacks import (
    DUTY_KINDS,
    RESISTIVE_KINDS,
    AutomationAttack,
    ParallelAttachmentAttack,
    SerialInsertionAttack,
    Tlc555Attack,
    apply_automation,
    attack_from_dict,
    attack_to_dict,
    fake_load_transform,
    tlc555_waveform,
)
from .circuit import OPEN, PilotSolution, solve_baseline, solve_parallel, solve_serial
from .duty import duty_to_current
from .profiles import ProfileSet, charger_from_dict, charger_to_dict, ev_from_dict, ev_to_dict
from .profiles import load as load_profiles
from .states import (
    ChargerProfile,
    ChargingState,
    EvProfile,
    Perception,
    detect_disparity,
    ev_initial,
    ev_step,
    evse_initial,
    evse_step,
    replug,
)
from .waveform import PwmParams, measure, synthesize

EVENT_KINDS = (
    "plug_in", "unplug", "ev_stop_charging", "ev_start_charging",
    "engage_attack", "disengage_attack", "set_r_att", "replug",
)

OUTCOMES = ("normal", "dos", "forced_charging", "error_latched", "rate_reduced")

TRACE_COLUMNS = (
    "t", "v_evse", "v_ev", "evse_state", "ev_state", "advertised_amps", "ev_decoded_amps",
    "drawn_amps", "battery_amps", "soc", "contactor_closed", "ev_latched",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    value: float | None = None

    def as_dict(self) -> dict:
        d = {"t": self.t, "kind": self.kind}
        if self.value is not None:
            d["value"] = self.value
        return d


@dataclass(frozen=True)
class Scenario:
    charger: ChargerProfile
    ev: EvProfile
    attack: object = None
    timeline: tuple = ()
    duration: float = 10.0
    tick: float = 0.01
    t_detect: float = 0.5
    attack_engaged: bool = False
    name: str = "scenario"

    def validate(self) -> None:
        if not self.tick > 0:
            raise ScenarioError("tick must be positive")
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        times = [e.t for e in self.timeline]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ScenarioError("timeline events must be sorted by time")
        if times and (times[0] < 0 or times[-1] > self.duration):
            raise ScenarioError("event times must lie within [0, duration]")
        engaged = self.attack_engaged
        for e in self.timeline:
            if e.kind not in EVENT_KINDS:
                raise ScenarioError(f"unknown event kind {e.kind!r}")
            if e.kind in ("engage_attack", "disengage_attack", "set_r_att") and self.attack is None:
                raise ScenarioError(f"{e.kind} at t={e.t} but the scenario has no attack")
            if e.kind == "engage_attack":
                engaged = True
            elif e.kind == "disengage_attack":
                engaged = False
            elif e.kind == "set_r_att":
                if self.attack.kind not in RESISTIVE_KINDS:
                    raise ScenarioError("set_r_att needs a serial or parallel attack")
                if not engaged:
                    raise ScenarioError(f"set_r_att at t={e.t} while the attack is disengaged")
                if e.value is None or not e.value >= 0:
                    raise ScenarioError("set_r_att needs a resistance value >= 0")


@dataclass
class SimReport:
    scenario_name: str
    tick: float
    supply_volts: float
    trace: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    delivered_energy_kwh: float = 0.0
    battery_energy_kwh: float = 0.0
    final_evse_state: str = "A"
    final_ev_state: str = "A"
    max_rate_reduction: dict | None = None

    def as_dict(self, include_trace: bool = True) -> dict:
        d = {
            "scenario": self.scenario_name,
            "tick": self.tick,
            "supply_volts": self.supply_volts,
            "flags": dict(self.flags),
            "delivered_energy_kwh": self.delivered_energy_kwh,
            "battery_energy_kwh": self.battery_energy_kwh,
            "final_evse_state": self.final_evse_state,
            "final_ev_state": self.final_ev_state,
            "max_rate_reduction": self.max_rate_reduction,
            "outcome": classify_outcome(self).outcome,
        }
        if include_trace:
            d["trace"] = [dict(row) for row in self.trace]
        return d

    def to_json(self, include_trace: bool = True) -> str:
        return json.dumps(self.as_dict(include_trace), indent=2, sort_keys=True)

    def write_trace_csv(self, fh) -> None:
        w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.trace:
            w.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k]) for k in TRACE_COLUMNS})


@dataclass(frozen=True)
class OutcomeSummary:
    outcome: str
    detail: str

    def line(self) -> str:
        return f"{self.outcome}: {self.detail}"


def classify_outcome(report: SimReport) -> OutcomeSummary:
    f = report.flags
    if f.get("dos_communication_error") or f.get("low_pilot_voltage_error"):
        cause = "communication error" if f.get("dos_communication_error") else "low pilot voltage error"
        return OutcomeSummary("dos", f"{cause}; EVSE {report.final_evse_state}, EV {report.final_ev_state}")
    if f.get("latched"):
        return OutcomeSummary("error_latched", f"EVSE {report.final_evse_state}, EV {report.final_ev_state}")
    if f.get("unsolicited_energization"):
        return OutcomeSummary("forced_charging", "EVSE energized while the vehicle had stopped charging")
    if f.get("rate_reduced") and report.max_rate_reduction:
        r = report.max_rate_reduction
        return OutcomeSummary(
            "rate_reduced",
            f"{math.floor(r['advertised_amps'] + 1e-9):d} A -> {math.floor(r['ev_amps'] + 1e-9):d} A",
        )
    return OutcomeSummary("normal", f"EVSE {report.final_evse_state}, EV {report.final_ev_state}")


@lru_cache(maxsize=256)
def ev_side_duty(attack, duty: float, v_high: float, freq: float, charger: ChargerProfile | None = None,
                 v_low: float = -12.0) -> tuple:
    """Vehicle-side (duty, charger-side failure) under a duty-cycle attack.

    Runs the waveform model for 50 ms at 1 MHz and reads the last 30 ms.
    """
    pwm = PwmParams(duty=duty, v_high=v_high, v_low=v_low, freq=freq)
    sig = synthesize(pwm, 0.05)
    if isinstance(attack, Tlc555Attack):
        return measure(tlc555_waveform(attack, sig)).duty, False
    res = fake_load_transform(attack, sig, charger=charger)
    return measure(res.ev_side.slice_time(0.02)).duty, res.failed


def _tick_index(t: float, tick: float) -> int:
    return int(math.ceil(t / tick - 1e-9))


def _engage(attack, on: bool):
    if isinstance(attack, SerialInsertionAttack):
        return replace(attack, switch_closed=not on)
    if isinstance(attack, ParallelAttachmentAttack):
        return replace(attack, switch_closed=on)
    return attack


def _solve(attack, engaged: bool, src, load: float, ev: EvProfile) -> PilotSolution:
    if attack is None or not engaged or attack.kind in DUTY_KINDS:
        return solve_baseline(src, load, ev.diode)
    if isinstance(attack, SerialInsertionAttack):
        return solve_serial(src, attack.effective_r_att, load, ev.diode)
    if isinstance(attack, ParallelAttachmentAttack):
        return solve_parallel(src, attack.effective_r_att, load, ev.diode, attack.diode)
    if isinstance(attack, AutomationAttack):
        return apply_automation(attack, src, load, ev.diode)
    raise TypeError(f"unsupported attack {attack!r}")


def run(s: Scenario) -> SimReport:
    s.validate()
    charger, evp = s.charger, s.ev
    src = source_for(charger)
    n_ticks = int(round(s.duration / s.tick))

    attack = s.attack
    engaged = s.attack_engaged
    if attack is not None:
        attack = _engage(attack, engaged)

    by_tick: dict[int, list] = {}
    for e in s.timeline:
        by_tick.setdefault(_tick_index(e.t, s.tick), []).append(e)

    evse = evse_initial()
    ev = ev_initial()
    soc = evp.initial_soc
    hold = 0.0
    flags = {
        "dos_communication_error": False,
        "low_pilot_voltage_error": False,
        "unsolicited_energization": False,
        "overcharge_past_limit": False,
        "latched": False,
        "rate_reduced": False,
    }
    report = SimReport(s.name, s.tick, charger.supply_volts)
    energy_ws = 0.0
    battery_ws = 0.0
    worst = None
    bms_stop = False

    for k in range(n_ticks + 1):
        t = k * s.tick
        command = "stop_charging" if bms_stop else None
        bms_stop = False
        for e in by_tick.get(k, ()):
            if e.kind == "plug_in":
                ev = replace(ev_initial(plugged=True, charge_requested=ev.charge_requested),
                             presented_load=evp.r_state_b)
            elif e.kind == "unplug":
                ev = ev_initial(plugged=False, charge_requested=ev.charge_requested)
            elif e.kind == "replug":
                ev = replace(replug(ev), presented_load=evp.r_state_b)
                evse = replug(evse)
                hold = 0.0
            elif e.kind == "ev_start_charging":
                command = "start_charging"
            elif e.kind == "ev_stop_charging":
                command = "stop_charging"
            elif e.kind == "engage_attack":
                engaged = True
                attack = _engage(attack, True)
            elif e.kind == "disengage_attack":
                engaged = False
                attack = _engage(attack, False)
            elif e.kind == "set_r_att":
                attack = replace(attack, r_att=float(e.value))

        load = ev.presented_load if ev.plugged else OPEN
        sol = _solve(attack, engaged, src, load, evp)
        v_evse, v_ev = sol.v_evse, sol.v_ev

        # duty attacks act on the PWM the EVSE is emitting this tick
        duty_attack = attack if (engaged and attack is not None and attack.kind in DUTY_KINDS) else None
        ev_duty = evse.duty
        if duty_attack is not None and evse.pwm_active and ev.plugged:
            ev_duty, failed = ev_side_duty(duty_attack, round(evse.duty, 9), round(v_ev, 9), charger.pwm_freq,
                                         charger)
            if failed:
                v_evse = solve_baseline(src, duty_attack.r_f).v_evse

        evse = evse_step(evse, v_evse, charger, s.tick)
        if duty_attack is None:
            ev_duty = evse.duty
        perceived = Perception(v_high=v_ev, duty=ev_duty, pwm_present=evse.pwm_active and ev.plugged)
        ev = ev_step(ev, perceived, evp, command, s.tick) if ev.plugged else ev

        hold = hold + s.tick if evse.state != ev.state else 0.0
        if ev.plugged and detect_disparity(evse.state, ev.state, hold, s.t_detect):
            flags["dos_communication_error"] = True
            if evp.error_latch and not ev.latched_error:
                ev = replace(ev, state=ChargingState.F, latched_error=True, presented_load=OPEN,
                             error_kind="communication")
        if ev.latched_error:
            flags["latched"] = True
            if ev.error_kind == "communication":
                flags["dos_communication_error"] = True
            elif ev.error_kind == "low_pilot_voltage":
                flags["low_pilot_voltage_error"] = True
        if evse.latched_error:
            flags["latched"] = True

        advertised = 0.0
        if evse.pwm_active:
            advertised = min(duty_to_current(evse.duty).usable_amps(), charger.max_amps)
        ev_amps = duty_to_current(ev_duty).usable_amps() if perceived.pwm_present else 0.0

        drawn = battery = 0.0
        charging = False
        if evse.contactor_closed and ev.plugged:
            # judged on the load the EVSE actually saw this tick
            charging = load == evp.r_state_c
            if charging:
                drawn = battery = min(ev_amps, advertised)
                if advertised - ev_amps > 1.0:
                    flags["rate_reduced"] = True
                    if worst is None or advertised - ev_amps > worst["advertised_amps"] - worst["ev_amps"]:
                        worst = {"t": t, "advertised_amps": advertised, "ev_amps": ev_amps}
            else:
                drawn = min(evp.parasitic_amps, advertised)
                battery = drawn if evp.forced_power_to_battery else 0.0
                if drawn > 0:
                    flags["unsolicited_energization"] = True

        energy_ws += drawn * charger.supply_volts * s.tick
        battery_ws += battery * charger.supply_volts * s.tick
        if evp.battery_capacity_kwh > 0:
            soc += battery * charger.supply_volts * s.tick / 3.6e6 / evp.battery_capacity_kwh
        if battery > 0 and soc > evp.charge_limit_fraction:
            if charging:
                bms_stop = True
            else:
                flags["overcharge_past_limit"] = True

        report.trace.append({
            "t": round(t, 9),
            "v_evse": v_evse,
            "v_ev": v_ev,
            "evse_state": evse.state.value,
            "ev_state": ev.state.value,
            "advertised_amps": advertised,
            "ev_decoded_amps": ev_amps,
            "drawn_amps": drawn,
            "battery_amps": battery,
            "soc": soc,
            "contactor_closed": evse.contactor_closed,
            "ev_latched": ev.latched_error,
        })

    report.flags = flags
    report.delivered_energy_kwh = energy_ws / 3.6e6
    report.battery_energy_kwh = battery_ws / 3.6e6
    report.final_evse_state = evse.state.value
    report.final_ev_state = ev.state.value
    report.max_rate_reduction = worst
    return report


def scenario_from_dict(raw: dict, profiles: ProfileSet | None = None) -> Scenario:
    """Build a scenario from its JSON form (see README for the schema)."""
    profiles = profiles or load_profiles()
    known = {"name", "charger", "ev", "attack", "attack_engaged", "timeline", "duration", "tick", "t_detect"}
    extra = set(raw) - known
    if extra:
        raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(extra))}")
    charger = raw.get("charger", "charger2")
    charger = profiles.charger(charger) if isinstance(charger, str) else charger_from_dict("inline", charger)
    ev = raw.get("ev", "default")
    ev = profiles.ev(ev) if isinstance(ev, str) else ev_from_dict("inline", ev)
    attack = raw.get("attack")
    attack = attack_from_dict(attack) if attack else None
    try:
        timeline = tuple(Event(float(e["t"]), e["kind"], e.get("value")) for e in raw.get("timeline", []))
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed timeline entry: {exc}") from None
    s = Scenario(
        charger=charger,
        ev=ev,
        attack=attack,
        timeline=timeline,
        duration=float(raw.get("duration", 10.0)),
        tick=float(raw.get("tick", 0.01)),
        t_detect=float(raw.get("t_detect", 0.5)),
        attack_engaged=bool(raw.get("attack_engaged", False)),
        name=raw.get("name", "scenario"),
    )
    s.validate()
    return s


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "charger": charger_to_dict(s.charger),
        "ev": ev_to_dict(s.ev),
        "attack": attack_to_dict(s.attack) if s.attack is not None else None,
        "attack_engaged": s.attack_engaged,
        "timeline": [e.as_dict() for e in s.timeline],
        "duration": s.duration,
        "tick": s.tick,
        "t_detect": s.t_detect,
    }


def load_scenario(path, profiles: ProfileSet | None = None) -> Scenario:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    return scenario_from_dict(raw, profiles)


def bundled_scenario(name: str) -> Scenario:
    from importlib import resources

    text = resources.files("pilotsim.data").joinpath(f"scenarios/{name}.json").read_text()
    return scenario_from_dict(json.loads(text))


BUNDLED_SCENARIOS = ("benign", "forced_charging", "serial_dos", "tlc555_rate", "fake_load_rate")
