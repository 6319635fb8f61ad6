"""Attack-resistance feasibility: closed-form ranges and brute-force sweeps.

Ranges come from inverting the steady-state pilot equations against a
charger's measured state boundaries. Sweeps evaluate the forward solver on
a resistance grid and classify each point, which is how the ranges are
cross-checked.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .circuit import IDEAL_DIODE, OPEN, DiodeModel, PilotSource, solve_parallel, solve_serial
from .states import ChargerProfile, ChargingState, EvProfile, classify_state

PARALLEL_GOALS = ("B->C", "C->F", "B->F")
SERIAL_GOALS = ("A<-B->C", "B<-C->F")

_GOAL_ALIASES = {
    "B→C": "B->C", "C→F": "C->F", "B→F": "B->F",
    "A←B→C": "A<-B->C", "B←C→F": "B<-C->F",
}


def normalize_goal(goal: str) -> str:
    goal = goal.strip().replace(" ", "")
    return _GOAL_ALIASES.get(goal, goal)


@dataclass(frozen=True)
class FeasibilityRange:
    """Working range of the attack resistance; ``None`` bounds are unbounded.

    ``r_min is None`` means "down to 0 ohm"; ``r_max is None`` means "up to
    open". An empty range has ``empty=True`` and a note saying why.
    """

    attack_kind: str
    goal: str
    r_min: float | None
    r_max: float | None
    notes: tuple = ()
    thresholds: dict = field(default_factory=dict, compare=False)
    empty: bool = False

    def __post_init__(self):
        if self.r_min is not None and self.r_max is not None and self.r_min > self.r_max:
            object.__setattr__(self, "empty", True)

    def contains(self, r: float) -> bool:
        if self.empty:
            return False
        lo = 0.0 if self.r_min is None else self.r_min
        hi = math.inf if self.r_max is None else self.r_max
        return lo <= r <= hi and r > 0

    def as_dict(self) -> dict:
        return {
            "attack_kind": self.attack_kind,
            "goal": self.goal,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "empty": self.empty,
            "thresholds": dict(self.thresholds),
            "notes": list(self.notes),
        }


def source_for(charger: ChargerProfile) -> PilotSource:
    return PilotSource(r1=charger.r1)


def _lower_c_boundary(charger: ChargerProfile, ev: EvProfile) -> tuple[float | None, str | None]:
    if charger.v_cf is not None:
        return charger.v_cf, None
    if ev.v_cf is not None:
        return ev.v_cf, f"{charger.name} has no state F; lower C bound taken from the EV's F boundary ({ev.v_cf} V)"
    return None, None


def parallel_r_for_voltage(v: float, r_v: float, src: PilotSource,
                           ev_diode: DiodeModel = IDEAL_DIODE,
                           attack_diode: DiodeModel = IDEAL_DIODE) -> float | None:
    """Parallel attack resistance that puts the shared pilot level at ``v``.

    Returns ``OPEN`` when the EV load alone already holds the level at or
    below ``v``, and None when no positive resistance can reach it.
    """
    if not v > attack_diode.forward_drop:
        return None
    i_r1 = (src.v_high - v) / src.r1
    i_ev = max(v - ev_diode.forward_drop, 0.0) / r_v
    spare = i_r1 - i_ev
    if spare <= 0:
        return OPEN
    return (v - attack_diode.forward_drop) / spare


def parallel_range(goal: str, charger: ChargerProfile, ev: EvProfile,
                   attack_diode: DiodeModel | None = None) -> FeasibilityRange:
    goal = normalize_goal(goal)
    if goal not in PARALLEL_GOALS:
        raise ValueError(f"parallel goal must be one of {PARALLEL_GOALS}, got {goal!r}")
    src = source_for(charger)
    att_d = ev.diode if attack_diode is None else attack_diode

    def inv(v, r_v):
        return parallel_r_for_voltage(v, r_v, src, ev.diode, att_d)

    if goal == "B->C":
        low, note = _lower_c_boundary(charger, ev)
        r_max = inv(charger.v_bc, ev.r_state_b)
        thresholds = {"enter_c_with_b_load": r_max}
        notes = []
        if low is None:
            r_min = None
        else:
            # once the EV reacts to C it switches to its C load; that must not drop into F
            r_min = inv(low, ev.r_state_c)
            thresholds["f_with_c_load"] = r_min
            thresholds["f_with_b_load"] = inv(low, ev.r_state_b)
        if note:
            notes.append(note)
        return FeasibilityRange("parallel", goal, r_min, r_max, tuple(notes), thresholds)

    if not charger.has_state_f:
        return FeasibilityRange("parallel", goal, None, None,
                                (f"{charger.name} has no state F",), {}, empty=True)
    r_v = ev.r_state_c if goal == "C->F" else ev.r_state_b
    r_max = inv(charger.v_cf, r_v)
    return FeasibilityRange("parallel", goal, None, r_max, (), {"enter_f": r_max})


def serial_r_for_ev_voltage(v: float, r_v: float, src: PilotSource, diode: DiodeModel = IDEAL_DIODE) -> float | None:
    i = (v - diode.forward_drop) / r_v
    if i <= 0:
        return None
    r = (src.v_high - diode.forward_drop) / i - src.r1 - r_v
    return r if r >= 0 else None


def serial_r_for_evse_voltage(v: float, r_v: float, src: PilotSource, diode: DiodeModel = IDEAL_DIODE) -> float | None:
    i = (src.v_high - v) / src.r1
    if i <= 0:
        return None
    r = (src.v_high - diode.forward_drop) / i - src.r1 - r_v
    return r if r >= 0 else None


def serial_disparity_threshold(lam: float, r_v: float, src: PilotSource,
                               diode: DiodeModel = IDEAL_DIODE) -> float | None:
    """Smallest series resistance giving ``v_evse - v_ev >= lam``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    drive = src.v_high - diode.forward_drop
    if drive <= lam:
        return None
    return lam * (src.r1 + r_v) / (drive - lam)


def serial_range(goal: str, charger: ChargerProfile, ev: EvProfile,
                 lam: float | None = None) -> FeasibilityRange:
    """Serial-insertion thresholds for a two-sided state split.

    ``r_min`` is the guaranteed-disparity threshold; the thresholds dict also
    carries where each side alone crosses its boundary.
    """
    goal = normalize_goal(goal)
    if goal not in SERIAL_GOALS:
        raise ValueError(f"serial goal must be one of {SERIAL_GOALS}, got {goal!r}")
    src = source_for(charger)
    notes = []
    if goal == "A<-B->C":
        state, r_v, upper, lower = "B", ev.r_state_b, charger.v_ab, charger.v_bc
    else:
        state, r_v, upper = "C", ev.r_state_c, charger.v_bc
        lower, note = _lower_c_boundary(charger, ev)
        if note:
            notes.append(note)
        if lower is None:
            return FeasibilityRange("serial", goal, None, None, ("no lower C boundary",), {}, empty=True)

    if lam is None:
        lam = charger.lambdas.get(state, upper - lower)
    guaranteed = serial_disparity_threshold(lam, r_v, src, ev.diode)
    thresholds = {
        "lambda": lam,
        "ev_side": serial_r_for_ev_voltage(lower, r_v, src, ev.diode),
        "evse_side": serial_r_for_evse_voltage(upper, r_v, src, ev.diode),
        "guaranteed_disparity": guaranteed,
    }
    if guaranteed is None:
        return FeasibilityRange("serial", goal, None, None, tuple(notes + ["lambda not reachable"]),
                                thresholds, empty=True)
    return FeasibilityRange("serial", goal, guaranteed, None, tuple(notes), thresholds)


def fake_load_rf_range(charger: ChargerProfile, ev: EvProfile) -> FeasibilityRange:
    """Fake-load resistances that keep the charger classifying state C."""
    src = source_for(charger)
    low, note = _lower_c_boundary(charger, ev)
    if low is None:
        low = charger.e_band

    def r_for(v):
        return v * src.r1 / (src.v_high - v)

    return FeasibilityRange("fake_load", "hold C", r_for(low), r_for(charger.v_bc),
                            (note,) if note else ())


SWEEP_COLUMNS = ("r_att", "v_evse", "v_ev", "evse_state", "ev_state", "outcome")


def _outcome(evse: ChargingState, ev_state: ChargingState, initial: ChargingState) -> str:
    if ChargingState.F in (evse, ev_state):
        return "error_F"
    if evse != ev_state:
        return "disparity"
    if evse == initial:
        return "none"
    return "state_switch"


def sweep_point(attack_kind: str, r_att: float, charger: ChargerProfile, ev: EvProfile,
                initial_state: str = "B", follow_ev: bool = False) -> dict:
    src = source_for(charger)
    initial = ChargingState(initial_state)
    r_v = {ChargingState.B: ev.r_state_b, ChargingState.C: ev.r_state_c}[initial]

    def solve(load):
        if attack_kind == "serial":
            return solve_serial(src, r_att, load, ev.diode)
        if attack_kind == "parallel":
            return solve_parallel(src, r_att, load, ev.diode)
        raise ValueError(f"sweeps cover serial/parallel attacks, not {attack_kind!r}")

    sol = solve(r_v)
    ev_state = classify_state(sol.v_ev, ev)
    if follow_ev and initial is ChargingState.B and ev_state is ChargingState.C:
        sol = solve(ev.r_state_c)
        ev_state = classify_state(sol.v_ev, ev)
    evse_state = classify_state(sol.v_evse, charger)
    return {
        "r_att": r_att,
        "v_evse": sol.v_evse,
        "v_ev": sol.v_ev,
        "evse_state": evse_state.value,
        "ev_state": ev_state.value,
        "outcome": _outcome(evse_state, ev_state, initial),
    }


def sweep(attack_kind: str, r_grid, charger: ChargerProfile, ev: EvProfile,
          initial_state: str = "B", follow_ev: bool = False) -> list[dict]:
    """One classified row per grid resistance (grid must be ascending)."""
    grid = list(r_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("r_grid must be sorted ascending")
    return [sweep_point(attack_kind, r, charger, ev, initial_state, follow_ev) for r in grid]


def transitions(rows: list[dict], key: str = "outcome") -> list[tuple]:
    """``(r_before, r_after, value_before, value_after)`` wherever ``key`` changes."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if a[key] != b[key]:
            out.append((a["r_att"], b["r_att"], a[key], b[key]))
    return out


def write_sweep_csv(rows: list[dict], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(row[k])) if isinstance(row[k], float) else row[k]) for k in SWEEP_COLUMNS})
