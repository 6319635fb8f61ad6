"""Steady-state solver for the control-pilot resistive network.

Only the positive half-cycle is solved here. During the negative half the
EV's series diode blocks, no current flows, and both ends of the cable sit
at the source's low level.

Resistances are plain floats in ohms. A disconnected branch is ``OPEN``
(IEEE infinity), which is exact under the algebra used here: it is the
identity for parallel combination and absorbing for series combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

OPEN = math.inf

R1_NOMINAL = 1000.0


def is_open(r: float) -> bool:
    return math.isinf(r) and r > 0


def _check_resistance(name: str, r: float) -> None:
    if math.isnan(r) or r < 0:
        raise ValueError(f"{name} must be >= 0 ohms or OPEN, got {r!r}")


@dataclass(frozen=True)
class DiodeModel:
    """Fixed-drop diode. ``forward_drop=0`` is the ideal rectifier."""

    forward_drop: float = 0.0
    blocks_negative: bool = True

    def __post_init__(self):
        if not 0.0 <= self.forward_drop < 1.0:
            raise ValueError(f"forward_drop must be in [0, 1) V, got {self.forward_drop}")
        if not self.blocks_negative:
            raise ValueError("pilot diodes always block the negative half-cycle")


IDEAL_DIODE = DiodeModel()


@dataclass(frozen=True)
class PilotSource:
    v_high: float = 12.0
    v_low: float = -12.0
    r1: float = R1_NOMINAL

    def __post_init__(self):
        if not self.v_high > 0 > self.v_low:
            raise ValueError("pilot source needs v_high > 0 > v_low")
        _check_resistance("r1", self.r1)
        if self.r1 == 0 or is_open(self.r1):
            raise ValueError("r1 must be finite and positive")


DEFAULT_SOURCE = PilotSource()


@dataclass(frozen=True)
class PilotSolution:
    """High-level pilot voltages seen at the EVSE and EV ends of the cable."""

    v_evse: float
    v_ev: float

    @property
    def v_diff(self) -> float:
        return self.v_evse - self.v_ev

    def as_dict(self) -> dict:
        return {"v_evse": self.v_evse, "v_ev": self.v_ev, "v_diff": self.v_diff}


def combine_parallel(r_v: float, r_att: float) -> float:
    """Equivalent resistance of two branches in parallel."""
    _check_resistance("r_v", r_v)
    _check_resistance("r_att", r_att)
    if is_open(r_att):
        return r_v
    if is_open(r_v):
        return r_att
    if r_v == 0 or r_att == 0:
        return 0.0
    return r_v * r_att / (r_v + r_att)


def solve_baseline(src: PilotSource, r_v: float, diode: DiodeModel = IDEAL_DIODE) -> PilotSolution:
    """Pilot voltage with the EV load connected directly (no attack)."""
    _check_resistance("r_v", r_v)
    if is_open(r_v):
        return PilotSolution(src.v_high, src.v_high)
    drive = max(src.v_high - diode.forward_drop, 0.0)
    v = src.v_high - src.r1 * drive / (src.r1 + r_v)
    return PilotSolution(v, v)


def solve_serial(
    src: PilotSource, r_att: float, r_v: float, diode: DiodeModel = IDEAL_DIODE
) -> PilotSolution:
    """Attack resistor in series between the EVSE and the EV inlet."""
    _check_resistance("r_att", r_att)
    _check_resistance("r_v", r_v)
    if is_open(r_v):
        return PilotSolution(src.v_high, src.v_high)
    if is_open(r_att):
        # cable broken: no current, EV inlet pulled to ground through its load
        return PilotSolution(src.v_high, 0.0)
    drive = max(src.v_high - diode.forward_drop, 0.0)
    total = src.r1 + r_att + r_v
    v_evse = src.v_high - src.r1 * drive / total
    v_ev = src.v_high - (src.r1 + r_att) * drive / total
    return PilotSolution(v_evse, v_ev)


def solve_parallel(
    src: PilotSource,
    r_att: float,
    r_v: float,
    diode: DiodeModel = IDEAL_DIODE,
    attack_diode: DiodeModel | None = None,
) -> PilotSolution:
    """Attack branch (resistor + diode) in parallel with the EV load.

    With matching diode drops the two branches reduce to one equivalent
    load. Otherwise the node equation is solved over the set of branches
    that are actually forward biased.
    """
    attack_diode = diode if attack_diode is None else attack_diode
    if attack_diode.forward_drop == diode.forward_drop:
        return solve_baseline(src, combine_parallel(r_v, r_att), diode)

    branches = [(r, d.forward_drop) for r, d in ((r_v, diode), (r_att, attack_diode)) if not is_open(r)]
    for r, _ in branches:
        _check_resistance("branch", r)
        if r == 0:
            raise ValueError("unequal diode drops with a shorted branch are not supported")
    conducting = list(branches)
    while True:
        g = 1.0 / src.r1 + sum(1.0 / r for r, _ in conducting)
        i = src.v_high / src.r1 + sum(vd / r for r, vd in conducting)
        v = i / g
        still = [(r, vd) for r, vd in conducting if v > vd]
        if len(still) == len(conducting):
            return PilotSolution(v, v)
        conducting = still
