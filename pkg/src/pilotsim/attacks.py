"""Behavioral models of the five cable-borne attack circuits.

Two resistive attacks (serial insertion, parallel attachment) change the
steady-state pilot level; the automation circuit is a comparator-gated
version of the parallel attack; the TLC555 and fake-load circuits leave the
level alone and shorten the high time the vehicle sees.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import ClassVar

import numpy as np

from .circuit import (
    DEFAULT_SOURCE,
    IDEAL_DIODE,
    OPEN,
    DiodeModel,
    PilotSolution,
    PilotSource,
    solve_baseline,
    solve_parallel,
    solve_serial,
)
from .states import ChargerProfile, ChargingState, classify_state
from .waveform import PwmParams, SampledSignal, measure, rc_filter, rectify


@dataclass(frozen=True)
class SerialInsertionAttack:
    kind: ClassVar[str] = "serial"
    r_att: float
    switch_closed: bool = False  # closed = attack resistor bypassed

    @property
    def effective_r_att(self) -> float:
        return 0.0 if self.switch_closed else self.r_att


@dataclass(frozen=True)
class ParallelAttachmentAttack:
    kind: ClassVar[str] = "parallel"
    r_att: float
    switch_closed: bool = True  # open = branch disconnected
    diode: DiodeModel = IDEAL_DIODE

    @property
    def effective_r_att(self) -> float:
        return self.r_att if self.switch_closed else OPEN


@dataclass(frozen=True)
class AutomationAttack:
    """Comparator-gated current sink.

    The default divider puts 1.3 V on the comparator's inverting input at
    12 V (inactive) and 0.975 V at 9 V (active).
    """

    kind: ClassVar[str] = "automation"
    r4: float = 10_700.0
    r5: float = 1_300.0
    v_ref: float = 1.2
    drop_v: float = 3.0

    def __post_init__(self):
        if not (self.r4 > 0 and self.r5 > 0):
            raise ValueError("divider resistors must be positive")
        if not 0 < self.v_ref < 12:
            raise ValueError("v_ref must be in (0, 12) V")


@dataclass(frozen=True)
class Tlc555Attack:
    """Monostable timer re-shaping the vehicle-side pulse to 1.1*R*C."""

    kind: ClassVar[str] = "tlc555"
    r: float
    c: float
    level_offset: float = 0.0

    def __post_init__(self):
        if not (self.r > 0 and self.c > 0):
            raise ValueError("R and C must be positive")

    @property
    def pulse_width(self) -> float:
        return 1.1 * self.r * self.c

    @classmethod
    def for_duty(cls, duty: float, freq: float = 1000.0, r: float = 10_000.0, **kw) -> "Tlc555Attack":
        """Timer whose pulse gives ``duty`` percent at ``freq``."""
        return cls(r=r, c=duty / 100.0 / freq / (1.1 * r), **kw)


@dataclass(frozen=True)
class FakeLoadAttack:
    """Four-block fake-load circuit.

    ``state_gain`` and ``dt_gain`` are the divider ratios feeding the two RC
    sensing stages. ``mode="rc"`` gives the vehicle-side fall toward
    ``v_ss`` a finite slope (``tau_slew``); ``mode="ideal"`` switches
    instantly.
    """

    kind: ClassVar[str] = "fake_load"
    tau_state: float = 5e-3
    tau_dt: float = 1e-4
    v_ref: float = 1.2
    r_f: float = 666.7
    v_ss: float = -12.0
    state_gain: float = 0.6
    dt_gain: float = 0.23766
    mode: str = "rc"
    tau_slew: float = 5e-6

    def __post_init__(self):
        if self.tau_state < 50 * self.tau_dt:
            raise ValueError("tau_state must be at least 50 * tau_dt")
        if self.mode not in ("rc", "ideal"):
            raise ValueError("mode must be 'rc' or 'ideal'")
        if not (self.state_gain > 0 and self.dt_gain > 0 and self.r_f > 0):
            raise ValueError("gains and r_f must be positive")

    @classmethod
    def designed(cls, target_duty: float = 18.42, v_high: float = 6.0, freq: float = 1000.0,
                 tau_dt: float = 1e-4, **kw) -> "FakeLoadAttack":
        """Pick ``dt_gain`` so the DT ramp crosses ``v_ref`` after ``target_duty``.

        Assumes DT has fully discharged during the low half (``tau_dt`` well
        below the low time), so each ramp starts from 0 V.
        """
        v_ref = kw.get("v_ref", 1.2)
        t_cross = target_duty / 100.0 / freq
        gain = v_ref / (v_high * -math.expm1(-t_cross / tau_dt))
        kw.setdefault("tau_state", 50 * tau_dt)
        return cls(tau_dt=tau_dt, dt_gain=gain, **kw)


ATTACK_TYPES = {
    cls.kind: cls
    for cls in (SerialInsertionAttack, ParallelAttachmentAttack, AutomationAttack, Tlc555Attack, FakeLoadAttack)
}

RESISTIVE_KINDS = ("serial", "parallel")
DUTY_KINDS = ("tlc555", "fake_load")


def attack_from_dict(d: dict):
    """Build an attack from its tagged JSON form ``{"kind": ..., **params}``."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in ATTACK_TYPES:
        raise ValueError(f"unknown attack kind {kind!r}; known: {', '.join(ATTACK_TYPES)}")
    if isinstance(d.get("diode"), dict):
        d["diode"] = DiodeModel(**d["diode"])
    return ATTACK_TYPES[kind](**d)


def attack_to_dict(att) -> dict:
    return {"kind": att.kind, **asdict(att)}


def apply_serial(att: SerialInsertionAttack, src: PilotSource, r_v: float,
                 diode: DiodeModel = IDEAL_DIODE) -> PilotSolution:
    return solve_serial(src, att.effective_r_att, r_v, diode)


def apply_parallel(att: ParallelAttachmentAttack, src: PilotSource, r_v: float,
                   diode: DiodeModel = IDEAL_DIODE) -> PilotSolution:
    return solve_parallel(src, att.effective_r_att, r_v, diode, att.diode)


@dataclass(frozen=True)
class AutomationOutput:
    v_out: float
    active: bool
    pin4: float


def automation_output(att: AutomationAttack, v_pilot_high: float) -> AutomationOutput:
    if v_pilot_high < 0:
        raise ValueError("automation circuit sees the rectified (>= 0) pilot level")
    pin4 = v_pilot_high * att.r5 / (att.r4 + att.r5)
    active = pin4 < att.v_ref
    v_out = max(v_pilot_high - att.drop_v, 0.0) if active else v_pilot_high
    return AutomationOutput(v_out, active, pin4)


def apply_automation(att: AutomationAttack, src: PilotSource, r_v: float,
                     diode: DiodeModel = IDEAL_DIODE) -> PilotSolution:
    v = automation_output(att, solve_baseline(src, r_v, diode).v_evse).v_out
    return PilotSolution(v, v)


def tlc555_transform(att: Tlc555Attack, pwm: PwmParams) -> PwmParams:
    if not 0 < pwm.duty < 100:
        raise ValueError("TLC555 needs a switching PWM input (duty in (0, 100))")
    if att.pulse_width >= pwm.period:
        raise ValueError(f"1.1*R*C = {att.pulse_width:g} s does not fit in one {pwm.period:g} s period")
    return PwmParams(
        duty=100.0 * att.pulse_width * pwm.freq,
        v_high=pwm.v_high + att.level_offset,
        v_low=pwm.v_low,
        freq=pwm.freq,
    )


def tlc555_waveform(att: Tlc555Attack, signal: SampledSignal) -> SampledSignal:
    """Sample-level monostable: each pilot rising edge fires one pulse.

    The pilot drives the trigger through an inverter, so the timer fires on
    the pilot's rising edge. Triggers during a pulse are ignored.
    """
    x = signal.samples
    m = measure(signal)
    if m.freq is not None and att.pulse_width >= 1.0 / m.freq:
        raise ValueError("1.1*R*C does not fit in one pilot period")
    mid = 0.5 * (m.v_high + m.v_low)
    above = x > mid
    triggers = np.flatnonzero(~above[:-1] & above[1:]) + 1
    if len(x) and above[0]:
        triggers = np.concatenate(([0], triggers))
    width = int(round(att.pulse_width * signal.sample_rate))
    out = np.zeros(len(x), dtype=bool)
    busy_until = -1
    for i in triggers:
        if i < busy_until:
            continue
        out[i:i + width] = True
        busy_until = i + width
    return signal.with_samples(np.where(out, m.v_high + att.level_offset, m.v_low))


@dataclass(frozen=True, eq=False)
class FakeLoadResult:
    ev_side: SampledSignal
    evse_side: SampledSignal
    evse_load_trace: np.ndarray  # ohms seen by the EVSE at each sample
    state_signal: SampledSignal
    dt_signal: SampledSignal
    attack_mask: np.ndarray
    failed: bool
    failure_reason: str | None = None

    @property
    def attack_fraction(self) -> float:
        return float(self.attack_mask.mean())


def fake_load_transform(
    att: FakeLoadAttack,
    evse_signal: SampledSignal,
    r_v: float = 882.0,
    src: PilotSource = DEFAULT_SOURCE,
    charger: ChargerProfile | None = None,
) -> FakeLoadResult:
    """Run the fake-load circuit over a charger-side pilot waveform.

    Both sensing stages see the charger's pilot through their dividers. Per
    sample: State gate closed -> pass-through (M1); gate open and DT below
    ``v_ref`` -> pass-through (M2); gate open and DT above -> vehicle driven
    to ``v_ss`` while the charger sees ``r_f`` (M3/M4).
    """
    rect = rectify(evse_signal)
    state_sig = rc_filter(rect.with_samples(rect.samples * att.state_gain), att.tau_state)
    dt_sig = rc_filter(rect.with_samples(rect.samples * att.dt_gain), att.tau_dt)
    gate = state_sig.samples < att.v_ref
    attack = gate & (dt_sig.samples > att.v_ref)

    x = evse_signal.samples
    ev = np.where(attack, att.v_ss, x)
    if att.mode == "rc" and attack.any():
        ev = _slew_into_attack(x, attack, att.v_ss, att.tau_slew, evse_signal.sample_rate)

    v_fake = solve_baseline(src, att.r_f).v_evse
    evse = np.where(attack & (x > 0), v_fake, x)
    loads = np.where(attack, att.r_f, r_v)

    failed, reason = False, None
    if charger is not None and attack.any():
        seen = classify_state(v_fake, charger)
        if seen is not ChargingState.C:
            failed, reason = True, f"charger sees state {seen.value} ({v_fake:.3f} V) through r_f"
    return FakeLoadResult(
        ev_side=evse_signal.with_samples(ev),
        evse_side=evse_signal.with_samples(evse),
        evse_load_trace=loads,
        state_signal=state_sig,
        dt_signal=dt_sig,
        attack_mask=attack,
        failed=failed,
        failure_reason=reason,
    )


def _slew_into_attack(x: np.ndarray, attack: np.ndarray, v_ss: float, tau: float,
                      rate: float) -> np.ndarray:
    out = x.astype(float).copy()
    edges = np.flatnonzero(np.diff(np.concatenate(([False], attack, [False])).astype(int)))
    for start, stop in zip(edges[::2], edges[1::2]):
        v0 = x[start - 1] if start > 0 else x[start]
        t = np.arange(1, stop - start + 1) / rate
        out[start:stop] = v_ss + (v0 - v_ss) * np.exp(-t / tau)
    return out
