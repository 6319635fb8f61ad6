"""Mapping between pilot PWM duty cycle and advertised supply current."""

from __future__ import annotations

import math
from dataclasses import dataclass

MIN_AMPS = 6.0
MAX_AMPS = 80.0

DIGITAL_LOW = 3.0
DIGITAL_HIGH = 7.0
ANALOG_LOW = 10.0
BREAK = 85.0
SATURATE = 96.0

GAP_LOW_AMPS = BREAK * 0.6  # 51 A
GAP_HIGH_AMPS = (BREAK - 64.0) * 2.5  # 52.5 A


class DutyDomainError(ValueError):
    pass


@dataclass(frozen=True)
class AmpacityReading:
    """Decoded duty cycle.

    ``kind`` is one of ``"amps"``, ``"digital_comm"``, ``"invalid_low"``,
    ``"invalid_gap"``. ``amps`` is set only for ``kind == "amps"``.
    """

    kind: str
    amps: float | None = None

    @property
    def is_amps(self) -> bool:
        return self.kind == "amps"

    def usable_amps(self) -> float:
        return self.amps if self.kind == "amps" else 0.0

    def describe(self) -> str:
        if self.kind == "amps":
            return f"{self.amps:g} A"
        return {
            "digital_comm": "digital communication band",
            "invalid_low": "invalid (below 3%)",
            "invalid_gap": "invalid (7-10% gap)",
        }[self.kind]


def duty_to_current(duty: float) -> AmpacityReading:
    """Decode a duty cycle in percent."""
    if math.isnan(duty) or not 0.0 <= duty <= 100.0:
        raise DutyDomainError(f"duty cycle must be in [0, 100] %, got {duty}")
    if duty < DIGITAL_LOW:
        return AmpacityReading("invalid_low")
    if duty <= DIGITAL_HIGH:
        return AmpacityReading("digital_comm")
    if duty < ANALOG_LOW:
        return AmpacityReading("invalid_gap")
    if duty <= BREAK:
        return AmpacityReading("amps", duty * 0.6)
    return AmpacityReading("amps", (min(duty, SATURATE) - 64.0) * 2.5)


def current_to_duty(amps: float) -> float:
    """Duty cycle in percent that advertises ``amps``.

    Currents strictly between 51 A and 52.5 A have no exact encoding (the
    decoder jumps at 85%); they map to 85%, which advertises 51 A, so the
    EVSE never offers more than requested.
    """
    if math.isnan(amps) or not MIN_AMPS <= amps <= MAX_AMPS:
        raise DutyDomainError(f"current must be in [{MIN_AMPS:g}, {MAX_AMPS:g}] A, got {amps}")
    if amps <= GAP_LOW_AMPS:
        return min(amps / 0.6, BREAK)
    if amps < GAP_HIGH_AMPS:
        return BREAK
    # 52.5 A itself is only reached from just above the break
    return max(amps / 2.5 + 64.0, math.nextafter(BREAK, math.inf))
