"""Sampled pilot waveforms: PWM synthesis, measurement, rectification, RC stages."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .circuit import IDEAL_DIODE, DiodeModel

DEFAULT_RATE = 1_000_000.0
MIN_SAMPLES_PER_PERIOD = 100


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class PwmParams:
    duty: float
    v_high: float
    v_low: float = -12.0
    freq: float = 1000.0

    def __post_init__(self):
        if not self.freq > 0:
            raise ValueError("freq must be positive")
        if not self.v_high > self.v_low:
            raise ValueError("need v_high > v_low")
        if not 0.0 <= self.duty <= 100.0:
            raise ValueError("duty must be in [0, 100] %")

    @property
    def period(self) -> float:
        return 1.0 / self.freq


@dataclass(frozen=True, eq=False)
class SampledSignal:
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate

    def slice_time(self, start: float, stop: float | None = None) -> "SampledSignal":
        i0 = int(round(start * self.sample_rate))
        i1 = None if stop is None else int(round(stop * self.sample_rate))
        return SampledSignal(self.sample_rate, self.samples[i0:i1])

    def with_samples(self, samples) -> "SampledSignal":
        return SampledSignal(self.sample_rate, samples)


@dataclass(frozen=True)
class Measurement:
    v_high: float
    v_low: float
    duty: float
    freq: float | None

    def as_dict(self) -> dict:
        return {"v_high": self.v_high, "v_low": self.v_low, "duty": self.duty, "freq": self.freq}


@dataclass(frozen=True)
class RcStage:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def synthesize(p: PwmParams, duration: float, rate: float = DEFAULT_RATE) -> SampledSignal:
    """Ideal rectangular pilot, starting on a rising edge."""
    spp = rate / p.freq
    if spp < MIN_SAMPLES_PER_PERIOD:
        raise SamplingError(f"{rate:g} Hz gives {spp:.1f} samples/period, need >= {MIN_SAMPLES_PER_PERIOD}")
    if duration * p.freq < 10 - 1e-9:
        raise SamplingError("duration must cover at least 10 PWM periods")
    n = int(round(duration * rate))
    # sample i sits at phase (i mod spp); exact for integer spp, uniform otherwise
    phase = np.mod(np.arange(n), spp)
    high = phase < round(p.duty / 100.0 * spp) if float(spp).is_integer() else phase < p.duty / 100.0 * spp
    return SampledSignal(rate, np.where(high, p.v_high, p.v_low))


def _rising_edges(x: np.ndarray, mid: float) -> np.ndarray:
    above = x > mid
    return np.flatnonzero(~above[:-1] & above[1:]) + 1


def measure(s: SampledSignal) -> Measurement:
    """Oscilloscope-style reading of levels, duty and frequency.

    The duty threshold is the midlevel between the extremes, so rectified
    and offset signals measure correctly. Duty is taken over whole periods
    between the first and last rising crossing when there are any.
    """
    x = s.samples
    if len(x) == 0:
        raise ValueError("empty signal")
    hi, lo = float(x.max()), float(x.min())
    if hi - lo < 1e-9:
        level = float(x.mean())
        return Measurement(level, level, 100.0 if level > 0 else 0.0, None)
    mid = 0.5 * (hi + lo)
    edges = _rising_edges(x, mid)
    window = x[edges[0]:edges[-1]] if len(edges) >= 2 else x
    above = window > mid
    freq = None
    if len(edges) >= 2:
        freq = float(s.sample_rate * (len(edges) - 1) / (edges[-1] - edges[0]))
    return Measurement(
        v_high=float(window[above].mean()),
        v_low=float(window[~above].mean()),
        duty=100.0 * float(above.mean()),
        freq=freq,
    )


def rectify(s: SampledSignal, diode: DiodeModel = IDEAL_DIODE) -> SampledSignal:
    x = s.samples
    return s.with_samples(np.where(x > 0, np.maximum(x - diode.forward_drop, 0.0), 0.0))


def rc_filter(s: SampledSignal, stage: RcStage | float, y0: float | None = None) -> SampledSignal:
    """First-order low-pass with the input held constant over each sample.

    ``y[n+1] = y[n] + (x[n] - y[n]) * (1 - exp(-dt/tau))``, ``y[0] = x[0]``
    unless ``y0`` is given.
    """
    tau = stage.tau if isinstance(stage, RcStage) else float(stage)
    if not tau > 0:
        raise ValueError("tau must be positive")
    if s.dt > tau / 10:
        raise SamplingError(f"sample period {s.dt:g} s exceeds tau/10 = {tau / 10:g} s")
    x = s.samples
    if len(x) == 0:
        return s
    start = x[0] if y0 is None else y0
    alpha = -math.expm1(-s.dt / tau)
    tail, _ = lfilter([alpha], [1.0, alpha - 1.0], x[:-1], zi=[(1.0 - alpha) * start])
    return s.with_samples(np.concatenate(([start], tail)))


def write_csv(s: SampledSignal, fh) -> None:
    """Write ``time_s,volts`` rows to an open text file."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time_s", "volts"])
    for t, v in zip(s.times(), s.samples):
        w.writerow([f"{t:.9g}", repr(float(v))])


def read_csv(fh) -> SampledSignal:
    rows = list(csv.reader(fh))
    if not rows or rows[0] != ["time_s", "volts"]:
        raise ValueError("expected a 'time_s,volts' header")
    t = np.array([float(r[0]) for r in rows[1:]])
    v = np.array([float(r[1]) for r in rows[1:]])
    if len(t) < 2:
        raise ValueError("need at least two samples")
    rate = (len(t) - 1) / (t[-1] - t[0])
    return SampledSignal(float(round(rate, 6)), v)
