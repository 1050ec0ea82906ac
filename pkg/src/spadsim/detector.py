"""Monte Carlo model of one avalanche single-photon detector.

Each output pulse is followed by one afterpulse opportunity: with probability
``afterpulse_prob`` a trap-release delay is drawn from an exponential with
mean ``afterpulse_tau_ns``. If that delay outlasts the dead time it becomes
the next pulse. Otherwise (or when no afterpulse was drawn) Poissonian
photo-electron arrivals are accumulated from the previous pulse until the
first one that lands at or after the dead time.

Because every interval restarts from the previous pulse, intervals are
independent and identically distributed for a fixed dead time, which is what
lets :func:`sample_intervals` draw them in vectorised batches.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import RngState

NS_PER_S = 1e9
DEFAULT_CHUNK = 1 << 18


@dataclass(frozen=True)
class ConstantDeadTime:
    dead_ns: float

    def __post_init__(self):
        if not (self.dead_ns >= 0 and math.isfinite(self.dead_ns)):
            raise ValueError(f"dead time must be >= 0, got {self.dead_ns}")

    def effective(self, f_hz: float) -> float:
        return self.dead_ns


@dataclass(frozen=True)
class RateRampDeadTime:
    """Dead time that grows linearly with rate between a knee and a maximum.

    Flat at ``dead_ns`` up to ``f_knee_hz``, linear up to ``dead_max_ns`` at
    ``f_max_hz``, and clamped beyond.
    """

    dead_ns: float
    f_knee_hz: float
    f_max_hz: float
    dead_max_ns: float

    def __post_init__(self):
        if not self.dead_ns >= 0:
            raise ValueError(f"dead time must be >= 0, got {self.dead_ns}")
        if not self.dead_max_ns >= self.dead_ns:
            raise ValueError("ramp maximum must not be below the base dead time")
        if not self.f_max_hz > self.f_knee_hz:
            raise ValueError("ramp f_max_hz must exceed f_knee_hz")

    def effective(self, f_hz: float) -> float:
        if f_hz <= self.f_knee_hz:
            return self.dead_ns
        if f_hz >= self.f_max_hz:
            return self.dead_max_ns
        frac = (f_hz - self.f_knee_hz) / (self.f_max_hz - self.f_knee_hz)
        return self.dead_ns + frac * (self.dead_max_ns - self.dead_ns)


DeadTimeModel = ConstantDeadTime | RateRampDeadTime

DEAD_TIME_PRESETS: dict[str, DeadTimeModel] = {
    "sim1": ConstantDeadTime(20.0),
    "sim2": ConstantDeadTime(13.8),
    "sim3": RateRampDeadTime(13.8, 5e6, 10e6, 16.8),
}


def effective_dead_time(model: DeadTimeModel, f_hz: float) -> float:
    if not f_hz > 0:
        raise ValueError(f"rate must be positive, got {f_hz}")
    return model.effective(f_hz)


@dataclass(frozen=True)
class DetectorParams:
    photon_rate_hz: float
    afterpulse_prob: float
    afterpulse_tau_ns: float
    dead_time: DeadTimeModel = field(default_factory=lambda: ConstantDeadTime(20.0))

    def __post_init__(self):
        if not (self.photon_rate_hz > 0 and math.isfinite(self.photon_rate_hz)):
            raise ValueError(f"photon_rate_hz must be positive, got {self.photon_rate_hz}")
        if not (self.afterpulse_tau_ns > 0 and math.isfinite(self.afterpulse_tau_ns)):
            raise ValueError(f"afterpulse_tau_ns must be positive, got {self.afterpulse_tau_ns}")
        if not 0 <= self.afterpulse_prob < 1:
            raise ValueError(f"afterpulse_prob must lie in [0, 1), got {self.afterpulse_prob}")

    @property
    def photon_mean_ns(self) -> float:
        return NS_PER_S / self.photon_rate_hz

    def with_rate(self, photon_rate_hz: float) -> "DetectorParams":
        return DetectorParams(photon_rate_hz, self.afterpulse_prob,
                              self.afterpulse_tau_ns, self.dead_time)

    def with_dead_time(self, dead_time: DeadTimeModel) -> "DetectorParams":
        return DetectorParams(self.photon_rate_hz, self.afterpulse_prob,
                              self.afterpulse_tau_ns, dead_time)


# Measured afterpulse characteristics of the two SLiK detectors.
D0_AFTERPULSE = (0.047, 33.0)
D1_AFTERPULSE = (0.043, 40.0)


def d0_params(photon_rate_hz: float, dead_time: DeadTimeModel | str = "sim2") -> DetectorParams:
    if isinstance(dead_time, str):
        dead_time = DEAD_TIME_PRESETS[dead_time]
    return DetectorParams(photon_rate_hz, *D0_AFTERPULSE, dead_time)


def d1_params(photon_rate_hz: float, dead_time: DeadTimeModel | str = "sim2") -> DetectorParams:
    if isinstance(dead_time, str):
        dead_time = DEAD_TIME_PRESETS[dead_time]
    return DetectorParams(photon_rate_hz, *D1_AFTERPULSE, dead_time)


class PulseKind(enum.Enum):
    AFTERPULSE = "afterpulse"
    PHOTON = "photon"


def next_pulse_interval(params: DetectorParams, rng: RngState,
                        dead_ns: float) -> tuple[float, PulseKind]:
    """Draw the delay from one output pulse to the next, one variate at a time."""
    if rng.uniform() <= params.afterpulse_prob:
        delay = rng.exp_variate(params.afterpulse_tau_ns)
        if delay >= dead_ns:
            return delay, PulseKind.AFTERPULSE
    mean = params.photon_mean_ns
    t = 0.0
    while True:
        t += rng.exp_variate(mean)
        if t >= dead_ns:
            return t, PulseKind.PHOTON


def sample_intervals(params: DetectorParams, rng: RngState, dead_ns: float,
                     n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`next_pulse_interval` for ``n`` consecutive pulses.

    Returns ``(intervals, is_afterpulse)``. The draw order differs from the
    scalar routine, but the distribution is identical. For a given seed,
    chunk sizes fix the output exactly.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    out = np.empty(n)
    after = rng.uniform_array(n) <= params.afterpulse_prob
    idx_after = np.flatnonzero(after)
    delays = rng.exp_array(params.afterpulse_tau_ns, idx_after.size)
    kept = delays >= dead_ns
    out[idx_after[kept]] = delays[kept]
    is_afterpulse = np.zeros(n, dtype=bool)
    is_afterpulse[idx_after[kept]] = True

    pending = np.flatnonzero(~is_afterpulse)
    acc = np.zeros(pending.size)
    mean = params.photon_mean_ns
    while pending.size:
        acc += rng.exp_array(mean, pending.size)
        done = acc >= dead_ns
        out[pending[done]] = acc[done]
        pending = pending[~done]
        acc = acc[~done]
    return out, is_afterpulse


def expected_interval(params: DetectorParams, dead_ns: float) -> float:
    """Closed-form mean of :func:`next_pulse_interval`.

    The afterpulse branch wins with probability ``P_a * exp(-d / tau_a)`` and
    then has mean ``d + tau_a`` (memorylessness); otherwise the first photon
    past the dead time arrives on average ``1 / f`` after it.
    """
    q = afterpulse_fraction(params, dead_ns)
    return q * (dead_ns + params.afterpulse_tau_ns) + (1 - q) * (dead_ns + params.photon_mean_ns)


def afterpulse_fraction(params: DetectorParams, dead_ns: float) -> float:
    return params.afterpulse_prob * math.exp(-dead_ns / params.afterpulse_tau_ns)


def expected_output_rate(params: DetectorParams, dead_ns: float) -> float:
    return NS_PER_S / expected_interval(params, dead_ns)


@dataclass(frozen=True, eq=False)
class PulseTrain:
    timestamps: np.ndarray
    params: DetectorParams
    dead_ns: float
    total_afterpulses: int
    total_photon_pulses: int

    def __len__(self):
        return self.timestamps.size

    def gaps(self) -> np.ndarray:
        return np.diff(self.timestamps)


class PulseSource:
    """Endless pulse stream of one detector, produced chunk by chunk."""

    def __init__(self, params: DetectorParams, rng: RngState | int,
                 dead_ns: float | None = None, chunk: int = DEFAULT_CHUNK):
        self.params = params
        self.rng = rng if isinstance(rng, RngState) else RngState(rng)
        if dead_ns is None:
            dead_ns = effective_dead_time(params.dead_time, params.photon_rate_hz)
        if not dead_ns >= 0:
            raise ValueError(f"dead time must be >= 0, got {dead_ns}")
        self.dead_ns = float(dead_ns)
        self.chunk = int(chunk)
        self.t_last = 0.0
        self.n_afterpulses = 0
        self.n_pulses = 0

    def next_chunk(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(timestamps, is_afterpulse)`` for the next ``chunk`` pulses."""
        gaps, after = sample_intervals(self.params, self.rng, self.dead_ns, self.chunk)
        times = np.cumsum(gaps)
        times += self.t_last
        self.t_last = float(times[-1])
        self.n_afterpulses += int(after.sum())
        self.n_pulses += self.chunk
        return times, after


def generate_pulse_train(params: DetectorParams, seed: RngState | int, *,
                         n_pulses: int | None = None,
                         duration_ns: float | None = None,
                         dead_ns: float | None = None,
                         chunk: int = DEFAULT_CHUNK) -> PulseTrain:
    """Generate a pulse train starting from a pulse at t = 0.

    Exactly one of ``n_pulses`` and ``duration_ns`` must be given. The dead
    time defaults to the model's value at the configured photon rate.
    """
    if (n_pulses is None) == (duration_ns is None):
        raise ValueError("give exactly one of n_pulses and duration_ns")
    src = PulseSource(params, seed, dead_ns, chunk)
    times: list[np.ndarray] = []
    kinds: list[np.ndarray] = []
    if n_pulses is not None:
        remaining = int(n_pulses)
        while remaining > 0:
            t, a = src.next_chunk()
            times.append(t[:remaining])
            kinds.append(a[:remaining])
            remaining -= t.size
    elif duration_ns > 0:
        while True:
            t, a = src.next_chunk()
            if t[-1] > duration_ns:
                k = int(np.searchsorted(t, duration_ns, side="right"))
                times.append(t[:k])
                kinds.append(a[:k])
                break
            times.append(t)
            kinds.append(a)
    ts = np.concatenate(times) if times else np.empty(0)
    ap = np.concatenate(kinds) if kinds else np.empty(0, dtype=bool)
    ts.flags.writeable = False
    n_after = int(ap.sum())
    return PulseTrain(ts, params, src.dead_ns, n_after, ts.size - n_after)
