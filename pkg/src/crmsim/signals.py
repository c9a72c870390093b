"""Deterministic signal generators and schedules.

Random signals must reproduce bit-for-bit across platforms and
backends, so randomness comes from an explicit splitmix64 generator
(the seeding/mixing constants below) feeding a Box-Muller transform,
not from library RNGs whose streams may change between releases.

All stochastic signals are sample-and-hold: Gaussian values drawn at a
fixed rate, clamped to a hard saturation bound, and held constant
between sample instants.  The saturation bound is the quantity the
stability arguments consume, so it is exposed on the handle.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TWO_PI = 6.283185307179586


class SplitMix64:
    """Minimal splitmix64 stream; next() yields 64-bit unsigned ints."""

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next(self):
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return (z ^ (z >> 31)) & MASK64


def mix_seed(seed, tag):
    """Derive a substream seed from (seed, tag); used so the
    disturbance and noise channels of one scenario never share a
    stream."""
    gen = SplitMix64((int(seed) + (int(tag) + 1) * GOLDEN) & MASK64)
    return gen.next()


def gaussian_samples(seed, count, dim=1):
    """(count, dim) array of standard-normal draws from one splitmix64
    stream.

    Sample (k, c) consumes stream outputs 2*(k*dim + c) + 1 and
    2*(k*dim + c) + 2 through the Box-Muller transform
    z = sqrt(-2 ln u1) * cos(2 pi u2), with u1 shifted into (0, 1] so
    the log never sees zero.
    """
    gen = SplitMix64(seed)
    out = np.empty((count, dim), dtype=float)
    for k in range(count):
        for c in range(dim):
            s1 = gen.next()
            s2 = gen.next()
            u1 = ((s1 >> 11) + 1) * 2.0 ** -53
            u2 = (s2 >> 11) * 2.0 ** -53
            out[k, c] = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
    return out


@dataclass(frozen=True)
class SaturatedGaussianZOH:
    """Seeded Gaussian samples at rate_hz, clamped to [-sat, sat], held
    between samples, and identically zero before start_time.

    bound() is the sup-norm bound the robustness sets use.
    """

    seed: int
    rate_hz: float
    variance: float
    sat: float
    start_time: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.rate_hz <= 0.0:
            raise InvalidConfig("rate_hz must be positive")
        if self.sat <= 0.0:
            raise InvalidConfig("sat must be positive")
        if self.variance < 0.0:
            raise InvalidConfig("variance must be nonnegative")

    def bound(self):
        """Sup bound on the Euclidean norm of the held signal."""
        return self.sat * math.sqrt(self.dim)

    def materialize(self, horizon):
        """Precompute the held samples covering [0, horizon].

        Returns (samples, rate_hz, start_time) where samples[k] is the
        value held on [k/rate, (k+1)/rate).
        """
        count = int(math.floor(horizon * self.rate_hz)) + 2
        raw = gaussian_samples(self.seed, count, self.dim)
        scale = math.sqrt(self.variance)
        samples = np.clip(raw * scale, -self.sat, self.sat)
        return samples, float(self.rate_hz), float(self.start_time)

    def value(self, t, samples=None):
        """Held value at time t (reference implementation for tests)."""
        if samples is None:
            samples = self.materialize(t + 1.0)[0]
        if t < self.start_time:
            return np.zeros(self.dim)
        idx = int(math.floor(t * self.rate_hz))
        idx = min(idx, samples.shape[0] - 1)
        return samples[idx]


@dataclass(frozen=True)
class FilteredStep:
    """Unit first-order lag response to a step at step_time.

    value(t) = amplitude * (1 - exp(-(t - step_time) / tau_f)) for
    t >= step_time, zero before.  The magnitude and rate bounds the
    admissibility assumption needs are r0 = |amplitude| and
    r1 = |amplitude| / tau_f.
    """

    step_time: float
    amplitude: float
    tau_f: float = 1.0

    def __post_init__(self):
        if self.tau_f <= 0.0:
            raise InvalidConfig("tau_f must be positive")

    @property
    def r0(self):
        return abs(self.amplitude)

    @property
    def r1(self):
        return abs(self.amplitude) / self.tau_f

    def value(self, t):
        if t < self.step_time:
            return 0.0
        return self.amplitude * (1.0 - math.exp(-(t - self.step_time) / self.tau_f))

    def rate(self, t):
        if t < self.step_time:
            return 0.0
        return (self.amplitude / self.tau_f) * math.exp(
            -(t - self.step_time) / self.tau_f
        )


@dataclass(frozen=True)
class ConstantSignal:
    """Constant reference; r0 = |level|, r1 = 0."""

    level: float

    @property
    def r0(self):
        return abs(self.level)

    @property
    def r1(self):
        return 0.0

    def value(self, t):
        return self.level

    def rate(self, t):
        return 0.0


ZERO_SIGNAL = ConstantSignal(0.0)


class PiecewiseLinearMatrixSchedule:
    """Matrix-valued schedule, linear between knots, clamped outside.

    Knots are (time, matrix) pairs with strictly increasing times.
    """

    def __init__(self, knot_times, knot_values):
        times = [float(t) for t in knot_times]
        if len(times) == 0:
            raise InvalidConfig("schedule needs at least one knot")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise InvalidConfig("knot times must be strictly increasing")
        values = [np.atleast_2d(np.asarray(v, dtype=float)) for v in knot_values]
        if len(values) != len(times):
            raise InvalidConfig("knot times and values differ in length")
        shape = values[0].shape
        if any(v.shape != shape for v in values):
            raise InvalidConfig("all knot matrices must share one shape")
        self.times = np.array(times)
        self.values = np.stack(values)

    def value(self, t):
        times = self.times
        if t <= times[0]:
            return self.values[0]
        if t >= times[-1]:
            return self.values[-1]
        j = int(np.searchsorted(times, t, side="right")) - 1
        t0, t1 = times[j], times[j + 1]
        w = (t - t0) / (t1 - t0)
        return self.values[j] + (self.values[j + 1] - self.values[j]) * w

    @property
    def constant(self):
        return len(self.times) == 1
