"""Counting paths on [0, T], step-function reconstructions, and the
functional-covering distortion between them."""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._infomath import phi


class ParameterError(ValueError):
    """Raised when a rate, probability or horizon is outside its domain."""


def _as_times(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CountingPath:
    """A point-process realization: strictly increasing arrivals in (0, T]."""

    horizon: float
    arrivals: np.ndarray = field(default_factory=lambda: _as_times([]))

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ParameterError(f"horizon must be finite and positive, got {self.horizon}")
        arr = _as_times(self.arrivals)
        if arr.size:
            if arr[0] <= 0 or arr[-1] > self.horizon:
                raise ParameterError("arrivals must lie in (0, T]")
            if np.any(np.diff(arr) <= 0):
                raise ParameterError("arrivals must be strictly increasing")
        object.__setattr__(self, "arrivals", arr)

    def __len__(self):
        return int(self.arrivals.size)

    def count(self, t):
        """N_t = #{arrivals <= t}; right-continuous with N_0 = 0."""
        return np.searchsorted(self.arrivals, t, side="right")

    def __eq__(self, other):
        if not isinstance(other, CountingPath):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.arrivals, other.arrivals)

    def __hash__(self):
        return hash((self.horizon, self.arrivals.tobytes()))

    def to_csv(self) -> str:
        lines = [f"# horizon={self.horizon!r}", "t"]
        lines += [repr(float(t)) for t in self.arrivals]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "CountingPath":
        horizon = None
        times = []
        for raw in io.StringIO(text):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "horizon":
                    horizon = float(value)
                continue
            if line == "t":
                continue
            times.append(float(line))
        if horizon is None:
            raise ParameterError("missing '# horizon=T' line")
        return cls(horizon, times)


@dataclass(frozen=True)
class StepFunction:
    """Non-negative piecewise-constant function on [0, T].

    ``values[k]`` holds on the half-open piece (b_{k-1}, b_k] with b_0 = 0 and
    b_K = T, so evaluation at a breakpoint returns the left piece. That is the
    left-continuous (predictable) version used when integrating against dN.
    """

    horizon: float
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bps = _as_times(self.breakpoints)
        vals = _as_times(self.values)
        if vals.size != bps.size + 1:
            raise ParameterError("need exactly one more value than breakpoints")
        if bps.size and (bps[0] <= 0 or bps[-1] >= self.horizon or np.any(np.diff(bps) <= 0)):
            raise ParameterError("breakpoints must be increasing inside (0, T)")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ParameterError("step values must be finite and non-negative")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "StepFunction":
        return cls(horizon, [], [value])

    @classmethod
    def from_slots(cls, slot_values, delta: float) -> "StepFunction":
        """Piecewise constant on ((j-1)delta, j*delta], j = 1..n."""
        vals = np.asarray(slot_values, dtype=float)
        n = vals.size
        return cls(n * delta, delta * np.arange(1, n), vals)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([0.0], self.breakpoints, [self.horizon]))

    def at(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="left")
        return self.values[idx]

    def integral(self) -> float:
        return float(np.dot(self.values, np.diff(self.edges)))

    def phi_integral(self) -> float:
        """Integral of phi(yhat_t) over [0, T]."""
        return float(np.dot(phi(self.values), np.diff(self.edges)))


def sample_poisson(rate: float, horizon: float, rng: np.random.Generator) -> CountingPath:
    """Homogeneous Poisson path built from exponential gaps."""
    if not (rate >= 0 and math.isfinite(rate)):
        raise ParameterError(f"rate must be finite and >= 0, got {rate}")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ParameterError(f"horizon must be finite and > 0, got {horizon}")
    if rate == 0:
        return CountingPath(horizon)
    block = max(16, int(rate * horizon + 4 * math.sqrt(rate * horizon) + 8))
    chunks = []
    last = 0.0
    while True:
        times = last + np.cumsum(rng.exponential(1.0 / rate, size=block))
        inside = times[times <= horizon]
        chunks.append(inside)
        if inside.size < block:
            break
        last = times[-1]
    arr = np.concatenate(chunks)
    # zero-length gaps are possible only through underflow
    keep = np.concatenate(([True], np.diff(arr) > 0)) & (arr > 0)
    return CountingPath(horizon, arr[keep])


def thin(path: CountingPath, p: float, rng: np.random.Generator):
    """Delete each point independently with probability ``p``.

    Returns ``(kept, removed)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"thinning probability must be in [0, 1], got {p}")
    drop = rng.random(len(path)) < p
    return (
        CountingPath(path.horizon, path.arrivals[~drop]),
        CountingPath(path.horizon, path.arrivals[drop]),
    )


def superpose(a: CountingPath, b: CountingPath) -> CountingPath:
    if a.horizon != b.horizon:
        raise ParameterError("cannot superpose paths with different horizons")
    merged = np.sort(np.concatenate((a.arrivals, b.arrivals)), kind="stable")
    if merged.size > 1 and np.any(np.diff(merged) <= 0):
        warnings.warn("coincident arrivals in superposition; nudging duplicates forward",
                      RuntimeWarning, stacklevel=2)
        merged = merged.copy()
        for i in range(1, merged.size):
            if merged[i] <= merged[i - 1]:
                merged[i] = np.nextafter(merged[i - 1], np.inf)
        if merged[-1] > a.horizon:
            raise ParameterError("no room to separate coincident arrivals at the horizon")
    return CountingPath(a.horizon, merged)


def _point_terms(yhat, y: CountingPath):
    if y.arrivals.size == 0:
        return 0.0
    vals = np.asarray(yhat.at(y.arrivals), dtype=float)
    if np.any(vals <= 0):
        return -math.inf
    return float(np.sum(np.log(vals)))


def distortion(yhat, y: CountingPath) -> float:
    """Functional-covering distortion: int yhat dt - sum_i log yhat(t_i).

    ``yhat`` may be a StepFunction or any object exposing ``horizon``,
    ``integral()`` and a left-continuous ``at(times)``. Returns ``inf`` when the
    reconstruction vanishes at an arrival.
    """
    if yhat.horizon != y.horizon:
        raise ParameterError("reconstruction and path horizons differ")
    logs = _point_terms(yhat, y)
    if logs == -math.inf:
        return math.inf
    return yhat.integral() - logs


def log_likelihood_ratio(yhat, y: CountingPath) -> float:
    """log dP_yhat/dP_0 at y: sum_i log yhat(t_i) - int (yhat - 1) dt."""
    if yhat.horizon != y.horizon:
        raise ParameterError("reconstruction and path horizons differ")
    logs = _point_terms(yhat, y)
    if logs == -math.inf:
        return -math.inf
    return logs - (yhat.integral() - y.horizon)


def trial_rng(seed: int, i: int) -> np.random.Generator:
    """Generator for trial ``i``; depends only on (seed, i), never on scheduling."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
