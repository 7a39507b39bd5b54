"""Monte Carlo of the first-arrival quantization scheme with feedforward.

The encoder sends 1 when the path is empty and otherwise the index of the
quantile bin containing the first arrival Theta. The decoder, which sees the
past of the path, outputs the conditional intensity of the source given the
message: zero before the bin, the first-arrival hazard inside the bin up to
Theta, and lam afterwards.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import spence

from ._infomath import phi
from .analytic import xi
from .point_process import CountingPath, ParameterError, distortion, sample_poisson, trial_rng

MAX_RT = 30.0


class ConsistencyError(ValueError):
    """The path fed forward to the decoder contradicts the message."""


def first_arrival_cdf(lam, T, theta):
    """CDF of the first arrival conditioned on at least one arrival in [0, T]."""
    if lam <= 0:
        raise ParameterError("need lam > 0")
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > T):
        raise ParameterError("theta must lie in [0, T]")
    out = np.expm1(-lam * theta) / math.expm1(-lam * T)
    return float(out) if out.ndim == 0 else out


def first_arrival_quantile(lam, T, u):
    u = np.asarray(u, dtype=float)
    out = -np.log1p(u * math.expm1(-lam * T)) / lam
    out = np.minimum(out, T)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FFScheme:
    lam: float
    T: float
    R: float

    def __post_init__(self):
        if self.lam <= 0 or self.T <= 0 or self.R < 0:
            raise ParameterError("need lam > 0, T > 0, R >= 0")
        if self.R * self.T > MAX_RT:
            raise ParameterError(f"R*T = {self.R * self.T:g} exceeds {MAX_RT:g}; bins would not be "
                                 "resolvable in double precision")

    @property
    def J(self) -> float:
        return float(math.ceil(math.exp(self.R * self.T)))

    @property
    def delta(self) -> float:
        """Probability of an empty path."""
        return math.exp(-self.lam * self.T)

    def bin_edges(self, M):
        """Time interval [a, b) of quantile bin M >= 2 (last bin closes at T)."""
        J = self.J
        if not (2 <= M <= J):
            raise ParameterError(f"message {M} has no bin")
        k = M - 2
        a = first_arrival_quantile(self.lam, self.T, k / (J - 1))
        b = self.T if M == J else first_arrival_quantile(self.lam, self.T, (k + 1) / (J - 1))
        return a, b

    def entropy(self) -> float:
        """H(M) in nats, in closed form."""
        if self.J < 2:
            return 0.0
        d = self.delta
        return -phi(d) - phi(1 - d) + (1 - d) * math.log(self.J - 1)


def encode(path: CountingPath, scheme: FFScheme) -> int:
    if path.horizon != scheme.T:
        raise ParameterError("path and scheme horizons differ")
    if len(path) == 0 or scheme.J < 2:
        return 1
    u = first_arrival_cdf(scheme.lam, scheme.T, path.arrivals[0])
    J = scheme.J
    return int(min(2 + math.floor((J - 1) * u), J))


def _hazard(lam, b, t):
    # lam e^{-lam t} / (e^{-lam t} - e^{-lam b})
    return lam / -np.expm1(-lam * (b - np.asarray(t, dtype=float)))


def _hazard_integral(lam, a, b, theta):
    """int_a^theta of the hazard, in closed form."""
    num = -math.expm1(-lam * (b - a))
    den = -math.expm1(-lam * (b - theta))
    return lam * (theta - a) + math.log(num / den) if den > 0 else math.inf


def _phi_hazard_antiderivative(lam, s):
    # with w = 1 - e^{-lam s}: F(s) = log(lam) log(w/(1-w)) - log(w)^2/2 - spence(w),
    # and d/ds F = -phi(hazard); log(w/(1-w)) = lam s + log w avoids 1 - w
    w = -math.expm1(-lam * s)
    lw = math.log(w)
    return math.log(lam) * (lam * s + lw) - 0.5 * lw * lw - float(spence(w))


def phi_hazard_integral(lam, a, b, theta):
    """int_a^theta phi(hazard_t) dt in closed form (dilogarithm)."""
    if theta <= a:
        return 0.0
    return _phi_hazard_antiderivative(lam, b - a) - _phi_hazard_antiderivative(lam, b - theta)


def phi_hazard_integral_quad(lam, a, b, theta, tol=1e-8):
    """Same integral by adaptive quadrature in s = b - t.

    The integrand behaves like log(s)/s near s = 0; substituting s = e^x moves
    that end to -inf with an exponentially decaying integrand."""
    if theta <= a:
        return 0.0

    def f(x):
        s = math.exp(x)
        return phi(float(_hazard(lam, 0.0, -s))) * s

    val, _ = quad(f, math.log(b - theta), math.log(b - a), epsabs=tol, epsrel=tol, limit=200)
    return val


@dataclass(frozen=True)
class ConditionalIntensity:
    """Decoder output for one message along one fed-forward path.

    Left-continuous: 0 on [0, a], hazard on (a, Theta], lam after Theta. With
    ``a = None`` the intensity is the constant ``level``.
    """

    horizon: float
    lam: float
    level: float
    a: float | None = None
    b: float | None = None
    theta: float | None = None

    def at(self, t):
        t = np.asarray(t, dtype=float)
        if self.a is None:
            return np.full(t.shape, self.level)
        out = np.where(t <= self.a, 0.0, self.lam)
        inside = (t > self.a) & (t <= self.theta)
        if np.any(inside):
            out = np.where(inside, _hazard(self.lam, self.b, np.where(inside, t, self.a)), out)
        return out

    def integral(self) -> float:
        if self.a is None:
            return self.level * self.horizon
        return (_hazard_integral(self.lam, self.a, self.b, self.theta)
                + self.lam * (self.horizon - self.theta))

    def phi_integral(self, method="closed") -> float:
        if self.a is None:
            return phi(self.level) * self.horizon
        f = phi_hazard_integral if method == "closed" else phi_hazard_integral_quad
        return f(self.lam, self.a, self.b, self.theta) + phi(self.lam) * (self.horizon - self.theta)


def decode_intensity(M: int, scheme: FFScheme, path: CountingPath) -> ConditionalIntensity:
    if scheme.J < 2:
        return ConditionalIntensity(scheme.T, scheme.lam, scheme.lam)
    if M == 1:
        if len(path):
            raise ConsistencyError("message 1 but the path has arrivals")
        return ConditionalIntensity(scheme.T, scheme.lam, 0.0)
    if len(path) == 0:
        raise ConsistencyError(f"message {M} but the path is empty")
    a, b = scheme.bin_edges(M)
    theta = float(path.arrivals[0])
    slack = 1e-9 * max(1.0, scheme.T)
    if theta < a - slack or theta > b + slack:
        raise ConsistencyError(f"first arrival {theta} outside bin [{a}, {b})")
    # quantile round-off can put a a hair above theta
    a = min(a, theta)
    b = max(b, math.nextafter(theta, math.inf))
    return ConditionalIntensity(scheme.T, scheme.lam, scheme.lam, a, b, theta)


def run_trial(scheme: FFScheme, rng) -> tuple[float, float]:
    """Per-path distortion and int phi(Gamma) dt - T phi(lam)."""
    path = sample_poisson(scheme.lam, scheme.T, rng)
    M = encode(path, scheme)
    gamma = decode_intensity(M, scheme, path)
    return distortion(gamma, path), gamma.phi_integral() - scheme.T * phi(scheme.lam)


@dataclass
class SimulationReport:
    lam: float
    T: float
    R: float
    trials: int
    seed: int
    mean_d: float
    se_d: float
    H_M: float
    mi_mc: float
    se_mi: float
    lower_bound: float
    upper_bound: float

    def to_dict(self):
        return {"lambda": self.lam, "T": self.T, "R": self.R, "trials": self.trials, "seed": self.seed,
                "mean_d": self.mean_d, "se_d": self.se_d, "H_M": self.H_M, "mi_mc": self.mi_mc,
                "se_mi": self.se_mi, "lower_bound": self.lower_bound, "upper_bound": self.upper_bound}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def within_bounds(self, k=3.0) -> bool:
        return (self.lower_bound - k * self.se_d <= self.mean_d <= self.upper_bound + k * self.se_d)


def distortion_bounds(lam, T, R):
    """Lower and upper bounds on the optimal per-time distortion at horizon T."""
    base = xi(lam)
    d = math.exp(-lam * T)
    return base - R - 1.0 / T, base - (1 - d) * R + 1.0 / T


def simulate(lam, T, R, trials, seed, threads=1) -> SimulationReport:
    """Run ``trials`` independent paths; trial i uses its own (seed, i) stream."""
    if trials < 1:
        raise ParameterError("need at least one trial")
    scheme = FFScheme(lam, T, R)
    d = np.empty(trials)
    mi = np.empty(trials)

    def work(lo, hi):
        for i in range(lo, hi):
            d[i], mi[i] = run_trial(scheme, trial_rng(seed, i))

    threads = max(1, int(threads))
    if threads == 1:
        work(0, trials)
    else:
        cuts = np.linspace(0, trials, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, cuts[:-1], cuts[1:]))
    if np.any(~np.isfinite(d)):
        mean_d = math.inf
        se_d = math.nan
    else:
        mean_d = float(np.sum(d)) / trials / T
        se_d = float(np.std(d, ddof=1)) / math.sqrt(trials) / T if trials > 1 else math.nan
    lo, hi = distortion_bounds(lam, T, R)
    return SimulationReport(lam, T, R, trials, seed, mean_d, se_d, scheme.entropy(),
                            float(np.sum(mi)) / trials,
                            float(np.std(mi, ddof=1)) / math.sqrt(trials) if trials > 1 else math.nan,
                            lo, hi)


def expected_distortion(lam, T, R) -> float:
    """Exact per-time mean distortion of the scheme: xi - H(M)/T."""
    return xi(lam) - FFScheme(lam, T, R).entropy() / T
