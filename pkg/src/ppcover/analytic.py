"""Closed forms and parametric frontiers for Poisson rate-distortion regions.

Every region here is a convex hull of points parametrized by pairs of
probability vectors (alpha, beta) on four atoms. Scalarizing with a weight
vector turns each hull into a one-dimensional convex-envelope problem over the
likelihood ratios ``rho_k = beta_k / alpha_k`` under the moment constraint
``sum_k alpha_k rho_k = 1``. Two atoms always suffice for that problem, so the
optimizer searches pairs of ratios (rho_lo <= 1 <= rho_hi) with a global grid
pass followed by multi-start coordinate descent.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from ._infomath import kl, phi, plogratio
from .point_process import ParameterError, StepFunction

N_ATOMS = 4
DEFAULT_WEIGHTS = np.geomspace(1e-3, 1e3, 64)
DEFAULT_RHO_MAX = 1e3


def as_atoms(weights, name="atom vector") -> np.ndarray:
    """Validate a probability vector on the four Caratheodory atoms."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size > N_ATOMS:
        raise ParameterError(f"{name} has more than {N_ATOMS} atoms")
    w = np.concatenate((w, np.zeros(N_ATOMS - w.size)))
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError(f"{name} must be non-negative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ParameterError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def _check_support(alpha, beta, name=""):
    if np.any((alpha == 0) & (beta > 0)):
        raise ParameterError(f"support condition alpha_k = 0 => beta_k = 0 violated {name}".strip())


@dataclass(frozen=True)
class ReconSet:
    """Allowed reconstruction values: all of [0, inf), [lo, hi], or a finite set."""

    kind: str
    lo: float = 0.0
    hi: float = math.inf
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "all":
            return
        if self.kind == "interval":
            if not (0 <= self.lo <= self.hi) or self.hi <= 0:
                raise ParameterError("interval needs 0 <= lo <= hi with hi > 0")
        elif self.kind == "finite":
            vals = tuple(sorted(float(v) for v in self.values))
            if not vals or vals[0] < 0 or vals[-1] <= 0:
                raise ParameterError("finite set must be non-empty, non-negative, with a positive element")
            object.__setattr__(self, "values", vals)
        else:
            raise ParameterError(f"unknown reconstruction set kind {self.kind!r}")

    @classmethod
    def all_nonnegative(cls):
        return cls("all")

    @classmethod
    def interval(cls, lo, hi):
        return cls("interval", float(lo), float(hi))

    @classmethod
    def finite(cls, values):
        return cls("finite", values=tuple(values))

    @classmethod
    def parse(cls, spec: str) -> "ReconSet":
        """Parse ``all``, ``interval:lo,hi`` or ``finite:v1,v2,...``."""
        spec = spec.strip()
        if spec == "all":
            return cls.all_nonnegative()
        kind, sep, rest = spec.partition(":")
        if not sep:
            raise ParameterError(f"cannot parse reconstruction set {spec!r}")
        try:
            nums = [float(x) for x in rest.split(",") if x.strip()]
        except ValueError as exc:
            raise ParameterError(f"bad number in {spec!r}") from exc
        if kind == "interval" and len(nums) == 2:
            return cls.interval(*nums)
        if kind == "finite" and nums:
            return cls.finite(nums)
        raise ParameterError(f"cannot parse reconstruction set {spec!r}")

    def spec(self) -> str:
        if self.kind == "all":
            return "all"
        if self.kind == "interval":
            return f"interval:{self.lo!r},{self.hi!r}"
        return "finite:" + ",".join(repr(v) for v in self.values)

    def minimizer(self, u):
        """A v in the set attaining inf_v v - u log v (vectorized in u)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "all":
            return u.copy()
        if self.kind == "interval":
            return np.clip(u, self.lo, self.hi)
        vals = np.asarray(self.values)
        costs = reconstruction_cost(vals[None, :], u.reshape(-1, 1))
        return vals[np.argmin(costs, axis=1)].reshape(u.shape)


def reconstruction_cost(v, u):
    """v - u log v with 0 log 0 = 0 and -u log 0 = +inf for u > 0."""
    v, u = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(u, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = v - u * np.log(v)
    out = np.where(u == 0, v, out)
    return np.where((v == 0) & (u > 0), np.inf, out)


def psi(A: ReconSet, u):
    """Pointwise minimal reconstruction cost inf_{v in A} v - u log v."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0):
        raise ParameterError("psi needs u >= 0")
    if A.kind == "all":
        out = u_arr - phi(u_arr)
    elif A.kind == "interval":
        out = reconstruction_cost(np.clip(u_arr, A.lo, A.hi), u_arr)
    else:
        vals = np.asarray(A.values)
        out = np.min(reconstruction_cost(vals[None, :], u_arr.reshape(-1, 1)), axis=1).reshape(u_arr.shape)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def xi(intensity) -> float:
    """lambda - phi(lambda), or its time average for a deterministic step intensity."""
    if isinstance(intensity, StepFunction):
        widths = np.diff(intensity.edges)
        vals = intensity.values
        return float(np.dot(vals - phi(vals), widths) / intensity.horizon)
    lam = float(intensity)
    if lam < 0:
        raise ParameterError("rate must be >= 0")
    return lam - phi(lam)


def df_feedforward(lam: float, R: float) -> float:
    """Distortion-rate function with feedforward, xi(lam) - R (signed)."""
    if lam <= 0 or R < 0:
        raise ParameterError("need lam > 0 and R >= 0")
    return xi(lam) - R


def rfc(lam: float, D: float) -> float:
    if lam <= 0:
        raise ParameterError("need lam > 0")
    return max(lam - phi(lam) - D, 0.0)


def rc(lam: float, D: float) -> float:
    if lam <= 0:
        raise ParameterError("need lam > 0")
    if D <= 0:
        raise ParameterError("covering rate is unbounded for D <= 0")
    return max(-lam * math.log(D), 0.0)


@dataclass
class RDPoint:
    rates: tuple
    distortion: float
    params: dict = field(default_factory=dict)
    weights: tuple = ()
    diagnostics: dict = field(default_factory=dict)


def constrained_region_point(lam, A: ReconSet, alpha, beta) -> RDPoint:
    alpha = as_atoms(alpha, "alpha")
    beta = as_atoms(beta, "beta")
    _check_support(alpha, beta)
    R = lam * float(np.sum(plogratio(beta, alpha)))
    used = alpha > 0
    D = float(np.sum(perspective_psi(A, alpha[used], lam * beta[used])))
    return RDPoint((R,), D, {"alpha": alpha, "beta": beta})


def perspective_psi(A: ReconSet, a, b):
    """a * psi(A, b / a) for a > 0, written so tiny a cannot overflow b / a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.kind == "all":
        # a (u - u log u) = b - b log(b / a)
        return b - plogratio(b, a)
    if A.kind == "interval":
        with np.errstate(over="ignore"):
            v = np.clip(b / a, A.lo, A.hi)
    else:
        vals = np.asarray(A.values)
        with np.errstate(divide="ignore"):
            costs = a[:, None] * vals[None, :] - xlogy(b[:, None], vals[None, :])
        return np.min(costs, axis=1)
    with np.errstate(divide="ignore"):
        return a * v - xlogy(b, v)


def _gamma(p, alpha, beta):
    return p * alpha + (1 - p) * beta


def _ceo_terms(lam, p, mu, alpha, beta, label):
    alpha = as_atoms(alpha, f"alpha{label}")
    beta = as_atoms(beta, f"beta{label}")
    if not 0 <= p <= 1 or mu < 0:
        raise ParameterError("need 0 <= p <= 1 and mu >= 0")
    if p == 1:
        if np.max(np.abs(alpha - beta)) > 1e-12:
            raise ParameterError(f"p{label} = 1 requires alpha = beta")
        return 0.0, 0.0, alpha, beta, alpha
    _check_support(alpha, beta, label)
    gamma = _gamma(p, alpha, beta)
    rate = ((1 - p) * lam + mu) * kl(beta, alpha)
    return rate, lam * kl(gamma, alpha), alpha, beta, gamma


def ceo_region_point(lam, p1, p2, mu1, mu2, alpha1, beta1, alpha2, beta2) -> RDPoint:
    R1, g1, a1, b1, c1 = _ceo_terms(lam, p1, mu1, alpha1, beta1, "1")
    R2, g2, a2, b2, c2 = _ceo_terms(lam, p2, mu2, alpha2, beta2, "2")
    D = xi(lam) - g1 - g2
    params = {"alpha1": a1, "beta1": b1, "gamma1": c1,
              "alpha2": a2, "beta2": b2, "gamma2": c2}
    return RDPoint((R1, R2), D, params)


def remote_region_point(lam, p, mu, alpha, beta) -> RDPoint:
    R, g, a, b, c = _ceo_terms(lam, p, mu, alpha, beta, "")
    return RDPoint((R,), xi(lam) - g, {"alpha": a, "beta": b, "gamma": c})


# ---------------------------------------------------------------- optimizer

@dataclass
class EnvelopeResult:
    rho: np.ndarray        # two likelihood-ratio atoms, rho[0] <= 1 <= rho[1]
    mass: np.ndarray       # their alpha weights
    value: float
    gap: float             # projected finite-difference stationarity measure
    starts: int
    sweeps: int

    def atoms(self):
        alpha = np.zeros(N_ATOMS)
        alpha[:2] = self.mass
        beta = alpha * np.concatenate((self.rho, np.zeros(N_ATOMS - 2)))
        beta = beta / beta.sum()
        return alpha, beta


def _chord(h_lo, h_hi, lo, hi):
    if hi - lo <= 0:
        return h_lo
    w_lo = (hi - 1.0) / (hi - lo)
    w_hi = (1.0 - lo) / (hi - lo)
    total = 0.0
    if w_lo > 0:
        total += w_lo * h_lo
    if w_hi > 0:
        total += w_hi * h_hi
    return total


def envelope_minimize(h: Callable[[np.ndarray], np.ndarray], rho_max=DEFAULT_RHO_MAX,
                      n_starts=16, tol=1e-12, grid_size=320, max_sweeps=60) -> EnvelopeResult:
    """Minimize E[h(rho)] over laws of rho >= 0 with E[rho] = 1 and rho <= rho_max.

    The optimum is the lower convex envelope of h at 1 and is attained by a
    two-point law. ``h`` must accept arrays.
    """
    lo_grid = np.concatenate(([0.0], np.geomspace(1e-9, 1.0, grid_size)))
    hi_grid = np.geomspace(1.0, rho_max, grid_size)
    h_lo = np.asarray(h(lo_grid), dtype=float)
    h_hi = np.asarray(h(hi_grid), dtype=float)
    h_one = float(h_lo[-1])

    L, H = np.meshgrid(lo_grid, hi_grid, indexing="ij")
    span = H - L
    with np.errstate(divide="ignore", invalid="ignore"):
        w_lo = np.where(span > 0, (H - 1.0) / span, 1.0)
        w_hi = np.where(span > 0, (1.0 - L) / span, 0.0)
        table = (np.where(w_lo > 0, w_lo * h_lo[:, None], 0.0)
                 + np.where(w_hi > 0, w_hi * h_hi[None, :], 0.0))
    table = np.where(np.isnan(table), np.inf, table)

    # seeds: distinct local minima of the chord table, best first
    padded = np.pad(table, 1, constant_values=np.inf)
    is_min = np.isfinite(table)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = padded[1 + di:1 + di + table.shape[0], 1 + dj:1 + dj + table.shape[1]]
                is_min &= table <= nb
    cand = np.flatnonzero(is_min)
    if cand.size == 0:
        cand = np.array([int(np.argmin(table))])
    cand = cand[np.argsort(table.flat[cand], kind="stable")][:max(1, n_starts)]
    starts = [np.unravel_index(k, table.shape) for k in cand]

    def scalar_h(x):
        return float(np.asarray(h(np.array([x])), dtype=float)[0])

    def objective(lo, hi):
        return _chord(scalar_h(lo), scalar_h(hi), lo, hi)

    def bracket(grid, x, lower, upper):
        i = np.searchsorted(grid, x)
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, grid.size - 1)]
        return max(a, lower), min(b, upper)

    best = None
    total_sweeps = 0
    for i, j in starts:
        lo, hi = lo_grid[i], hi_grid[j]
        val = objective(lo, hi)
        if not math.isfinite(val):
            continue
        for sweep in range(max_sweeps):
            prev = val
            a, b = bracket(lo_grid, lo, 0.0, 1.0)
            if b > a:
                res = minimize_scalar(lambda x: objective(x, hi), bounds=(a, b),
                                      method="bounded", options={"xatol": 1e-13})
                for cand in (res.x, a, b):
                    v = objective(cand, hi)
                    if v < val:
                        lo, val = cand, v
            a, b = bracket(hi_grid, hi, 1.0, rho_max)
            if b > a:
                res = minimize_scalar(lambda x: objective(lo, x), bounds=(a, b),
                                      method="bounded", options={"xatol": 1e-13 * max(1.0, b)})
                for cand in (res.x, a, b):
                    v = objective(lo, cand)
                    if v < val:
                        hi, val = cand, v
            total_sweeps += 1
            if prev - val < tol:
                break
        if best is None or val < best[2] - 1e-15:
            best = (lo, hi, val)

    lo, hi, val = best
    # ties with the degenerate law go to the zero-rate point
    if h_one <= val + tol * max(1.0, abs(val)):
        lo, hi, val = 1.0, 1.0, h_one
    if hi - lo > 0:
        mass = np.array([(hi - 1.0) / (hi - lo), (1.0 - lo) / (hi - lo)])
    else:
        mass = np.array([1.0, 0.0])
    gap = _stationarity_gap(objective, lo, hi, rho_max)
    return EnvelopeResult(np.array([lo, hi]), mass, val, gap, len(starts), total_sweeps)


def _stationarity_gap(objective, lo, hi, rho_max):
    if hi - lo <= 0:
        return 0.0
    base = objective(lo, hi)
    gap = 0.0
    for k, (x, lower, upper) in enumerate(((lo, 0.0, 1.0), (hi, 1.0, rho_max))):
        step = 1e-6 * max(1.0, x)
        left = max(x - step, lower)
        right = min(x + step, upper)
        if right - left <= 0:
            continue
        f = (lambda z: objective(z, hi)) if k == 0 else (lambda z: objective(lo, z))
        g = (f(right) - f(left)) / (right - left)
        # only descent directions that stay feasible count
        if x <= lower + step:
            g = min(g, 0.0)
        if x >= upper - step:
            g = max(g, 0.0)
        if math.isfinite(g):
            gap = max(gap, abs(g))
    return gap if math.isfinite(base) else math.inf


# ---------------------------------------------------------------- frontiers

@dataclass
class Frontier:
    points: list
    kind: str = "single"
    meta: dict = field(default_factory=dict)

    @property
    def hull(self):
        return [p.weights for p in self.points]

    def rates(self) -> np.ndarray:
        return np.array([p.rates for p in self.points])

    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.points])

    def distinct(self, digits=12):
        """Distinct (rates..., D) tuples after rounding; weights that share a vertex collapse."""
        seen = []
        for p in self.points:
            key = tuple(round(float(x), digits) for x in (*p.rates, p.distortion))
            if key not in seen:
                seen.append(key)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        two = self.kind == "ceo"
        if two:
            header = ["w1", "w2", "R1", "R2", "D"]
            for i in (1, 2):
                header += [f"alpha{i}_{k}" for k in range(1, 5)]
                header += [f"beta{i}_{k}" for k in range(1, 5)]
        else:
            header = ["w1", "R1", "D"] + [f"alpha{k}" for k in range(1, 5)] + [f"beta{k}" for k in range(1, 5)]
        writer.writerow(header)
        for pt in self.points:
            row = list(pt.weights) + list(pt.rates) + [pt.distortion]
            if two:
                for i in (1, 2):
                    row += list(pt.params[f"alpha{i}"]) + list(pt.params[f"beta{i}"])
            else:
                row += list(pt.params["alpha"]) + list(pt.params["beta"])
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"kind": self.kind, "meta": self.meta, "points": [
            {"weights": list(p.weights), "rates": list(p.rates), "distortion": p.distortion,
             "params": {k: [float(x) for x in v] for k, v in p.params.items()},
             "diagnostics": p.diagnostics}
            for p in self.points]}
        return json.dumps(doc, indent=2, sort_keys=True)


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _sort_points(points):
    return sorted(points, key=lambda p: (tuple(p.rates), -p.distortion, tuple(p.weights)))


def _weights(grid):
    w = DEFAULT_WEIGHTS if grid is None else np.asarray(grid, dtype=float).reshape(-1)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ParameterError("scalarization weights must be positive and finite")
    return w


def constrained_frontier(lam, A: ReconSet, weights=None, rho_max=DEFAULT_RHO_MAX,
                         n_starts=16, tol=1e-12) -> Frontier:
    """Trace the constrained region by minimizing w R + D for each weight w.

    Atoms are likelihood ratios in [0, rho_max]; for sets where rate can be
    traded for arbitrarily negative distortion the cap bounds the rate.
    """
    if lam <= 0:
        raise ParameterError("need lam > 0")
    points = []
    for w in _weights(weights):
        def h(rho, w=w):
            eta = lam * np.asarray(rho)
            return w * phi(eta) + psi(A, eta)

        res = envelope_minimize(h, rho_max=rho_max, n_starts=n_starts, tol=tol)
        alpha, beta = res.atoms()
        pt = constrained_region_point(lam, A, alpha, beta)
        pt.weights = (float(w),)
        pt.diagnostics = {"objective": res.value - w * phi(lam), "gap": res.gap,
                          "starts": res.starts, "sweeps": res.sweeps}
        points.append(pt)
    return Frontier(_sort_points(points), "single",
                    {"lambda": lam, "set": A.spec(), "rho_max": rho_max, "n_starts": n_starts})


def _encoder_solution(lam, p, mu, w, rho_max, n_starts, tol):
    c = (1 - p) * lam + mu
    if p == 1:
        alpha = np.array([1.0, 0, 0, 0])
        return alpha, alpha.copy(), EnvelopeResult(np.ones(2), np.array([1.0, 0]), 0.0, 0.0, 0, 0)

    def h(rho):
        rho = np.asarray(rho)
        return w * c * phi(rho) - lam * phi(p + (1 - p) * rho)

    res = envelope_minimize(h, rho_max=rho_max, n_starts=n_starts, tol=tol)
    alpha, beta = res.atoms()
    return alpha, beta, res


def ceo_frontier(lam, p1, p2, mu1, mu2, weights=None, rho_max=DEFAULT_RHO_MAX,
                 n_starts=16, tol=1e-12) -> Frontier:
    """Minimize w1 R1 + w2 R2 + D over all four atom vectors.

    ``weights`` is a sequence of (w1, w2) pairs; by default the product of a
    16-point log grid on [1e-3, 1e3] with itself. The objective separates by
    encoder, so each encoder's atoms are optimized on their own.
    """
    if lam <= 0:
        raise ParameterError("need lam > 0")
    if weights is None:
        g = np.geomspace(1e-3, 1e3, 16)
        pairs = [(a, b) for a in g for b in g]
    else:
        pairs = [tuple(map(float, wp)) for wp in weights]
    cache = {}

    def solve(i, p, mu, w):
        key = (i, w)
        if key not in cache:
            cache[key] = _encoder_solution(lam, p, mu, w, rho_max, n_starts, tol)
        return cache[key]

    points = []
    for w1, w2 in pairs:
        if w1 <= 0 or w2 <= 0:
            raise ParameterError("scalarization weights must be positive")
        a1, b1, r1 = solve(1, p1, mu1, w1)
        a2, b2, r2 = solve(2, p2, mu2, w2)
        pt = ceo_region_point(lam, p1, p2, mu1, mu2, a1, b1, a2, b2)
        pt.weights = (w1, w2)
        pt.diagnostics = {"gap": max(r1.gap, r2.gap)}
        points.append(pt)
    return Frontier(_sort_points(points), "ceo",
                    {"lambda": lam, "p": [p1, p2], "mu": [mu1, mu2], "rho_max": rho_max})


def remote_frontier(lam, p, mu, weights=None, rho_max=DEFAULT_RHO_MAX,
                    n_starts=16, tol=1e-12) -> Frontier:
    if lam <= 0:
        raise ParameterError("need lam > 0")
    points = []
    for w in _weights(weights):
        alpha, beta, res = _encoder_solution(lam, p, mu, float(w), rho_max, n_starts, tol)
        pt = remote_region_point(lam, p, mu, alpha, beta)
        pt.weights = (float(w),)
        pt.diagnostics = {"gap": res.gap}
        points.append(pt)
    return Frontier(_sort_points(points), "single",
                    {"lambda": lam, "p": p, "mu": mu, "rho_max": rho_max})


def supporting_violation(frontier: Frontier) -> float:
    """Largest amount by which some point beats another point on its own
    supporting hyperplane; <= 0 means every point lies on the lower envelope
    of the emitted set."""
    rd = np.column_stack([frontier.rates(), frontier.distortions()])
    worst = -math.inf
    for pt in frontier.points:
        w = np.concatenate((pt.weights, [1.0]))
        own = float(np.dot(w, list(pt.rates) + [pt.distortion]))
        worst = max(worst, own - float(np.min(rd @ w)))
    return worst


def chord_violation(frontier: Frontier) -> float:
    """For single-rate frontiers: max height of a point above the chord of its neighbours."""
    R = frontier.rates()[:, 0]
    D = frontier.distortions()
    worst = 0.0
    for k in range(1, len(R) - 1):
        r0, r1, r2 = R[k - 1], R[k], R[k + 1]
        if r2 - r0 <= 1e-15:
            continue
        t = (r1 - r0) / (r2 - r0)
        worst = max(worst, D[k] - ((1 - t) * D[k - 1] + t * D[k + 1]))
    return worst
