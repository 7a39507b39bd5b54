"""Blahut-Arimoto on the slotted binary source with the discretized distortion."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .analytic import ReconSet, constrained_frontier
from .discretize import dbar
from .point_process import ParameterError

DEFAULT_BA_WEIGHTS = np.geomspace(0.05, 5.0, 32)


@dataclass(frozen=True)
class DistortionMatrix:
    """Rows are Ybar = 0, 1; columns are reconstruction values."""

    values: np.ndarray
    entries: np.ndarray
    delta: float


def recon_grid(A: ReconSet, resolution=256, scale=1.0) -> np.ndarray:
    if A.kind == "finite":
        return np.asarray(A.values, dtype=float)
    if A.kind == "interval":
        if A.lo > 0:
            return np.geomspace(A.lo, A.hi, resolution)
        return np.concatenate(([0.0], np.geomspace(A.hi * 1e-6, A.hi, resolution)))
    return np.concatenate(([0.0], np.geomspace(scale * 1e-3, scale * 1e3, resolution)))


def build_distortion_matrix(A: ReconSet, delta: float, resolution=256, scale=1.0) -> DistortionMatrix:
    """Tabulate dbar over a finite reconstruction alphabet drawn from ``A``.

    Unbounded sets are gridded log-uniformly around ``scale`` (the source rate)."""
    if delta <= 0:
        raise ParameterError("slot width must be positive")
    vals = np.unique(recon_grid(A, resolution, scale))
    if vals.size == 0 or not np.any(vals > 0):
        raise ParameterError("empty effective reconstruction alphabet")
    entries = np.vstack((dbar(vals, 0, delta), dbar(vals, 1, delta)))
    return DistortionMatrix(vals, entries, delta)


@dataclass
class BAResult:
    I: float
    D: float
    converged: bool
    iterations: int
    objective: float
    monotone: bool


def _channel_mi(pmf, Q):
    """I(X; Xhat) from the test channel, computed through log(Q/q) so tiny
    cells cannot underflow a product of marginals."""
    q = pmf @ Q
    mass = pmf[:, None] * Q
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = mass * (np.log(Q) - np.log(q)[None, :])
    return float(max(np.sum(np.where(mass > 0, terms, 0.0)), 0.0))


def _expected(pmf, Q, d):
    mass = pmf[:, None] * Q
    return float(np.sum(np.where(mass > 0, mass * np.where(np.isfinite(d), d, 0.0), 0.0)))


def ba_point(pmf, matrix: DistortionMatrix, s: float, tol=1e-12, max_iter=100_000,
             q0=None) -> BAResult:
    """One Blahut-Arimoto solve at slope ``s <= 0``.

    Minimizes I(X; Xhat) - s E d. Infinite entries are excluded transitions.
    The dual objective -sum_x p(x) log sum_y q(y) e^{s d(x,y)} is tracked and
    must not increase; ``monotone`` records whether it ever did beyond 1e-13.
    """
    pmf = np.asarray(pmf, dtype=float)
    d = np.asarray(matrix.entries, dtype=float)
    if s > 0:
        raise ParameterError("slope must be <= 0")
    finite_cols = np.all(np.isfinite(d), axis=0)
    if s == 0:
        col_cost = np.array([_expected(pmf, np.tile(np.eye(d.shape[1])[k], (2, 1)), d)
                             for k in range(d.shape[1])])
        k = int(np.argmin(np.where(finite_cols | (pmf[np.argmax(~np.isfinite(d), axis=0)] == 0),
                                   col_cost, np.inf)))
        return BAResult(0.0, float(col_cost[k]), True, 0, float(col_cost[k]), True)

    with np.errstate(invalid="ignore"):
        sd = np.where(np.isfinite(d), s * d, -np.inf)
    # centre each row; harmless to the fixed point and keeps exponents in range
    sd = sd - np.max(sd, axis=1, keepdims=True)
    live = pmf > 0
    q = np.full(d.shape[1], 1.0 / d.shape[1]) if q0 is None else np.asarray(q0, dtype=float)
    prev = math.inf
    monotone = True
    converged = False
    it = 0
    if np.min(sd[np.isfinite(sd)]) > -600:
        # linear domain is exact enough here and much cheaper per iteration
        E = np.exp(sd)
        pl = pmf[live]
        El = E[live]
        for it in range(1, max_iter + 1):
            Z = El @ q
            obj = -float(np.dot(pl, np.log(Z)))
            if obj > prev + 1e-13:
                monotone = False
            q = q * ((pl / Z) @ El)
            if prev - obj < tol and it > 1:
                converged = True
                break
            prev = obj
        Q = E * q[None, :] / (E @ q)[:, None]
        return BAResult(_channel_mi(pmf, Q), _expected(pmf, Q, d), converged, it, obj, monotone)

    with np.errstate(divide="ignore"):
        logq = np.log(q)
    for it in range(1, max_iter + 1):
        a = logq[None, :] + sd
        lz = logsumexp(a, axis=1, keepdims=True)
        obj = -float(np.dot(pmf[live], lz[live, 0]))
        if obj > prev + 1e-13:
            monotone = False
        Q = np.exp(a - lz)
        q = pmf @ Q
        with np.errstate(divide="ignore"):
            logq = np.log(q)
        if prev - obj < tol and it > 1:
            converged = True
            break
        prev = obj
    I = _channel_mi(pmf, Q)
    D = _expected(pmf, Q, d)
    return BAResult(I, D, converged, it, obj, monotone)


@dataclass
class BAFrontier:
    slopes: np.ndarray
    results: list
    delta: float

    def rows(self):
        for s, r in zip(self.slopes, self.results):
            yield s, r.I, r.I / self.delta, r.D, r.converged

    def converged(self):
        return [(r.I / self.delta, r.D) for r in self.results if r.converged]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["slope", "I_per_symbol", "R_per_time", "D", "converged"])
        for s, I, R, D, ok in self.rows():
            writer.writerow([format(float(s), ".12g"), format(I, ".12g"), format(R, ".12g"),
                             format(D, ".12g"), int(ok)])
        return buf.getvalue()


def slopes_from_weights(weights, delta):
    """Rate weight w maps to slope s = -delta / w (wR + D with R = I/delta)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ParameterError("weights must be positive")
    return -delta / w


def ba_frontier(lam, A: ReconSet, delta, slopes=None, weights=None, resolution=256,
                tol=1e-12, max_iter=100_000) -> BAFrontier:
    """Sweep slopes in order of increasing magnitude; R = I/delta, D = E dbar."""
    if lam <= 0:
        raise ParameterError("need lam > 0")
    if slopes is None:
        slopes = slopes_from_weights(DEFAULT_BA_WEIGHTS if weights is None else weights, delta)
    slopes = np.asarray(slopes, dtype=float)
    order = np.argsort(-slopes, kind="stable")
    matrix = build_distortion_matrix(A, delta, resolution, scale=lam)
    q1 = -math.expm1(-lam * delta)
    pmf = np.array([1 - q1, q1])
    results = [None] * slopes.size
    cache = {}
    for i in order:
        s = float(slopes[i])
        if s not in cache:
            cache[s] = ba_point(pmf, matrix, s, tol=tol, max_iter=max_iter)
        results[i] = cache[s]
    return BAFrontier(slopes[order], [results[i] for i in order], delta)


def parametric_rate(lam, A: ReconSet, D, weights=None, frontier=None):
    """Lower envelope of the parametric region's supporting lines at distortion D.

    Each scalarization optimum (R_i, D_i) at weight w_i certifies
    R(D) >= R_i - (D - D_i) / w_i, so the max over i never overshoots the
    convex curve (interpolating between points would). Pass ``frontier`` to
    reuse one already traced for (lam, A)."""
    f = frontier
    if f is None:
        f = constrained_frontier(lam, A, weights=np.geomspace(1e-3, 1e3, 129) if weights is None else weights)
    R = f.rates()[:, 0]
    Ds = f.distortions()
    w = np.array([p.weights[0] for p in f.points])
    D = np.asarray(D, dtype=float)
    out = np.maximum(0.0, np.max(R[:, None] - (D.reshape(-1)[None, :] - Ds[:, None]) / w[:, None], axis=0))
    return float(out[0]) if D.ndim == 0 else out.reshape(D.shape)
