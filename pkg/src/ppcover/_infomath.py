"""Shared conventions for x log x, divergences and entropies.

Every ``0 log 0`` / ``0 log(0/0)`` decision in the package goes through here.
All logarithms are natural.
"""
import numpy as np
from scipy.special import xlogy


def phi(x):
    """x log x with 0 log 0 = 0. Works on scalars and arrays."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("phi is defined for x >= 0 only")
    out = xlogy(x, x)
    return float(out) if out.ndim == 0 else out


def plogratio(p, q):
    """Elementwise p log(p/q) with 0 log(0/q) = 0 and p log(p/0) = +inf for p > 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = xlogy(p, p) - xlogy(p, q)
    out = np.where(p > 0, out, 0.0)
    out = np.where((p > 0) & (q <= 0), np.inf, out)
    return out


def kl(p, q):
    """Relative entropy sum p log(p/q) in nats."""
    return float(np.sum(plogratio(p, q)))


def entropy(p):
    p = np.asarray(p, dtype=float)
    return float(-np.sum(xlogy(p, p)))


def mutual_information(joint):
    """Exact I(A;B) for a 2-D joint pmf, zero-mass cells skipped."""
    joint = np.asarray(joint, dtype=float)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    # log p - log pa - log pb: the product pa * pb can underflow where p does not
    live = joint > 0
    with np.errstate(divide="ignore"):
        terms = joint * (np.log(np.where(live, joint, 1.0)) - np.log(np.where(live, pa, 1.0))
                         - np.log(np.where(live, pb, 1.0)))
    # the sum is >= 0 exactly; clip round-off from near-independent tables
    return max(float(np.sum(terms)), 0.0)


def check_pmf(p, name="pmf", tol=1e-12):
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol) or not np.isfinite(p).all():
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return np.clip(p, 0.0, None)
