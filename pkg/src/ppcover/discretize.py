"""Slotted (binary) surrogate of the Poisson source, test channels, and the
exact finite-width quantities whose Delta -> 0 limits are the region formulas."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._infomath import kl, mutual_information
from .analytic import ReconSet, as_atoms, reconstruction_cost, xi
from .point_process import CountingPath, ParameterError

DEFAULT_DELTAS = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class TestChannel:
    """P(U = k | Ybar = 0) = alpha_k and P(U = k | Ybar = 1) = beta_k."""

    __test__ = False  # keep pytest from collecting the class by name

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_atoms(self.alpha, "alpha"))
        object.__setattr__(self, "beta", as_atoms(self.beta, "beta"))

    def matrix(self) -> np.ndarray:
        return np.vstack((self.alpha, self.beta))

    def check_support(self):
        if np.any((self.alpha == 0) & (self.beta > 0)):
            raise ParameterError("support condition alpha_k = 0 => beta_k = 0 violated")
        return self


@dataclass(frozen=True)
class SlotModel:
    delta: float
    n: int
    p_one: float

    @classmethod
    def poisson(cls, lam: float, horizon: float, delta: float) -> "SlotModel":
        if delta <= 0 or lam < 0:
            raise ParameterError("need delta > 0 and lam >= 0")
        return cls(delta, int(round(horizon / delta)), -math.expm1(-lam * delta))


def discretize(path: CountingPath, delta: float):
    """Per-slot indicator and count over ((j-1)delta, j delta]."""
    if not delta > 0:
        raise ParameterError("slot width must be positive")
    ratio = path.horizon / delta
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9:
        n = int(math.floor(ratio))
        warnings.warn("horizon is not a multiple of delta; dropping the last partial slot",
                      RuntimeWarning, stacklevel=2)
    idx = np.ceil(path.arrivals / delta).astype(np.int64) - 1
    idx = np.clip(idx, 0, None)
    idx = idx[idx < n]
    counts = np.bincount(idx, minlength=n)[:n]
    return (counts > 0).astype(np.int8), counts


def dbar(yhat, ybar, delta: float):
    """yhat - 1{ybar=1} log(yhat)/delta, with yhat = 0 costing +inf only when ybar = 1."""
    yhat = np.asarray(yhat, dtype=float)
    ybar = np.asarray(ybar)
    if np.any(yhat < 0):
        raise ParameterError("reconstruction must be non-negative")
    with np.errstate(divide="ignore"):
        logs = np.log(yhat)
    out = np.where(ybar == 1, yhat - logs / delta, yhat)
    return float(out) if out.ndim == 0 else out


def mi_binary_channel(p_one: float, channel: TestChannel) -> float:
    """Exact I(U; Ybar) for Ybar ~ Bernoulli(p_one) through ``channel``."""
    if not 0 <= p_one <= 1:
        raise ParameterError("p_one must be a probability")
    joint = np.array([1 - p_one, p_one])[:, None] * channel.matrix()
    return mutual_information(joint)


def _expected_dbar(p_y, rows, recon, delta):
    """E dbar when P(Ybar = y) = p_y[y] and U | Ybar = y has law rows[y]."""
    total = 0.0
    for y in (0, 1):
        mass = p_y[y] * rows[y]
        used = mass > 0
        if np.any(used):
            total += float(np.dot(mass[used], dbar(recon[used], y, delta)))
    return total


def _kappa(recon):
    pos = np.asarray(recon)[np.asarray(recon) > 0]
    return float(np.max(np.abs(np.log(pos)))) if pos.size else 0.0


def overflow_term(lam: float, delta: float, kappa: float) -> float:
    """kappa (lam - lam e^{-lam delta}): expected uncounted arrivals per unit time times kappa."""
    return kappa * lam * -math.expm1(-lam * delta)


def default_reconstruction(lam, A: ReconSet, channel: TestChannel) -> np.ndarray:
    """Per-atom value minimizing v - u log v at u = lam beta_k / alpha_k."""
    a, b = channel.alpha, channel.beta
    u = np.divide(lam * b, a, out=np.full(a.shape, lam), where=a > 0)
    return A.minimizer(u)


@dataclass
class ScalingRow:
    delta: float
    I_over_delta: float
    R_target: float
    E_dbar: float
    D_target: float
    overflow_term: float


@dataclass
class CEOScalingRow:
    delta: float
    I1_over_delta: float
    R1_target: float
    I2_over_delta: float
    R2_target: float
    E_dbar: float
    D_target: float
    overflow_term: float
    E_yhat: float


def table_to_csv(rows) -> str:
    if not rows:
        return ""
    names = list(vars(rows[0]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([format(float(getattr(row, k)), ".12g") for k in names])
    return buf.getvalue()


def delta_scaling_single(lam, A: ReconSet, alpha, beta, recon=None, deltas=DEFAULT_DELTAS):
    """Exact I/Delta and E dbar of the slotted test channel for each Delta."""
    channel = TestChannel(alpha, beta).check_support()
    if recon is None:
        recon = default_reconstruction(lam, A, channel)
    recon = np.asarray(recon, dtype=float)
    R_target = lam * kl(channel.beta, channel.alpha)
    used = channel.alpha > 0
    u = lam * channel.beta[used] / channel.alpha[used]
    v = recon[used]
    # sum_k alpha_k (v_k - u_k log v_k); equals the Psi target when recon is the minimizer
    cost = reconstruction_cost(v, u)
    D_target = float(np.dot(channel.alpha[used], cost))
    kappa = _kappa(recon[used])
    rows = []
    for delta in deltas:
        q = -math.expm1(-lam * delta)
        I = mi_binary_channel(q, channel)
        E = _expected_dbar((1 - q, q), channel.matrix(), recon, delta)
        rows.append(ScalingRow(delta, I / delta, R_target, E, D_target, overflow_term(lam, delta, kappa)))
    return rows


def derive_observation_channel(lam, p, mu, delta) -> np.ndarray:
    """Exact 2x2 P(Ybar_i | Ybar) after p-thinning and rate-mu Poisson noise."""
    if lam <= 0 or not 0 <= p <= 1 or mu < 0 or delta <= 0:
        raise ParameterError("invalid observation-channel parameters")
    quiet = math.exp(-mu * delta)
    hit = -math.expm1(-lam * delta)
    # P(no survivor | at least one point)
    none = math.exp(-(1 - p) * lam * delta) * -math.expm1(-p * lam * delta) / hit
    return np.array([[quiet, 1 - quiet], [quiet * none, 1 - quiet * none]])


def ceo_slot_joint(lam, p1, p2, mu1, mu2, delta) -> np.ndarray:
    """Exact P(Ybar, Ybar1, Ybar2) as a 2x2x2 array.

    The two observations are not conditionally independent given the binary
    Ybar (both depend on the underlying count), so the table is built from the
    count: P(no survivor at i | c) = p_i^c and E[x^c 1{c >= 1}] = e^{-ld}(e^{ld x} - 1).
    """
    for p in (p1, p2):
        if not 0 <= p <= 1:
            raise ParameterError("thinning probabilities must be in [0, 1]")
    if lam <= 0 or mu1 < 0 or mu2 < 0 or delta <= 0:
        raise ParameterError("invalid CEO slot parameters")
    ld = lam * delta

    def g(x):
        # E[x^C 1{C>=1}]
        return math.exp(-ld) * math.expm1(ld * x)

    q1, q2 = math.exp(-mu1 * delta), math.exp(-mu2 * delta)
    out = np.zeros((2, 2, 2))
    p0 = math.exp(-ld)
    out[0] = p0 * np.outer([q1, 1 - q1], [q2, 1 - q2])
    # P(Ybar=1, Ybar1=0, Ybar2=0) etc. by inclusion-exclusion
    both_off = q1 * q2 * g(p1 * p2)
    one_off = q1 * g(p1)
    two_off = q2 * g(p2)
    total = -math.expm1(-ld)
    out[1, 0, 0] = both_off
    out[1, 0, 1] = one_off - both_off
    out[1, 1, 0] = two_off - both_off
    out[1, 1, 1] = total - one_off - two_off + both_off
    return np.clip(out, 0.0, None)


def ceo_reconstruction(lam, ch1: TestChannel, ch2: TestChannel, p1, p2) -> np.ndarray:
    """yhat(k1, k2) = lam (gamma1/alpha1)(gamma2/alpha2); ratio 1 on unused atoms."""
    ratios = []
    for ch, p in ((ch1, p1), (ch2, p2)):
        gamma = p * ch.alpha + (1 - p) * ch.beta
        ratios.append(np.divide(gamma, ch.alpha, out=np.ones(4), where=ch.alpha > 0))
    return lam * np.outer(ratios[0], ratios[1])


def ceo_targets(lam, p1, p2, mu1, mu2, ch1, ch2):
    R = []
    D = xi(lam)
    for ch, p, mu in ((ch1, p1, mu1), (ch2, p2, mu2)):
        gamma = p * ch.alpha + (1 - p) * ch.beta
        R.append(((1 - p) * lam + mu) * kl(ch.beta, ch.alpha))
        D -= lam * kl(gamma, ch.alpha)
    return R[0], R[1], D


def delta_scaling_ceo(lam, p, mu, channels, deltas=DEFAULT_DELTAS):
    """Exact per-slot CEO quantities versus their Delta -> 0 targets."""
    p1, p2 = p
    mu1, mu2 = mu
    ch1, ch2 = (c if isinstance(c, TestChannel) else TestChannel(*c) for c in channels)
    for ch, pi in ((ch1, p1), (ch2, p2)):
        if pi < 1:
            ch.check_support()
        elif np.max(np.abs(ch.alpha - ch.beta)) > 1e-12:
            raise ParameterError("p = 1 requires alpha = beta")
    recon = ceo_reconstruction(lam, ch1, ch2, p1, p2)
    R1, R2, D_target = ceo_targets(lam, p1, p2, mu1, mu2, ch1, ch2)
    kappa = _kappa(recon)
    rows = []
    for delta in deltas:
        joint = ceo_slot_joint(lam, p1, p2, mu1, mu2, delta)
        I = []
        for axes, ch in (((0, 2), ch1), ((0, 1), ch2)):
            I.append(mi_binary_channel(float(joint.sum(axis=axes)[1]), ch))
        # P(Ybar = y, U1 = k1, U2 = k2)
        full = np.einsum("yab,ak,bl->ykl", joint, ch1.matrix(), ch2.matrix())
        p_y = full.sum(axis=(1, 2))
        rows_y = [full[y].reshape(-1) / p_y[y] for y in (0, 1)]
        E = _expected_dbar(p_y, rows_y, recon.reshape(-1), delta)
        E_yhat = float(np.sum(full.sum(axis=0) * recon))
        rows.append(CEOScalingRow(delta, I[0] / delta, R1, I[1] / delta, R2, E, D_target,
                                  overflow_term(lam, delta, kappa), E_yhat))
    return rows


def encoder_output_law(lam, p, mu, delta, channel: TestChannel) -> np.ndarray:
    """P(U = k | Ybar = 1) for an encoder observing the degraded slot."""
    obs = derive_observation_channel(lam, p, mu, delta)
    return obs[1] @ channel.matrix()


def covering_parameters():
    """The two-atom covering construction at lam = 1 and D = 1/2."""
    return np.array([0.5, 0.5, 0, 0]), np.array([1.0, 0, 0, 0])


__all__ = [
    "TestChannel", "SlotModel", "discretize", "dbar", "mi_binary_channel", "delta_scaling_single",
    "derive_observation_channel", "ceo_slot_joint", "delta_scaling_ceo", "encoder_output_law",
    "overflow_term", "table_to_csv", "ceo_reconstruction", "ceo_targets", "covering_parameters",
]
