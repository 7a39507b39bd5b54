"""Exact finite-model checks of the thinning and superposition information bounds."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import comb
from scipy.stats import poisson

from ._infomath import check_pmf, mutual_information, phi
from .point_process import ParameterError

TRUNCATION = 1e-12


def exact_mi(joint) -> float:
    """I(A; B) for a 2-D joint pmf (rows A, columns B)."""
    joint = np.asarray(joint, dtype=float)
    if joint.ndim != 2:
        raise ParameterError("joint pmf must be 2-D")
    check_pmf(joint.reshape(-1), "joint")
    return mutual_information(joint)


def poisson_cutoff(mean: float, n_slots: int = 1, tail=TRUNCATION) -> int:
    """Smallest c with n_slots * P(Poisson(mean) > c) < tail."""
    c = 0
    while n_slots * poisson.sf(c, mean) >= tail:
        c += 1
    return c


@dataclass
class FiniteModel:
    """Joint law of a message and n slot counts, each in {0..c_max}.

    ``joint`` has shape (m, (c_max+1)**n) with slot 1 as the most significant
    digit of the outcome index.
    """

    joint: np.ndarray
    n: int
    c_max: int
    delta: float
    truncated_mass: float = 0.0

    def __post_init__(self):
        self.joint = np.asarray(self.joint, dtype=float)
        if self.joint.shape[1] != (self.c_max + 1) ** self.n:
            raise ParameterError("joint table does not match n and c_max")
        check_pmf(self.joint.reshape(-1), "joint")

    @property
    def m(self) -> int:
        return self.joint.shape[0]

    def tensor(self) -> np.ndarray:
        return self.joint.reshape((self.m,) + (self.c_max + 1,) * self.n)

    def mi(self) -> float:
        return mutual_information(self.joint)

    def message_pmf(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def slot_marginal(self, j: int) -> np.ndarray:
        t = self.tensor()
        axes = tuple(k for k in range(t.ndim) if k != j + 1)
        return t.sum(axis=axes)

    @classmethod
    def from_slot_laws(cls, msg_pmf, slot_laws, delta) -> "FiniteModel":
        """Slots conditionally independent given M; slot_laws has shape (m, n, c_max+1)."""
        msg_pmf = check_pmf(msg_pmf, "message pmf")
        laws = np.asarray(slot_laws, dtype=float)
        m, n, k = laws.shape
        for row in laws.reshape(-1, k):
            check_pmf(row, "slot law")
        joint = np.empty((m, k ** n))
        for i in range(m):
            out = np.ones(1)
            for j in range(n):
                out = np.multiply.outer(out, laws[i, j]).reshape(-1)
            joint[i] = msg_pmf[i] * out
        return cls(joint, n, k - 1, delta)


def truncated_poisson(mean, c_max):
    pmf = poisson.pmf(np.arange(c_max + 1), mean)
    lost = 1.0 - pmf.sum()
    return pmf / pmf.sum(), lost


def random_poisson_model(rng: np.random.Generator, n=None, m=None, lam_delta=None,
                         delta=0.1, c_max=None) -> FiniteModel:
    """Random model whose slot counts are marginally i.i.d. Poisson(lam_delta).

    Y is drawn from the (truncated, renormalized) product Poisson law and M
    from a random channel P(M | Y) with a random Dirichlet concentration, so
    the marginal of Y is Poisson exactly up to the reported truncation.
    """
    n = int(rng.integers(1, 7)) if n is None else n
    m = int(rng.integers(2, 5)) if m is None else m
    lam_delta = float(rng.uniform(0.02, 0.2)) if lam_delta is None else lam_delta
    if c_max is None:
        c_max = poisson_cutoff(lam_delta, n)
    slot, lost = truncated_poisson(lam_delta, c_max)
    py = np.ones(1)
    for _ in range(n):
        py = np.multiply.outer(py, slot).reshape(-1)
    conc = float(rng.choice([0.1, 0.5, 1.0, 5.0]))
    channel = rng.dirichlet(np.full(m, conc), size=py.size)
    joint = (channel * py[:, None]).T
    joint /= joint.sum()
    return FiniteModel(joint, n, c_max, delta, truncated_mass=1 - (1 - lost) ** n)


def binomial_kernel(c_max, keep):
    """K[c, z] = P(z survivors of c points), each surviving with prob ``keep``."""
    c = np.arange(c_max + 1)
    lost = np.clip(c[:, None] - c[None, :], 0, None)
    K = comb(c[:, None], c[None, :]) * keep ** c[None, :] * (1 - keep) ** lost
    return np.where(c[None, :] <= c[:, None], K, 0.0)


def _per_axis(model: FiniteModel, kernel: np.ndarray, new_c_max: int) -> FiniteModel:
    t = model.tensor()
    for ax in range(1, model.n + 1):
        t = np.moveaxis(np.tensordot(t, kernel, axes=([ax], [0])), -1, ax)
    joint = t.reshape(model.m, -1)
    return FiniteModel(joint / joint.sum(), model.n, new_c_max, model.delta, model.truncated_mass)


def apply_thinning(model: FiniteModel, p: float) -> FiniteModel:
    """Delete each point independently with probability p (counts stay in range)."""
    if not 0 <= p <= 1:
        raise ParameterError("p must be in [0, 1]")
    if p == 0:
        return FiniteModel(model.joint.copy(), model.n, model.c_max, model.delta, model.truncated_mass)
    return _per_axis(model, binomial_kernel(model.c_max, 1 - p), model.c_max)


def apply_noise(model: FiniteModel, mu_delta: float, c_noise=None) -> FiniteModel:
    """Add independent Poisson(mu_delta) counts to every slot (noise truncated and renormalized)."""
    if mu_delta < 0:
        raise ParameterError("noise mean must be >= 0")
    if c_noise is None:
        c_noise = poisson_cutoff(mu_delta, model.n) if mu_delta > 0 else 0
    noise, _ = truncated_poisson(mu_delta, c_noise)
    K = np.zeros((model.c_max + 1, model.c_max + c_noise + 1))
    for c in range(model.c_max + 1):
        K[c, c:c + c_noise + 1] = noise
    return _per_axis(model, K, model.c_max + c_noise)


def thinning_sdpi_check(model: FiniteModel, p: float) -> dict:
    if p == 0 or p == 1:
        # both sides coincide exactly; skip a recomputation that differs in the last bits
        lhs = rhs = model.mi() if p == 0 else 0.0
        return {"lhs": lhs, "rhs": rhs, "slack": 0.0}
    lhs = apply_thinning(model, p).mi()
    rhs = (1 - p) * model.mi()
    return {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs}


def thinning_ratio_profile(model: FiniteModel, ps) -> np.ndarray:
    """I(M; Z_p) / (1 - p) for p < 1; thinning composes, so this never increases in p."""
    return np.array([apply_thinning(model, p).mi() / (1 - p) for p in ps])


@dataclass
class SDPIRow:
    model_id: int
    p_or_mu: float
    delta: float
    lhs: float
    rhs: float
    slack: float


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model_id", "p_or_mu", "delta", "lhs", "rhs", "slack"])
    for r in rows:
        w.writerow([r.model_id, format(r.p_or_mu, ".12g"), format(r.delta, ".12g"),
                    format(r.lhs, ".17g"), format(r.rhs, ".17g"), format(r.slack, ".17g")])
    return buf.getvalue()


def thinning_batch(n_models: int, seed: int, ps=tuple(np.round(np.arange(1, 10) / 10, 1))):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_models):
        model = random_poisson_model(rng)
        for p in ps:
            r = thinning_sdpi_check(model, float(p))
            rows.append(SDPIRow(i, float(p), model.delta, r["lhs"], r["rhs"], r["slack"]))
    return rows


# ---------------------------------------------------------------- superposition

@dataclass
class CountMessageModel:
    """Y Poisson(lam) on [0, T] and M = labels[min(N_T, len(labels)-1)].

    Because M depends on Y only through N_T, and the noisy count Z_T = N_T +
    Poisson(mu T) is sufficient for M given the noisy path, every quantity
    below is exact with no slot truncation.
    """

    lam: float
    T: float
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.lam <= 0 or self.T <= 0 or self.labels.size == 0:
            raise ParameterError("need lam > 0, T > 0 and at least one label")
        self.n_msg = int(self.labels.max()) + 1
        self.c_top = max(poisson_cutoff(self.lam * self.T, tail=1e-16), self.labels.size)

    @classmethod
    def threshold(cls, lam, T, cut=None):
        """Two messages: whether N_T exceeds ``cut`` (default: the median of N_T)."""
        cut = int(poisson.median(lam * T)) if cut is None else cut
        return cls(lam, T, (np.arange(cut + 2) > cut).astype(int))

    def label(self, c):
        return self.labels[np.minimum(c, self.labels.size - 1)]

    def message_given_remaining(self, t):
        """P(M = m | N_t = k) as an array (k, m) for k = 0..c_top."""
        rem = poisson.pmf(np.arange(self.c_top + 1), self.lam * (self.T - t))
        out = np.zeros((self.c_top + 2, self.n_msg))
        ks = np.arange(self.c_top + 2)
        for c, w in enumerate(rem):
            np.add.at(out, (ks, self.label(ks + c)), w)
        return out

    def joint_count_message(self):
        c = np.arange(self.c_top + 1)
        pn = poisson.pmf(c, self.lam * self.T)
        out = np.zeros((self.c_top + 1, self.n_msg))
        out[c, self.label(c)] = pn
        return out / out.sum()

    def mi_clean(self) -> float:
        return mutual_information(self.joint_count_message())

    def mi_noisy(self, mu) -> float:
        """I(M; Z) with Z the superposition of Y and rate-mu Poisson noise."""
        j = self.joint_count_message()
        if mu == 0:
            return mutual_information(j)
        c_noise = poisson_cutoff(mu * self.T, tail=1e-16)
        noise = poisson.pmf(np.arange(c_noise + 1), mu * self.T)
        zm = np.zeros((j.shape[0] + c_noise, self.n_msg))
        for m in range(self.n_msg):
            zm[:, m] = np.convolve(j[:, m], noise)
        return mutual_information(zm / zm.sum())

    def _weights(self, t):
        """P(N_t = k, M = m) and the intensity lam P(m | k+1)/P(m | k)."""
        ks = np.arange(self.c_top + 1)
        pk = poisson.pmf(ks, self.lam * t)
        cond = self.message_given_remaining(t)
        joint = pk[:, None] * cond[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            gamma = np.where(cond[:-1] > 0, self.lam * cond[1:] / cond[:-1], 0.0)
        return joint, gamma

    def continuous_bound(self, mu) -> float:
        """int_0^T E[phi(Gamma_t + mu) - phi(lam + mu)] dt."""
        base = phi(self.lam + mu)

        def f(t):
            joint, gamma = self._weights(t)
            return float(np.sum(joint * phi(gamma + mu))) - base

        val, _ = quad(f, 0.0, self.T, epsabs=1e-11, epsrel=1e-10, limit=400)
        return val

    def discrete_bound(self, mu, delta) -> float:
        """sum_j delta E[phi(Gamma_j + mu) - phi(lam_delta + mu)], Gamma_j = P(slot busy | M, past)/delta.

        lam_delta = (1 - e^{-lam delta})/delta is the mean of Gamma_j, so each
        slot term is a Jensen gap: zero when M is independent of Y, and the
        sum tends to the continuous bound as delta -> 0."""
        n = int(round(self.T / delta))
        if abs(n * delta - self.T) > 1e-9 * self.T:
            raise ParameterError("T must be a multiple of delta")
        empty = math.exp(-self.lam * delta)
        base = phi((1 - empty) / delta + mu)
        total = 0.0
        ks = np.arange(self.c_top + 1)
        for j in range(n):
            t = j * delta
            pk = poisson.pmf(ks, self.lam * t)
            cond = self.message_given_remaining(t)[:-1]
            after = self.message_given_remaining(t + delta)
            # P(M = m | N_t = k, slot empty) = P(M = m | N_{t+delta} = k)
            busy = cond - empty * after[:-1]
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(cond > 0, np.clip(busy, 0, None) / cond, 0.0) / delta
            total += delta * (float(np.sum(pk[:, None] * cond * phi(g + mu))) - base)
        return total


@dataclass
class SuperpositionRow:
    delta: float
    lhs: float
    rhs: float
    slack: float
    slack_over_delta: float


def superposition_bound_check(model: CountMessageModel, mu, deltas=(0.05, 0.02, 0.01)):
    """Exact I(M; Z) against the discrete bound for each slot width.

    Returns the rows, the continuous-time bound, and the fitted c such that
    slack >= -c * delta on the grid (0 when every slack is non-negative)."""
    lhs = model.mi_noisy(mu)
    rows = []
    for d in deltas:
        rhs = model.discrete_bound(mu, d)
        rows.append(SuperpositionRow(d, lhs, rhs, rhs - lhs, (rhs - lhs) / d))
    c = max(0.0, max(-r.slack_over_delta for r in rows))
    return rows, model.continuous_bound(mu), c


def superposition_rows(model_id, rows, mu):
    return [SDPIRow(model_id, mu, r.delta, r.lhs, r.rhs, r.slack) for r in rows]
