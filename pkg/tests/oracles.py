"""Independent reference computations and frozen reference values.

Nothing here imports the package; each function re-derives its quantity from
first principles with plain loops or mpmath so tests compare two separate
routes to the same number.
"""
import math

import mpmath as mp

mp.mp.dps = 40

# frozen values (40-digit mpmath, rounded)
LOG2 = 0.6931471805599453
XI_2 = 0.6137056388801094               # 2 - 2 log 2
DIST_CONST2_3PTS_T5 = 7.920558458320164  # 10 - 3 log 2
PSI_HALF_TWO_AT_1 = 1.1931471805599454   # 0.5 + log 2
MI_BSC_QUARTER = 0.13081203594113696     # log 2 - h(1/4)
MI_JOINT_2X2 = 0.19274475702175743       # [[.4,.1],[.1,.4]]
DBAR_2_1_HALF = 0.6137056388801094       # 2 - log(2)/0.5


def phi(x):
    return 0.0 if x == 0 else x * math.log(x)


def mi_loops(joint):
    """Mutual information of a nested-list joint pmf, by explicit loops."""
    rows = [sum(r) for r in joint]
    cols = [sum(joint[i][j] for i in range(len(joint))) for j in range(len(joint[0]))]
    total = 0.0
    for i, r in enumerate(joint):
        for j, p in enumerate(r):
            if p > 0:
                total += p * (math.log(p) - math.log(rows[i]) - math.log(cols[j]))
    return total


def kl_loops(p, q):
    return sum(a * math.log(a / b) for a, b in zip(p, q) if a > 0)


def psi_scan(values, u):
    best = math.inf
    for v in values:
        if v == 0:
            cost = 0.0 if u == 0 else math.inf
        else:
            cost = v - u * math.log(v)
        best = min(best, cost)
    return best


def phi_hazard_integral_mp(lam, a, b, theta):
    """int_a^theta h log h dt with h = lam / (1 - exp(-lam (b - t))), by mpmath quadrature."""
    lam, a, b, theta = (mp.mpf(x) for x in (lam, a, b, theta))

    def f(t):
        h = lam / (1 - mp.exp(-lam * (b - t)))
        return h * mp.log(h)

    return float(mp.quad(f, [a, (a + theta) / 2, theta]))


def ff_entropy_mp(lam, T, R):
    """H(M) of the first-arrival scheme in high precision."""
    J = mp.ceil(mp.exp(mp.mpf(R) * T))
    d = mp.exp(-mp.mpf(lam) * T)
    if J < 2:
        return 0.0
    return float(-d * mp.log(d) - (1 - d) * mp.log(1 - d) + (1 - d) * mp.log(J - 1))


def binary_covering_rd(q, D):
    """min I(X; Xhat) for X ~ Bern(q) with Xhat >= X and P(Xhat = 1) = D (one-sided erasure).

    I = h(D) - (1 - q) h((D - q) / (1 - q))."""
    def h(x):
        return 0.0 if x in (0.0, 1.0) else -x * math.log(x) - (1 - x) * math.log(1 - x)
    return h(D) - (1 - q) * h((D - q) / (1 - q))


def ceo_joint_mc(lam, p1, p2, mu1, mu2, delta, n, rng):
    """Monte Carlo of (Ybar, Ybar1, Ybar2) by sampling the slot count, two
    independent thinnings and two independent noise counts."""
    import numpy as np

    c = rng.poisson(lam * delta, n)
    s1 = rng.binomial(c, 1 - p1) + rng.poisson(mu1 * delta, n)
    s2 = rng.binomial(c, 1 - p2) + rng.poisson(mu2 * delta, n)
    out = np.zeros((2, 2, 2))
    np.add.at(out, ((c > 0).astype(int), (s1 > 0).astype(int), (s2 > 0).astype(int)), 1)
    return out / n
