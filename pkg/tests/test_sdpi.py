import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from oracles import MI_JOINT_2X2, mi_loops
from ppcover.point_process import ParameterError
from ppcover.sdpi import (CountMessageModel, FiniteModel, TRUNCATION, apply_noise, apply_thinning,
                          binomial_kernel, exact_mi, poisson_cutoff, random_poisson_model, rows_to_csv,
                          superposition_bound_check, superposition_rows, thinning_batch,
                          thinning_ratio_profile, thinning_sdpi_check, truncated_poisson)

PS = np.round(np.arange(1, 10) / 10, 1)


def test_exact_mi_examples():
    assert exact_mi(np.outer([0.3, 0.7], [0.2, 0.5, 0.3])) == pytest.approx(0, abs=1e-16)
    assert exact_mi(np.eye(4) / 4) == pytest.approx(math.log(4), abs=1e-15)
    assert exact_mi([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(MI_JOINT_2X2, abs=1e-15)
    with pytest.raises(ValueError):
        exact_mi([[0.5, 0.6], [0.0, 0.0]])
    with pytest.raises(ParameterError):
        exact_mi([0.5, 0.5])


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 6))
@settings(max_examples=100, deadline=None)
def test_exact_mi_matches_loops(seed, m, k):
    rng = np.random.default_rng(seed)
    joint = rng.dirichlet(np.full(m * k, 0.3)).reshape(m, k)
    assert exact_mi(joint) == pytest.approx(mi_loops(joint.tolist()), abs=1e-12)


def test_binomial_kernel_example():
    model = FiniteModel(np.array([[0.25, 0.25], [0.25, 0.25]]), 1, 1, 0.1)
    out = apply_thinning(model, 0.5)
    assert out.slot_marginal(0) == pytest.approx([0.75, 0.25], abs=1e-15)
    K = binomial_kernel(3, 0.4)
    assert np.allclose(K.sum(axis=1), 1) and np.allclose(np.triu(K, 1), 0)


def test_thinning_extremes():
    model = random_poisson_model(np.random.default_rng(0))
    same = apply_thinning(model, 0.0)
    assert np.array_equal(same.joint, model.joint)
    empty = apply_thinning(model, 1.0).tensor()
    origin = (slice(None),) + (0,) * model.n
    assert empty[origin].sum() == pytest.approx(1, abs=1e-14)
    r0, r1 = thinning_sdpi_check(model, 0.0), thinning_sdpi_check(model, 1.0)
    assert r0["slack"] == 0.0
    assert r1["lhs"] == pytest.approx(0, abs=1e-14) and r1["slack"] == pytest.approx(0, abs=1e-14)
    with pytest.raises(ParameterError):
        apply_thinning(model, 1.2)


def test_random_models_are_marginally_poisson():
    rng = np.random.default_rng(17)
    for _ in range(20):
        model = random_poisson_model(rng)
        lam_delta = None
        for j in range(model.n):
            marg = model.slot_marginal(j)
            if lam_delta is None:
                lam_delta = marg @ np.arange(marg.size)
            ref, _ = truncated_poisson(lam_delta, model.c_max)
            # summation round-off over thousands of cells sits just above 1e-12
            assert marg == pytest.approx(ref, abs=1e-11)
        assert model.truncated_mass < TRUNCATION
        # thinning keeps Poissonity with mean scaled by 1 - p
        thinned = apply_thinning(model, 0.3).slot_marginal(0)
        assert thinned == pytest.approx(poisson.pmf(np.arange(model.c_max + 1), 0.7 * lam_delta), abs=1e-11)


def test_poisson_cutoff():
    c = poisson_cutoff(0.2, 6)
    assert 6 * poisson.sf(c, 0.2) < TRUNCATION <= 6 * poisson.sf(c - 1, 0.2)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_thinning_sdpi_random_models(seed):
    model = random_poisson_model(np.random.default_rng(seed))
    for p in PS:
        assert thinning_sdpi_check(model, float(p))["slack"] >= -1e-12
    ratio = thinning_ratio_profile(model, np.concatenate(([0.0], PS)))
    assert np.all(np.diff(ratio) <= 1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 0.5))
@settings(max_examples=40, deadline=None)
def test_weak_dpi(seed, p, mu_delta):
    model = random_poisson_model(np.random.default_rng(seed), n=int(seed % 3) + 1)
    base = model.mi()
    assert apply_thinning(model, p).mi() <= base + 1e-12
    assert apply_noise(model, mu_delta).mi() <= base + 1e-12


def test_slot_laws_constructor():
    laws = np.array([[[0.9, 0.1], [0.8, 0.2]], [[0.5, 0.5], [0.6, 0.4]]])
    model = FiniteModel.from_slot_laws([0.5, 0.5], laws, 0.1)
    assert model.joint.shape == (2, 4)
    assert model.joint[0] == pytest.approx(0.5 * np.outer([0.9, 0.1], [0.8, 0.2]).reshape(-1))
    with pytest.raises(ParameterError):
        FiniteModel(np.ones((2, 3)) / 6, 1, 1, 0.1)


def test_noise_matches_one_slot_model():
    """The count model's I(M; Z) against a one-slot FiniteModel pushed through apply_noise."""
    lam, T, mu = 1.0, 2.0, 0.5
    cm = CountMessageModel.threshold(lam, T)
    c_max = poisson_cutoff(lam * T, tail=1e-16)
    pc, _ = truncated_poisson(lam * T, c_max)
    joint = np.zeros((2, c_max + 1))
    joint[cm.label(np.arange(c_max + 1)), np.arange(c_max + 1)] = pc
    fm = FiniteModel(joint, 1, c_max, T)
    assert fm.mi() == pytest.approx(cm.mi_clean(), abs=1e-12)
    assert apply_noise(fm, mu * T, poisson_cutoff(mu * T, tail=1e-16)).mi() == pytest.approx(cm.mi_noisy(mu), abs=1e-12)


def test_noise_lowers_information():
    cm = CountMessageModel.threshold(1.5, 2.0)
    vals = [cm.mi_noisy(mu) for mu in (0.0, 0.25, 0.5, 1.0, 2.0)]
    assert vals[0] == pytest.approx(cm.mi_clean()) and np.all(np.diff(vals) < 0)


def test_superposition_zero_noise_trend():
    cm = CountMessageModel.threshold(1.0, 2.0)
    rows, cont, c = superposition_bound_check(cm, 0.0, (0.05, 0.02, 0.01))
    # the continuous bound is the exact clean information when mu = 0
    assert cont == pytest.approx(cm.mi_clean(), abs=1e-9)
    gaps = [abs(r.slack) for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert all(r.slack >= -c * r.delta - 1e-12 for r in rows)
    assert max(abs(r.slack_over_delta) for r in rows) < 5


def test_superposition_independent_message():
    cm = CountMessageModel(1.0, 2.0, [0])
    assert cm.mi_noisy(0.5) == pytest.approx(0, abs=1e-14)
    for d in (0.05, 0.02):
        assert cm.discrete_bound(0.5, d) == pytest.approx(0, abs=1e-12)
    assert cm.continuous_bound(0.5) == pytest.approx(0, abs=1e-12)


def test_superposition_two_message_example():
    cm = CountMessageModel.threshold(1.0, 2.0)
    rows, cont, c = superposition_bound_check(cm, 0.5, (0.05, 0.02, 0.01))
    assert c >= 0 and all(r.slack >= -c * r.delta - 1e-12 for r in rows)
    assert rows[0].lhs < cont
    # refining the slots approaches the continuous bound
    assert abs(rows[-1].rhs - cont) < abs(rows[0].rhs - cont)


def test_superposition_errors():
    with pytest.raises(ParameterError):
        CountMessageModel.threshold(1.0, 2.0).discrete_bound(0.5, 0.3)
    with pytest.raises(ParameterError):
        CountMessageModel(0.0, 1.0, [0, 1])


def test_batch_csv_deterministic():
    a = rows_to_csv(thinning_batch(3, seed=5))
    assert a == rows_to_csv(thinning_batch(3, seed=5))
    lines = a.splitlines()
    assert lines[0] == "model_id,p_or_mu,delta,lhs,rhs,slack" and len(lines) == 1 + 3 * 9
    rows, _, _ = superposition_bound_check(CountMessageModel.threshold(1.0, 1.0), 0.5, (0.1,))
    assert rows_to_csv(superposition_rows(7, rows, 0.5)).splitlines()[1].startswith("7,0.5,0.1,")
