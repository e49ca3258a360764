import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from saefh import (
    AreaUnitSample,
    InvalidDatasetError,
    UndefinedKurtosisError,
    area_moments,
    direct_mean,
    poisson_fourth_moment,
    poisson_variance,
    sampling_kurtosis,
)
from saefh.survey_moments import (
    UnitRecord,
    design_expectation,
    enumerate_poisson_samples,
    fourth_moment_from_z,
    group_units,
    pair_sum,
    pair_sum_naive,
    variance_from_z,
)


def _float_double_loop(a):
    total = 0.0
    for k in range(len(a)):
        for l in range(k + 1, len(a)):
            total += a[k] * a[l]
    return total


# -- hand examples -----------------------------------------------------------


def test_full_inclusion_gives_plain_mean_and_zero_moments():
    s = AreaUnitSample([1.0, 4.0, 7.0], 1.0)
    assert direct_mean(s) == (4.0, 3.0)
    assert poisson_variance(s) == 0.0
    assert poisson_fourth_moment(s) == 0.0


def test_equal_weights_example():
    s = AreaUnitSample([0.0, 2.0], [0.5, 0.5])
    assert direct_mean(s) == (1.0, 4.0)
    assert poisson_variance(s) == 0.25
    assert poisson_fourth_moment(s) == 0.109375
    assert sampling_kurtosis(s) == -1.25


def test_unequal_weights_mean():
    ybar, n_hat = direct_mean(AreaUnitSample([1.0, 3.0], [0.5, 0.25]))
    assert n_hat == 6.0
    assert ybar == pytest.approx(7 / 3, rel=1e-15)


def test_constant_sample():
    s = AreaUnitSample([2.5, 2.5, 2.5], [0.3, 0.6, 0.9])
    assert poisson_variance(s) == 0.0
    assert poisson_fourth_moment(s) == 0.0
    with pytest.raises(UndefinedKurtosisError):
        sampling_kurtosis(s)


def test_input_validation():
    with pytest.raises(InvalidDatasetError):
        AreaUnitSample([1.0, 2.0], [0.0, 0.5])
    with pytest.raises(InvalidDatasetError):
        AreaUnitSample([1.0, 2.0], [0.5, 1.5])
    with pytest.raises(InvalidDatasetError):
        poisson_variance(AreaUnitSample([1.0], [0.5]))
    with pytest.raises(InvalidDatasetError):
        UnitRecord(1.0, 0.0)


def test_from_units_and_grouping():
    s = AreaUnitSample.from_units([UnitRecord(0.0, 0.5), UnitRecord(2.0, 0.5)], "a")
    assert s.area_id == "a" and len(s) == 2
    groups = group_units(["b", "a", "b", "a"], [1.0, 2.0, 3.0, 4.0], [0.5] * 4)
    assert [g.area_id for g in groups] == ["b", "a"]
    np.testing.assert_array_equal(groups[0].y, [1.0, 3.0])


def test_area_moments_bundle():
    mom = area_moments(AreaUnitSample([0.0, 2.0], [0.5, 0.5], "x"))
    assert (mom.area_id, mom.y_bar, mom.n_hat, mom.v, mom.mu4, mom.kappa_e) == (
        "x", 1.0, 4.0, 0.25, 0.109375, -1.25)


def test_kurtosis_clamped():
    # two units with one tiny weight: the estimate would fall below -2
    s = AreaUnitSample([0.0, 1.0, 0.0, 1.0], [0.9, 0.9, 0.9, 0.9])
    assert sampling_kurtosis(s) >= -2.0


# -- pair sum ----------------------------------------------------------------


@given(st.lists(st.floats(0.0, 1e6, allow_subnormal=False), min_size=0, max_size=40))
def test_pair_sum_bit_identical_to_double_loop(values):
    a = np.array(values)
    assert pair_sum(a) == pair_sum_naive(a)


@given(st.lists(st.integers(0, 2**20), min_size=2, max_size=30))
def test_pair_sum_equals_float_loop_on_exact_inputs(values):
    a = np.array(values, dtype=float) / 1024.0
    assert pair_sum(a) == _float_double_loop(a)


def test_pair_sum_close_to_float_loop():
    a = np.random.default_rng(0).exponential(size=300)
    assert pair_sum(a) == pytest.approx(_float_double_loop(a), rel=1e-13)


def test_pair_sum_no_cancellation_with_dominant_term():
    a = np.array([1e10, 1e-6, 2e-6])
    assert pair_sum(a) == pytest.approx(1e10 * 3e-6 + 2e-12, rel=1e-15)


# -- invariances -------------------------------------------------------------


samples = st.integers(2, 25).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-100, 100), min_size=n, max_size=n),
        st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n),
    )
)


@given(samples, st.randoms(use_true_random=False), st.floats(-50, 50))
def test_reorder_and_shift_invariance(sample, rnd, c):
    y, pi = map(np.array, sample)
    perm = list(range(len(y)))
    rnd.shuffle(perm)
    base = AreaUnitSample(y, pi)
    moved = AreaUnitSample(y[perm] + c, pi[perm])
    scale = 1 + np.max(np.abs(y)) + abs(c)
    assert poisson_variance(moved) == pytest.approx(poisson_variance(base), rel=1e-9, abs=1e-12 * scale**2)
    assert poisson_fourth_moment(moved) == pytest.approx(
        poisson_fourth_moment(base), rel=1e-8, abs=1e-12 * scale**4)


@given(samples, st.floats(0.01, 100.0))
def test_scaling(sample, s):
    y, pi = map(np.array, sample)
    base = AreaUnitSample(y, pi)
    scaled = AreaUnitSample(y * s, pi)
    v0 = poisson_variance(base)
    assert poisson_variance(scaled) == pytest.approx(v0 * s**2, rel=1e-10, abs=1e-300)
    assert poisson_fourth_moment(scaled) == pytest.approx(
        poisson_fourth_moment(base) * s**4, rel=1e-10, abs=1e-300)
    if v0 > 1e-8 * (1 + np.max(np.abs(y))) ** 2:
        assert sampling_kurtosis(scaled) == pytest.approx(sampling_kurtosis(base), rel=1e-8, abs=1e-8)


# -- exact design expectations -------------------------------------------------


def test_enumeration_probabilities_sum_to_one():
    pi = [0.3, 0.6, 0.3, 0.6, 0.9]
    outcomes = list(enumerate_poisson_samples(pi))
    assert len(outcomes) == 32
    assert math.fsum(p for _, p in outcomes) == pytest.approx(1.0, abs=1e-15)


def _population(n, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=n) * rng.exponential(size=n), rng.choice([0.3, 0.6], size=n)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_variance_identity_by_enumeration(seed):
    z, pi = _population(12, seed)
    lhs = design_expectation(pi, lambda s: variance_from_z(z[s], pi[s]))
    rhs = math.fsum((1 - pi) * z * z / pi)
    assert abs(lhs - rhs) / rhs < 1e-12


@pytest.mark.parametrize("seed", [0, 1])
def test_fixed_z_estimators_unbiased_by_enumeration(seed):
    z, pi = _population(10, seed)

    def centred_total(s):
        return float(np.sum((s - pi) * z / pi))

    var = design_expectation(pi, lambda s: centred_total(s) ** 2)
    mu4 = design_expectation(pi, lambda s: centred_total(s) ** 4)
    assert design_expectation(pi, lambda s: variance_from_z(z[s], pi[s])) == pytest.approx(var, rel=1e-12)
    assert design_expectation(pi, lambda s: fourth_moment_from_z(z[s], pi[s])) == pytest.approx(mu4, rel=1e-12)


def test_plug_in_uses_sample_residuals():
    y = np.array([1.0, 4.0, 2.0, 8.0])
    pi = np.array([0.2, 0.5, 0.4, 0.8])
    s = AreaUnitSample(y, pi)
    ybar, n_hat = direct_mean(s)
    z = (y - ybar) / n_hat
    assert poisson_variance(s) == pytest.approx(variance_from_z(z, pi), rel=1e-14)
    assert poisson_fourth_moment(s) == fourth_moment_from_z(z, pi)


@pytest.mark.slow
def test_kurtosis_against_design_simulation():
    rng = np.random.default_rng(3)
    n_pop, R = 200, 100_000
    y = rng.exponential(size=n_pop) ** 2
    pi = rng.uniform(0.2, 0.6, n_pop)
    ybar = np.empty(R)
    khat = np.empty(R)
    for r in range(R):
        s = rng.random(n_pop) < pi
        sample = AreaUnitSample(y[s], pi[s])
        ybar[r] = direct_mean(sample)[0]
        khat[r] = sampling_kurtosis(sample)
    c = ybar - ybar.mean()
    empirical = np.mean(c**4) / np.mean(c**2) ** 2 - 3
    se = khat.std(ddof=1) / math.sqrt(R)
    print(f"mean kappa_e_hat={khat.mean():.4f} empirical={empirical:.4f} se={se:.4f}")
    assert abs(khat.mean() - empirical) <= 3 * se
