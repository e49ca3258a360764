import numpy as np
import pytest
from hypothesis import given, strategies as st

from saefh import AreaDataset, amspe, estimate_kappa_v, estimate_mspe, g_terms
from saefh.mspe import apply_floor

from conftest import datasets, make_dataset


def _balanced(m=60, d=1.0, kappa_e=0.0):
    return make_dataset(np.zeros(m), d=d, kappa_e=kappa_e)


def _with_pr_estimate_one(m=60, seed=0):
    """Intercept-only, D = 1 data scaled so the PR estimate is 1."""
    y = np.random.default_rng(seed).normal(size=m)
    y = (y - y.mean()) / np.sqrt(np.sum((y - y.mean()) ** 2) / (2.0 * (m - 1)))
    return make_dataset(y)


# -- g terms -----------------------------------------------------------------


def test_g1_midpoint():
    assert g_terms(_balanced(5), 0, 1.0, 0.0, "PR").g1 == 0.5


def test_balanced_normal_g_terms_by_hand():
    g = g_terms(_balanced(), 3, 1.0, 0.0, "PR")
    assert g.g2 == pytest.approx(1 / 120, rel=1e-13)
    assert g.g3 == pytest.approx(1 / 60, rel=1e-13)
    assert g.g4 == 0.0 and g.g5 == 0.0


def test_amspe_balanced_normal():
    assert amspe(_balanced(), 0, 1.0, 0.0, "PR") == pytest.approx(0.525, rel=1e-13)


def test_g4_by_hand_unbalanced():
    d = np.array([2.0, 0.6, 0.5, 0.4, 0.2])
    ke = np.array([3.0, 0.0, 6.0, 1.0, 0.0])
    ds = make_dataset(np.zeros(5), d=d, kappa_e=ke)
    psi, kv = 1.0, 2.0
    t1 = np.sum(1 / (psi + d))
    for i in range(5):
        core = psi * d[i] ** 2 / (5 * (psi + d[i]) ** 3) * (d[i] * ke[i] - psi * kv)
        assert g_terms(ds, i, psi, kv, "PR").g4 == pytest.approx(core, rel=1e-13)
        c = 5 / ((psi + d[i]) * t1)
        assert g_terms(ds, i, psi, kv, "FH").g4 == pytest.approx(core * c, rel=1e-13)


@given(datasets(), st.floats(0.0, 10.0), st.floats(-2.0, 10.0), st.sampled_from(["PR", "FH"]))
def test_g_term_signs_and_bounds(ds, psi, kv, method):
    for i in range(ds.m):
        g = g_terms(ds, i, psi, kv, method)
        assert g.g1 >= 0 and g.g2 >= 0 and g.g3 >= 0
        assert g.g1 <= min(psi, ds.d[i]) * (1 + 1e-15)


def test_g1_bounded_for_subnormal_psi():
    ds = make_dataset(np.zeros(5), d=[0.518, 0.6, 0.5, 0.4, 0.2])
    for i in range(5):
        assert g_terms(ds, i, 5e-324, 0.0, "PR").g1 <= 5e-324


def test_amspe_reduces_to_normal_approximation_without_kurtosis():
    d = np.array([2.0, 0.6, 0.5, 0.4, 0.2] * 4)
    ds = make_dataset(np.zeros(20), d=d)
    for method in ("PR", "FH"):
        for i in (0, 7, 19):
            g = g_terms(ds, i, 0.8, 0.0, method)
            assert g.g4 == 0.0
            assert amspe(ds, i, 0.8, 0.0, method) == g.g1 + g.g2 + g.g3


# -- estimators --------------------------------------------------------------


def test_normal_pr_balanced_by_hand():
    ds = _with_pr_estimate_one()
    rep = estimate_mspe(ds, "PR")
    assert rep.psi_hat.value == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(rep.normal, 0.5 + 1 / 120 + 1 / 30, rtol=1e-11)
    np.testing.assert_allclose(rep.naive, 0.5 + 1 / 120, rtol=1e-11)


@given(datasets(with_kurtosis=False))
def test_pr_robust_equals_normal_without_sampling_kurtosis(ds):
    rep = estimate_mspe(ds, "PR")
    np.testing.assert_array_equal(rep.robust, rep.normal)
    np.testing.assert_array_equal(rep.robust_raw, rep.normal_raw)


@given(datasets(balanced=True), st.floats(-2.0, 10.0))
def test_balanced_fh_robust_equals_pr_robust(ds, kv):
    pr = estimate_mspe(ds, "PR")
    fh = estimate_mspe(ds, "FH", kappa_v_hat=kv)
    np.testing.assert_allclose(fh.robust_raw, pr.robust_raw, rtol=1e-9, atol=1e-10)


@given(datasets())
def test_pr_robust_minus_normal_structure(ds):
    rep = estimate_mspe(ds, "PR")
    psi, d, ke, m = rep.psi_hat.value, ds.d, ds.kappa_e, ds.m
    expected = 2 * d**2 / (m * (psi + d) ** 3) * (psi * d * ke + np.sum(d**2 * ke) / m)
    np.testing.assert_allclose(rep.robust_raw - rep.normal_raw, expected, rtol=1e-9, atol=1e-14)


@given(datasets())
def test_naive_not_above_normal_pr(ds):
    rep = estimate_mspe(ds, "PR")
    if rep.psi_hat.value > 0:
        assert np.all(rep.naive <= rep.normal)


@given(datasets(), st.sampled_from(["PR", "FH"]))
def test_published_estimates_follow_floor_rule(ds, method):
    rep = estimate_mspe(ds, method, kappa_v_hat=None if method == "PR" else 1.5)
    for pub, raw in ((rep.normal, rep.normal_raw), (rep.robust, rep.robust_raw)):
        assert np.all(pub >= 0)
        np.testing.assert_array_equal(pub, np.where(raw >= 0, raw, rep.naive))


def test_apply_floor():
    out = apply_floor(np.array([0.3, -0.1, 0.0]), np.array([0.2, 0.25, 0.4]))
    np.testing.assert_array_equal(out, [0.3, 0.25, 0.0])


@given(datasets(), st.floats(-50.0, 50.0), st.sampled_from(["PR", "FH"]))
def test_estimators_translation_invariant(ds, c, method):
    kv = None if method == "PR" else 2.0
    a = estimate_mspe(ds, method, kv)
    b = estimate_mspe(ds.replace(y=ds.y + c), method, kv)
    for name in ("naive", "normal", "robust"):
        np.testing.assert_allclose(getattr(b, name), getattr(a, name), rtol=1e-7, atol=1e-9)


def test_fh_auto_uses_jackknife_estimate():
    rng = np.random.default_rng(4)
    d = np.tile([2.0, 0.6, 0.5, 0.4, 0.2], 3)
    ds = AreaDataset(rng.normal(size=15) * np.sqrt(1 + d), np.ones(15), d, 3.0)
    rep = estimate_mspe(ds, "FH", "auto")
    assert rep.kappa_v_used == estimate_kappa_v(ds)
    assert estimate_mspe(ds, "FH").kappa_v_used == rep.kappa_v_used
    fixed = estimate_mspe(ds, "FH", rep.kappa_v_used)
    np.testing.assert_array_equal(fixed.robust, rep.robust)


def test_pr_ignores_kappa_v():
    ds = make_dataset([1.0, 3.0, -2.0, 0.5, 4.0], d=[1.0, 2.0, 0.5, 1.0, 1.5], kappa_e=2.0)
    rep = estimate_mspe(ds, "PR", 7.0)
    assert rep.kappa_v_used == 0.0
    np.testing.assert_array_equal(rep.robust, estimate_mspe(ds, "PR").robust)


def test_report_rows_are_index_aligned():
    ds = AreaDataset([1.0, 3.0, -2.0, 0.5], np.ones(4), 1.0, ids=["d", "c", "b", "a"])
    rows = list(estimate_mspe(ds, "PR").rows())
    assert [r["id"] for r in rows] == ["d", "c", "b", "a"]
    assert set(rows[0]) == {"id", "theta_hat", "B", "psi_hat", "mspe_naive",
                            "mspe_normal", "mspe_robust"}
