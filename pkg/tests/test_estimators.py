import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import SEED, dense_model
from levelset_lab import (
    DegenerateModelError,
    InvalidArgumentError,
    RngStream,
    analytic_g_pair,
    borell_tail_bound,
    build_dgff,
    build_iid,
    build_sign_field,
    estimate_g,
    expected_excess,
    extremality_ratio,
    factorize,
    gaussian_upper_tail,
    nondegeneracy_ratio,
    normalize_to_spec,
    union_bound_g,
)
from levelset_lab.estimators import (
    concentration_check,
    sup_replicates,
    union_bound_from_variances,
)
from levelset_lab.level_sets import nested_sup_estimates


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def _q_quad(x):
    return quad(_phi, x, math.inf, epsabs=0, epsrel=1e-13)[0]


# --- estimate_g ------------------------------------------------------------

def test_estimate_g_singleton():
    m = normalize_to_spec(build_iid(4, 1.0))
    g = estimate_g(factorize(m), [2], 20_000, RngStream(SEED))
    assert abs(g.mean) < 4 * g.stderr
    assert g.subset_size == 1


def test_estimate_g_independent_pair():
    g = estimate_g(factorize(build_iid(2, 1.0)), None, 100_000, RngStream(SEED))
    assert abs(g.mean - 1 / math.sqrt(math.pi)) < 4 * g.stderr


def test_estimate_g_sign_field_6():
    g = estimate_g(factorize(build_sign_field(6)), None, 100_000, RngStream(SEED))
    assert abs(g.mean - 4.787307364817193) < 4 * g.stderr
    assert 6 * math.sqrt(2 / math.pi) == pytest.approx(4.787307364817193, abs=1e-12)


def test_estimate_g_errors():
    k = factorize(build_iid(3, 1.0))
    with pytest.raises(InvalidArgumentError):
        estimate_g(k, [], 100, RngStream(SEED))
    with pytest.raises(InvalidArgumentError):
        estimate_g(k, [0], 1, RngStream(SEED))
    with pytest.raises(InvalidArgumentError):
        estimate_g(k, [3], 10, RngStream(SEED))


def test_estimate_g_fields():
    m = normalize_to_spec(build_iid(10, 1.0))
    g = estimate_g(factorize(m), None, 1000, RngStream(SEED, 17))
    assert g.replicates == 1000
    assert g.borell_halfwidth == pytest.approx(math.sqrt(m.sigma_max_sq) * math.sqrt(2 * math.log(40)))
    # the half-width solves 2 exp(-z^2 / 2 sigma^2) = 0.05
    assert borell_tail_bound(g.borell_halfwidth, m.sigma_max_sq) == pytest.approx(0.05)
    assert (g.base_seed, g.stream_start, g.streams_used) == (SEED, 17, 4)


def test_estimate_g_deterministic():
    k = factorize(build_dgff(9))
    a = estimate_g(k, None, 700, RngStream(SEED, 2))
    b = estimate_g(k, None, 700, RngStream(SEED, 2))
    assert a == b


def test_nested_subsets_monotone_on_shared_samples():
    k = factorize(build_dgff(9))
    S, T = [0, 5, 10], [0, 5, 10, 20, 40]
    gs, gt = nested_sup_estimates(k, [S, T], 2000, RngStream(SEED))
    assert gs.mean <= gt.mean
    M = sup_replicates(k, [S, T], 2000, RngStream(SEED))
    assert np.all(M[:, 0] <= M[:, 1])


def test_positive_homogeneity_on_shared_samples():
    m = build_dgff(9)
    a = estimate_g(factorize(m), None, 1000, RngStream(SEED))
    b = estimate_g(factorize(m.scaled(2.5)), None, 1000, RngStream(SEED))
    assert b.mean == pytest.approx(2.5 * a.mean, rel=1e-12)


# --- analytic pair oracle ----------------------------------------------------

def test_analytic_pair_cases():
    assert analytic_g_pair(1, 1, 1) == 0.0
    assert analytic_g_pair(1, 1, 0) == pytest.approx(0.5641895835477563, abs=1e-12)
    assert analytic_g_pair(1, 1, -1) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        analytic_g_pair(1, 1, 2)


def test_analytic_pair_brute_force():
    x = np.random.default_rng(SEED).standard_normal((10**7, 2))
    mc = np.maximum(x[:, 0], x[:, 1]).mean()
    assert mc == pytest.approx(analytic_g_pair(1, 1, 0), abs=1e-3)


def test_analytic_pair_zero_mean_equals_abs_z():
    # E max(Z, -Z) = E|Z|
    assert analytic_g_pair(1, 1, -1) == pytest.approx(quad(lambda x: 2 * x * _phi(x), 0, math.inf)[0])


# --- tails and excess ---------------------------------------------------------

def test_upper_tail_values():
    assert gaussian_upper_tail(0.0) == 0.5
    assert gaussian_upper_tail(1.959964) == pytest.approx(0.025, abs=1e-6)
    assert gaussian_upper_tail(1.959964) == pytest.approx(_q_quad(1.959964), rel=1e-12)
    for x in (0.5, 1.0, 3.0):
        assert gaussian_upper_tail(x) + gaussian_upper_tail(-x) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("x", [-8, -3.5, -1, 0.25, 1, 2.5, 4, 6, 8])
def test_upper_tail_matches_quadrature(x):
    oracle = _q_quad(x) if x >= 0 else 1 - _q_quad(-x)
    assert gaussian_upper_tail(x) == pytest.approx(oracle, rel=1e-12)


@given(st.floats(-40, 40), st.floats(-40, 40))
def test_upper_tail_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert gaussian_upper_tail(lo) >= gaussian_upper_tail(hi)
    assert 0 <= gaussian_upper_tail(hi) <= 1


def test_expected_excess_values():
    assert expected_excess(1, 0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)
    assert 0 <= expected_excess(1, 10) < 1e-20
    oracle = quad(lambda y: _q_quad(y / 2), 1, math.inf, epsabs=1e-14)[0]
    assert oracle == pytest.approx(0.39559311480261194, abs=1e-10)
    assert expected_excess(2, 1) == pytest.approx(oracle, rel=1e-9)


@given(st.floats(0.1, 10), st.floats(0, 8))
def test_expected_excess_against_integral(sd, x):
    a = x * sd
    with mpmath.workdps(40):
        tail = lambda y: mpmath.erfc(y / (sd * mpmath.sqrt(2))) / 2
        oracle = mpmath.quad(tail, [a, a + sd, a + 4 * sd, mpmath.inf])
    assert expected_excess(sd, a) == pytest.approx(float(oracle), rel=1e-9)


@given(st.floats(0.1, 10), st.floats(0, 35))
def test_expected_excess_far_tail(sd, x):
    # high-precision closed form; quadrature loses accuracy this deep in the tail
    a = x * sd
    with mpmath.workdps(60):
        xm = mpmath.mpf(a) / sd
        exact = sd * mpmath.npdf(xm) - a * mpmath.erfc(xm / mpmath.sqrt(2)) / 2
    assert expected_excess(sd, a) == pytest.approx(float(exact), rel=1e-10, abs=1e-300)


@given(st.floats(0.1, 10), st.floats(0, 7.5), st.floats(0.01, 0.5))
def test_expected_excess_strictly_decreasing(sd, x, dx):
    assert expected_excess(sd, (x + dx) * sd) < expected_excess(sd, x * sd)


@given(st.floats(0.01, 100))
def test_expected_excess_at_zero(sd):
    assert expected_excess(sd, 0.0) == pytest.approx(sd / math.sqrt(2 * math.pi), rel=1e-12)


# --- union bound ------------------------------------------------------------

def test_union_bound_singleton():
    rep = union_bound_g(build_iid(1, 1.0), 1)
    assert rep.a_n == 0
    assert rep.bound_value == pytest.approx(0.3989422804014327, abs=1e-12)
    assert rep.bound_value == rep.a_n + rep.excess_sum


def test_union_bound_iid_1024():
    m = build_iid(1024, 1.0)
    rep = union_bound_g(m, 1024)
    assert rep.a_n == pytest.approx(3.723297411059034, abs=1e-12)
    g = estimate_g(factorize(m), None, 5000, RngStream(SEED))
    assert rep.bound_value > g.mean


@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_union_bound_monotone(a, b):
    m = build_iid(8, 1.7)
    lo, hi = sorted((a, b))
    assert union_bound_g(m, lo).bound_value <= union_bound_g(m, hi).bound_value


def test_per_point_union_bound_tighter_on_dgff():
    m = build_dgff(17)
    uniform = union_bound_g(m, m.size)
    exact = union_bound_from_variances(m.variances, uniform.a_n)
    assert exact.bound_value <= uniform.bound_value


def test_union_bound_valid_on_suite(suite_models):
    for name, m in suite_models.items():
        k = factorize(m)
        for subset in (None, [0], list(range(0, m.size, 2))):
            g = estimate_g(k, subset, 4000, RngStream(SEED))
            assert union_bound_g(m, g.subset_size).bound_value >= g.mean - 4 * g.stderr, name


# --- concentration ----------------------------------------------------------

def test_borell_bound_values():
    assert borell_tail_bound(0, 1) == 2
    assert borell_tail_bound(2, 1) == pytest.approx(0.2706705664732254, abs=1e-14)
    with pytest.raises(InvalidArgumentError):
        borell_tail_bound(-1, 1)


def test_borell_check_iid_100():
    m = normalize_to_spec(build_iid(100, 1.0))
    rows = concentration_check(factorize(m), None, 10_000, RngStream(SEED), (1, 2, 3))
    for r in rows:
        assert r.exceed_freq <= r.bound + 4 * r.binom_sd
        assert r.ok


# --- ratios -----------------------------------------------------------------

def test_nondegeneracy_singleton_and_zero():
    m = build_iid(1, 1.0)
    g = estimate_g(factorize(m), None, 100, RngStream(SEED))
    assert nondegeneracy_ratio(g, m) == 0.0
    d = build_dgff(3)
    with pytest.raises(DegenerateModelError):
        nondegeneracy_ratio(g, d)


def test_nondegeneracy_iid_increasing():
    vals = []
    for m in (16, 256):
        model = build_iid(m, 1.0)
        g = estimate_g(factorize(model), None, 10_000, RngStream(SEED))
        vals.append(nondegeneracy_ratio(g, model))
    assert vals[0] < vals[1]


def test_nondegeneracy_dgff_increasing():
    vals = []
    for side in (9, 17, 33):
        model = build_dgff(side)
        g = estimate_g(factorize(model), None, 4000, RngStream(SEED))
        vals.append(nondegeneracy_ratio(g, model))
    assert vals[0] < vals[1] < vals[2]


def test_extremality_sign_field_analytic():
    m = build_sign_field(8)
    analytic = m.effective_n * math.sqrt(2 / math.pi)
    from levelset_lab.estimators import GEstimate

    g = GEstimate(analytic, 0.0, 2, 0.0, m.size)
    assert extremality_ratio(g, m) == pytest.approx(0.677660751603105, abs=1e-12)


def test_extremality_halves_under_half_scale():
    m = build_dgff(9)
    a = estimate_g(factorize(m), None, 1000, RngStream(SEED))
    b = estimate_g(factorize(m.scaled(0.5)), None, 1000, RngStream(SEED))
    assert extremality_ratio(b, m) == pytest.approx(0.5 * extremality_ratio(a, m), rel=1e-12)


def test_extremality_iid_increasing():
    vals = []
    for size in (64, 256, 1024):
        m = normalize_to_spec(build_iid(size, 1.0))
        g = estimate_g(factorize(m), None, 20_000, RngStream(SEED))
        vals.append(extremality_ratio(g, m))
    assert vals[0] < vals[1] < vals[2] < 1


def test_pair_estimate_general_covariance():
    C = np.array([[2.0, 0.7], [0.7, 0.5]])
    g = estimate_g(factorize(dense_model(C)), None, 100_000, RngStream(SEED))
    assert abs(g.mean - analytic_g_pair(2.0, 0.5, 0.7)) < 4 * g.stderr
