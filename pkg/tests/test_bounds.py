import numpy as np
import pytest

from kaclab import bounds
from kaclab.charfn import approx_error_scan
from kaclab.densities import GeneratingFunction, delta_schedule, eta_mid
from kaclab.errors import ParameterDomainError

ETA = eta_mid(0.5, 2)


@pytest.mark.parametrize("alpha,beta", [(1e-6, 5.0), (0.3, 0.0001), (2.0, 1.0), (10.0, 10.0)])
def test_gaussian_tail_points(alpha, beta):
    r = bounds.gaussian_tail_bounds_check(alpha, beta)
    assert r.status == "pass"
    assert r.margin >= -1e-10


def test_gaussian_tail_equality_at_zero():
    # the third bound is tight at beta = 0 and must not be reported as a violation
    lhs, rhs, _ = bounds.gaussian_tail_sides(1.3, 0.0)
    assert lhs[2] == pytest.approx(rhs[2], abs=1e-14)


def test_gaussian_tail_fuzz_small():
    r = bounds.gaussian_tail_fuzz(300, 5)
    assert r["violations"] == [] and r["inconclusive"] == 0


@pytest.mark.parametrize("m,d", [(0, 2), (2, 2), (4, 3), (1, 3)])
def test_radial_lhs_closed_form_matches_quad(m, d):
    for a, b in [(1.0, 0.5), (7.0, 0.1), (40.0, 0.9)]:
        assert bounds.radial_tail_lhs(m, d, a, b) == pytest.approx(bounds.radial_tail_lhs_quad(m, d, a, b),
                                                                   rel=1e-8)


def test_radial_fits_pinned():
    rep = bounds.radial_tail_bound_check(2, 2, n=4000, rng=0)
    assert rep.status == "pass"
    assert rep.fitted_constant == 3.805959251485587
    assert bounds.radial_tail_bound_check(2, 2, n=4000, rng=0).fitted_constant == rep.fitted_constant


def test_radial_low_order_is_unbounded():
    assert bounds.radial_tail_bound_check(0, 1, n=2000, rng=0).status == "unbounded"


def test_envelope_term_forms_agree():
    g = GeneratingFunction(2, 0.1)
    rep = bounds.product_envelope_check(g, 16, 5, 32, samples=2000, rng=0)
    assert rep.status == "pass"
    with pytest.raises(ParameterDomainError):
        bounds.product_envelope_check(g, 40, 5, 32)


def test_envelope_binomial_sum_is_triangle_inequality():
    # at t = 0 every transform is real and positive, so the bound is an identity
    g = GeneratingFunction(2, 0.2)
    lhs, rhs = bounds.envelope_lhs_rhs(g, np.array([0.0, 0.2]), np.array([0.0, 0.0]), 7, 20)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_envelope_fuzz_small():
    assert bounds.product_envelope_fuzz(500, 2)["violations"] == []


def test_mixture_contraction():
    rep = bounds.mixture_contraction_check(0.5, 2)
    assert rep.status == "pass"
    assert rep.fitted_constant == -0.10153229038352785
    assert rep.params["margin_slope"] == pytest.approx(2.0, abs=0.15)
    assert np.all(bounds.mixture_modulus_sum(0.2, np.linspace(0.01, 5, 50)) < 1)


def test_domains_partition_the_plane():
    N = 64
    g = GeneratingFunction(2, delta_schedule(N, ETA))
    parts = sum(bounds.domain_l1_integral(g, N, 0.5, k) for k in bounds.DOMAINS)
    full = bounds.domain_l1_integral(g, N, 0.5, "full")
    assert parts == pytest.approx(full, rel=1e-8)


def test_total_l1_dominates_sup_and_decays():
    out = []
    for N in (32, 64):
        g = GeneratingFunction(2, delta_schedule(N, ETA))
        t = bounds.total_l1_error(g, N, 0.5)
        assert t["T"] >= approx_error_scan(g, N)["sup_error"]
        out.append(t["scaled"])
    assert out[0] == pytest.approx(0.06364, rel=1e-3)
    assert out[1] < out[0]


def test_predicted_rate_and_bad_domain():
    assert bounds.predicted_rate("small_t_large_p", 64, 0.1, 0.5) > 0
    with pytest.raises(ParameterDomainError):
        bounds.DomainSpec("nowhere", 0.1, 0.5)
