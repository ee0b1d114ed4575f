import numpy as np
import pytest

from kaclab.densities import GeneratingFunction, delta_schedule, eta_mid
from kaclab.entropy import (ConditionedFamily, PairWeight, entropy_HN, entropy_limit_components,
                            entropy_production_DN, gamma_ratio, loglog_slope, production_terms, scaling_study)
from kaclab.errors import ParameterDomainError
from kaclab.sphere import BoltzmannSphereSpec, uniform_sample
from kaclab.walk import random_directions

ETA = eta_mid(0.5, 2)


@pytest.fixture(scope="module")
def fam32():
    return ConditionedFamily(GeneratingFunction(2, delta_schedule(32, ETA)), 32)


def test_marginal_mass_and_pinned_entropy(fam32):
    r = entropy_HN(fam32)
    assert r["marginal_mass"] == pytest.approx(1.0, abs=1e-10)
    assert r["H_over_N"] == pytest.approx(0.05610, abs=5e-5)
    assert r["H"] > 0


def test_log_zn_against_sphere_monte_carlo(fam32):
    # Z_N is the sphere average of prod f(v_i)
    g = fam32.g
    pts = uniform_sample(BoltzmannSphereSpec(32, 2, 32.0), np.random.default_rng(0), size=20_000)
    lf = g.logpdf(pts).sum(axis=1)
    m = lf.max()
    est = m + np.log(np.mean(np.exp(lf - m)))
    assert est == pytest.approx(fam32.log_zn.log_zn, abs=0.05)


def test_maxwellian_has_no_entropy_or_production():
    g = GeneratingFunction.maxwellian(2)
    fam = ConditionedFamily(g, 16)
    assert abs(entropy_HN(fam)["H"]) < 1e-8
    assert entropy_production_DN(fam, 2000, 0)["pairing"] < 1e-20


def test_production_terms_nonnegative():
    g = GeneratingFunction(2, 0.1)
    rng = np.random.default_rng(1)
    v1, v2 = g.sample(5000, rng), g.sample(5000, rng)
    t = production_terms(g, v1, v2, random_directions(5000, 2, rng))
    assert np.all(t >= 0)


def test_pair_weight_mean_is_one(fam32):
    # E_{f x f}[W] is the total mass of the two-particle marginal
    g = fam32.g
    rng = np.random.default_rng(2)
    v1, v2 = g.sample(100_000, rng), g.sample(100_000, rng)
    s = np.linalg.norm(v1 + v2, axis=1)
    u = 32 - np.sum(v1 ** 2, axis=1) - np.sum(v2 ** 2, axis=1)
    inside = u > s * s / 30
    W = PairWeight(fam32, s[inside].max() * 1.001, u[inside].min())
    w = W(s, u)
    assert np.all(w >= 0)
    assert abs(w.mean() - 1.0) < 4 * w.std() / np.sqrt(len(w))


def test_production_estimate_pinned(fam32):
    r = entropy_production_DN(fam32, 50_000, np.random.default_rng(0))
    assert r["D"] == pytest.approx(32 * r["pairing"])
    assert r["pairing"] == pytest.approx(0.0448, abs=4 * r["pairing_se"] + 1e-3)
    with pytest.raises(ParameterDomainError):
        entropy_production_DN(fam32, 0)


def test_limit_components_shape():
    r = entropy_limit_components(GeneratingFunction(2, delta_schedule(32, ETA)), 32)
    assert r["H_over_N_limit"] == pytest.approx(np.log(2))
    assert r["log_zn_over_N_limit"] == pytest.approx(r["I1_limit"] - np.log(2))
    assert r["H_over_N"] == pytest.approx(r["I1"] * 1.0 - r["log_zn_over_N"])


def test_scaling_study_small():
    rows, fits = scaling_study(ETA, 0.5, [32, 64], budget=20_000)
    assert [r.status for r in rows] == ["ok", "ok"]
    assert rows[1].log2_gap < rows[0].log2_gap
    assert fits["target_slope_gamma"] == pytest.approx(-(1 - ETA))
    with pytest.raises(ParameterDomainError):
        scaling_study(0.9, 0.5, [32])
    with pytest.raises(ParameterDomainError):
        scaling_study(ETA, 0.5, [])


def test_failed_row_recorded():
    rows, _ = scaling_study(ETA, 0.5, [2, 32], budget=5000)
    assert rows[0].status.startswith("failed")
    assert rows[1].status == "ok"


def test_small_helpers():
    assert loglog_slope([1, 10, 100], [3, 0.3, 0.03]) == pytest.approx(-1)
    with pytest.raises(ParameterDomainError):
        gamma_ratio(1.0, 0.0)
    with pytest.raises(ParameterDomainError):
        ConditionedFamily(GeneratingFunction(2, 0.2), 3)
