import numpy as np
import pytest

from kaclab.errors import ParameterDomainError
from kaclab.sphere import (BoltzmannSphereSpec, fubini_check, inner_spec, log_ball_volume, log_marginal_density,
                           log_sphere_area, reduction_matrix, uniform_sample, v1_moment_oracle)


def test_sphere_area_small_cases():
    assert np.exp(log_sphere_area(1)) == pytest.approx(2.0)
    assert np.exp(log_sphere_area(2)) == pytest.approx(2 * np.pi)
    assert np.exp(log_sphere_area(3)) == pytest.approx(4 * np.pi)
    # stays finite in high dimension
    assert np.isfinite(log_sphere_area(20_000))
    assert np.exp(log_ball_volume(2, 3.0)) == pytest.approx(9 * np.pi)


def test_reduction_matrix_orthogonal():
    R = reduction_matrix(7)
    np.testing.assert_allclose(R @ R.T, np.eye(7), atol=1e-14)
    np.testing.assert_allclose(R[-1], np.full(7, 1 / np.sqrt(7)))


@pytest.mark.parametrize("z", [None, (0.7, -0.2)])
def test_samples_on_sphere(z):
    spec = BoltzmannSphereSpec(10, 2, 10.0, z)
    pts = uniform_sample(spec, np.random.default_rng(0), size=50)
    np.testing.assert_allclose(np.sum(pts ** 2, axis=(1, 2)), 10.0, rtol=1e-12)
    np.testing.assert_allclose(pts.sum(axis=1), np.broadcast_to(spec.zvec, (50, 2)), atol=1e-12)


def test_v1_moments_match_beta_oracle():
    spec = BoltzmannSphereSpec(12, 2, 12.0)
    pts = uniform_sample(spec, np.random.default_rng(1), size=40_000)
    r2 = np.sum(pts[:, 0] ** 2, axis=1)
    for p in (1, 2):
        x = r2 ** p
        assert abs(x.mean() - v1_moment_oracle(12, 2, power=p)) < 4 * x.std() / np.sqrt(len(x))
    assert v1_moment_oracle(64, 2, power=2) == pytest.approx(2 * 63 / 64)


def test_marginal_integrates_to_one_d2_j1():
    spec = BoltzmannSphereSpec(5, 2, 5.0)
    r = np.linspace(0, 2.0, 4001)
    v = np.stack([r, 0 * r], axis=-1)[:, None, :]
    dens = np.exp(log_marginal_density(spec, v))
    mass = np.trapezoid(2 * np.pi * r * dens, r)
    assert mass == pytest.approx(1.0, abs=1e-5)
    # support edge at |v|^2 = E (N-1)/N
    out = np.array([[[2.01, 0.0]]])
    assert np.isneginf(log_marginal_density(spec, out)).all()


def test_marginal_j_bounds():
    spec = BoltzmannSphereSpec(4, 2, 4.0)
    with pytest.raises(ParameterDomainError):
        log_marginal_density(spec, np.zeros((3, 2)))


def test_inner_spec_consistency():
    spec = BoltzmannSphereSpec(6, 2, 6.0)
    v = np.array([[1.0, 0.5]])
    ins = inner_spec(spec, v)
    assert ins.N == 5 and ins.E == pytest.approx(6.0 - 1.25)
    np.testing.assert_allclose(ins.zvec, [-1.0, -0.5])


def test_degenerate_and_invalid():
    assert BoltzmannSphereSpec(3, 2, 1.0 / 3, (1.0, 0.0)).degenerate
    with pytest.raises(ParameterDomainError):
        BoltzmannSphereSpec(3, 2, 0.1, (1.0, 0.0))
    with pytest.raises(ParameterDomainError):
        BoltzmannSphereSpec(1, 2, 1.0)


def test_fubini_small():
    spec = BoltzmannSphereSpec(4, 2, 4.0)
    lhs, lse, rhs, rse = fubini_check(lambda v: float(v[0] @ v[0]), spec, 1, 5000, 7)
    assert abs(lhs - rhs) < 3 * np.hypot(lse, rse)
