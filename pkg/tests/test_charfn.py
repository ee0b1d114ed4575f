import json

import numpy as np
import pytest

from kaclab.charfn import (CharFnGrid, approx_error_scan, gamma1_hat, gamma_N_lattice_mass, gamma_N_normalization,
                           h_gaussian_closed, h_hat, h_hat_single, invert_lattice, invert_radial, z2_oracle, z_n,
                           z_n_gaussian_closed)
from kaclab.densities import GeneratingFunction, delta_schedule, eta_mid, sigma_sq
from kaclab.errors import ParameterDomainError

ETA = eta_mid(0.5, 2)

# log Z_2 pinned for delta in (0.1, 0.3) at (E, z) = (2, 0), (3, (0.5, 0)), (1.5, (1, 0.3))
Z2_PINS = {
    0.1: [-4.805903757619831, -6.419337782168847, -3.9172559477387967],
    0.3: [-4.444427211225246, -5.550541211752673, -3.821040779422655],
}
Z2_POINTS = [(2.0, None), (3.0, [0.5, 0.0]), (1.5, [1.0, 0.3])]


def test_transform_at_origin_and_quadrature():
    g = GeneratingFunction(2, 0.2)
    assert h_hat(g, np.zeros(2), 0.0) == pytest.approx(1.0)
    # direct 2-d quadrature of the transform at one point
    p, t = np.array([0.3, -0.1]), 0.07
    x = np.linspace(-12, 12, 801)
    X, Y = np.meshgrid(x, x, indexing="ij")
    V = np.stack([X, Y], axis=-1)
    f = g.pdf(V)
    phase = np.exp(-2j * np.pi * (t * (X ** 2 + Y ** 2) + p[0] * X + p[1] * Y))
    num = np.trapezoid(np.trapezoid(f * phase, x, axis=1), x)
    assert abs(num - h_hat(g, p, t)) < 1e-8


def test_single_transform_modulus_form():
    p = np.array([0.2, 0.4])
    assert h_hat_single(0.25, p, 0.1) == pytest.approx(h_hat_single(0.25, np.linalg.norm(p), 0.1, d=2))
    with pytest.raises(ParameterDomainError):
        h_hat_single(-1.0, p, 0.0)


def test_gamma1_matches_first_two_moments():
    g = GeneratingFunction(2, 0.2)
    eps = 1e-4
    lg = np.log(gamma1_hat(g, np.zeros(2), eps)) - np.log(gamma1_hat(g, np.zeros(2), -eps))
    lh = np.log(h_hat(g, np.zeros(2), eps)) - np.log(h_hat(g, np.zeros(2), -eps))
    assert lg == pytest.approx(lh, rel=1e-6)


@pytest.mark.parametrize("N", [4, 8, 16, 32])
def test_gaussian_roundtrip(N):
    a = 0.25
    g = GeneratingFunction.maxwellian(2, a)
    assert z_n(g, N, float(N)).log_zn == pytest.approx(z_n_gaussian_closed(a, 2, N, float(N)), rel=1e-12)
    for zmod, u in [(0.0, N * 0.8), (1.5, N * 1.1)]:
        assert invert_radial(g, N, zmod, u) == pytest.approx(h_gaussian_closed(a, 2, N, zmod, u), rel=1e-9)


@pytest.mark.parametrize("delta", [0.1, 0.3])
def test_n2_oracle_pinned(delta):
    g = GeneratingFunction(2, delta)
    for (E, z), pin in zip(Z2_POINTS, Z2_PINS[delta]):
        assert z2_oracle(g, E, z) == pytest.approx(pin, rel=1e-12)
        assert z_n(g, 2, E, z).log_zn == pytest.approx(pin, rel=1e-10)


def test_z2_oracle_d3_point_mass():
    g = GeneratingFunction(3, 0.2)
    z = np.array([1.0, 0.0, 0.0])
    assert np.isfinite(z2_oracle(g, 3.0, z))
    assert z2_oracle(g, 0.5, z) == pytest.approx(2 * g.logpdf(0.5 * z))


def test_bessel_rule_agrees():
    g = GeneratingFunction(2, 0.15)
    b = invert_lattice(g, 16, [0.0, 2.0], [14.0, 17.0], CharFnGrid(rule="bessel"))
    m = invert_lattice(g, 16, [0.0, 2.0], [14.0, 17.0], CharFnGrid())
    np.testing.assert_allclose(b, m, rtol=1e-9)


def test_zn_rejects_empty_sphere():
    g = GeneratingFunction(2, 0.2)
    with pytest.raises(ParameterDomainError):
        z_n(g, 4, 0.1, [1.0, 0.0])


@pytest.mark.parametrize("N", [32, 256])
def test_gamma_mass(N):
    g = GeneratingFunction(2, delta_schedule(N, ETA))
    assert gamma_N_normalization(N, g) == pytest.approx(1.0, abs=1e-12)
    assert gamma_N_lattice_mass(N, g) == pytest.approx(1.0, abs=1e-6)


def test_scan_pinned_and_consistent():
    N = 32
    g = GeneratingFunction(2, delta_schedule(N, ETA))
    r = approx_error_scan(g, N)
    assert r["scaled"] == pytest.approx(0.054727, rel=1e-4)
    assert r["scaled"] == pytest.approx(np.sqrt(sigma_sq(g)) * N ** 1.5 * r["sup_error"])
    assert r["h"].shape == (41, 121)


def test_grid_json_roundtrip():
    gr = CharFnGrid(rule="bessel", t_max=3.0)
    assert CharFnGrid(**json.loads(gr.to_json())) == gr
