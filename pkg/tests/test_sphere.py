import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import sph_harm_y

from conicdet.sphere import Grid, HarmonicBasis, angles_to_w, basis_indices, legendre_table, w_to_angles


def test_basis_ordering():
    ell, m = basis_indices(2)
    assert ell.tolist() == [0, 1, 1, 1, 2, 2, 2, 2, 2]
    assert m.tolist() == [0, 0, 1, -1, 0, 1, -1, 2, -2]


@pytest.mark.parametrize("l,m", [(0, 0), (1, 0), (1, 1), (3, 2), (7, 5), (12, 12)])
def test_legendre_matches_scipy(l, m):
    theta = np.linspace(0.1, 3.0, 7)
    P = legendre_table(12, theta)[l, m]
    ref = np.abs(sph_harm_y(l, m, theta, 0.0))
    assert_allclose(np.abs(P), ref, rtol=1e-12, atol=1e-14)


def test_legendre_derivatives_fd():
    theta = np.linspace(0.2, 2.9, 9)
    h = 1e-6
    _, dP, Q = legendre_table(10, theta, with_derivs=True)
    fd = (legendre_table(10, theta + h) - legendre_table(10, theta - h)) / (2 * h)
    assert_allclose(dP, fd, atol=1e-7)
    P = legendre_table(10, theta)
    assert_allclose(Q[:, 1:] * np.sin(theta), P[:, 1:], atol=1e-13)


def test_orthonormal_on_grid():
    basis = HarmonicBasis(8)
    grid = Grid.for_degree(8)
    th = np.repeat(grid.theta, grid.n_phi)
    ph = np.tile(grid.phi, grid.n_theta)
    Y = basis.evaluate(th, ph)
    w = np.repeat(grid.theta_weights, grid.n_phi) * grid.phi_weight
    assert_allclose(Y.T @ (Y * w[:, None]), np.eye(basis.size), atol=1e-12)


def test_complex_derivatives_fd():
    basis = HarmonicBasis(6)
    w0 = 0.4 - 0.7j
    h = 1e-6
    th, ph = w_to_angles(np.array([w0]))
    dw, dwb = basis.complex_derivatives(th, ph)
    f = lambda w: basis.evaluate_w(np.array([w]))[0]
    dx = (f(w0 + h) - f(w0 - h)) / (2 * h)
    dy = (f(w0 + 1j * h) - f(w0 - 1j * h)) / (2 * h)
    assert_allclose(dw[0], 0.5 * (dx - 1j * dy), atol=1e-8)
    assert_allclose(dwb[0], 0.5 * (dx + 1j * dy), atol=1e-8)


def test_inverted_chart_derivatives_fd():
    basis = HarmonicBasis(5)
    v0 = 0.3 + 0.2j
    h = 1e-6
    th, ph = w_to_angles(np.array([1 / v0]))
    dv, _ = basis.complex_derivatives(th, ph, chart="inv")
    f = lambda v: basis.evaluate_w(np.array([1 / v]))[0]
    dx = (f(v0 + h) - f(v0 - h)) / (2 * h)
    dy = (f(v0 + 1j * h) - f(v0 - 1j * h)) / (2 * h)
    assert_allclose(dv[0], 0.5 * (dx - 1j * dy), atol=1e-8)


def test_angle_roundtrip(rng):
    w = rng.normal(size=10) + 1j * rng.normal(size=10)
    assert_allclose(angles_to_w(*w_to_angles(w)), w, rtol=1e-13)


def test_grid_area():
    grid = Grid.for_degree(10)
    assert_allclose(grid.integrate(np.ones((grid.n_theta, grid.n_phi))), 4 * np.pi, rtol=1e-13)
