import csv
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conicdet.errors import ConvergenceWarning
from conicdet.local_frame import frames
from conicdet.rational_map import INF, RationalMap, TargetRotation, critical_data, is_inf, rotate_target
from conicdet.spectral import (Spectrum, WeightField, aitken, assemble, cone_coeffs, converged_count,
                               eigenfunction_deriv, eigenfunction_value, group_indices, solve, weight)
from conicdet.sphere import HarmonicBasis
from conicdet.zeta_det import football_spectrum


@pytest.mark.parametrize("fmap,w,expected", [
    (RationalMap.football(), 1.0, 4.0),
    (RationalMap.football(), 0.0, 0.0),
    (RationalMap.degree2(0, 1), 0.0, 16.0),
])
def test_weight_examples(fmap, w, expected):
    assert_allclose(weight(WeightField(fmap), w), expected, atol=1e-14)


def test_weight_continuity_at_pole(f01):
    wf = WeightField(f01)
    assert_allclose(weight(wf, 1e-6), 16.0, rtol=1e-4)
    assert np.isfinite(weight(wf, INF))


def test_constant_weight_gives_identity_mass():
    K, M, basis = assemble(lambda w: np.ones(np.shape(w)), 6)
    assert_allclose(M, np.eye(basis.size), atol=1e-12)
    assert_allclose(K, basis.ell * (basis.ell + 1))


@pytest.mark.parametrize("fmap", [RationalMap.football(), RationalMap.degree2(0, 1)])
def test_mass_zero_mode_counts_degree(fmap):
    _, M, _ = assemble(WeightField(fmap), 16)
    assert_allclose(M[0, 0], 2.0, rtol=1e-8)


def test_football_low_spectrum(football_spec):
    exact = football_spectrum(3)[:16]
    assert_allclose(football_spec.values[:16], exact, rtol=1e-3, atol=1e-10)
    sizes = [len(g) for g in football_spec.groups[:5]]
    assert sizes == [1, 2, 3, 4, 5]


def test_zero_mode_is_constant(f01_spec):
    assert abs(f01_spec.values[0]) < 1e-9
    v0 = f01_spec.vectors[:, 0]
    assert_allclose(abs(v0[0]), 1 / np.sqrt(2), rtol=1e-8)
    assert np.max(np.abs(v0[1:])) < 1e-8


def test_rayleigh_ritz_nested(f01):
    # the degree-L basis is a prefix of the degree-(L+4) basis on a shared grid
    L = 16
    K, M, basis = assemble(WeightField(f01), L + 4)
    import scipy.linalg
    full = scipy.linalg.eigh(np.diag(K), M, eigvals_only=True)
    n = (L + 1) ** 2
    sub = scipy.linalg.eigh(np.diag(K[:n]), M[:n, :n], eigvals_only=True)
    rel = n // 3
    assert np.all(full[:rel] <= sub[:rel] + 1e-12)


def test_m_orthonormal_and_residual(f01):
    K, M, _ = assemble(WeightField(f01), 20)
    spec = solve(WeightField(f01), 20)
    V = spec.vectors
    assert_allclose(V.T @ M @ V, np.eye(V.shape[1]), atol=1e-8)
    R = K[:, None] * V - M @ V * spec.values[None, :]
    assert np.max(np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)) < 1e-8


def test_su2_spectrum_invariance(f01):
    rot = TargetRotation.about_axis([0.3, -1.0, 0.5], 1.1)
    a = solve(WeightField(f01), 20, vectors=False).values
    b = solve(WeightField(rotate_target(f01, rot)), 20, vectors=False).values
    assert_allclose(a, b, rtol=1e-9, atol=1e-10)


def test_explicit_J_beyond_reliable_warns(f01):
    with pytest.warns(ConvergenceWarning):
        solve(WeightField(f01), 8, J=60, vectors=False)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve(WeightField(f01), 8, vectors=False)


def test_eigenfunction_deriv_constant(f01_spec):
    assert abs(eigenfunction_deriv(f01_spec, None, 0, 0.3 + 0.1j)) < 1e-8


def test_eigenfunction_deriv_synthetic_harmonic():
    basis = HarmonicBasis(3)
    vec = np.zeros((basis.size, 1))
    vec[1, 0] = 1.0  # Y_1^0 = sqrt(3/4pi) cos(theta)
    spec = Spectrum(3, np.array([2.0]), vec, [[0]], np.array([True]), 2.0, basis)
    w = 0.5 + 0.2j
    expected = np.sqrt(3 / (4 * np.pi)) * (-2 * np.conj(w)) / (1 + abs(w) ** 2) ** 2
    assert_allclose(eigenfunction_deriv(spec, None, 0, w), expected, atol=1e-12)


def test_eigenfunction_deriv_fd(football_spec):
    w0, h = 0.3 - 0.2j, 1e-5
    for j in football_spec.groups[1]:
        val = lambda w: eigenfunction_value(football_spec, j, w)
        dx = (val(w0 + h) - val(w0 - h)) / (2 * h)
        dy = (val(w0 + 1j * h) - val(w0 - 1j * h)) / (2 * h)
        assert_allclose(eigenfunction_deriv(football_spec, None, j, w0), 0.5 * (dx - 1j * dy), atol=1e-6)


def _cone(fmap, point):
    data = critical_data(fmap)
    k = [i for i, p in enumerate(data.points) if not is_inf(p) and abs(p - point) < 1e-10][0]
    return data, k


def test_cone_coeffs_zero_mode(football, football_spec):
    data, k = _cone(football, 0)
    cc = cone_coeffs(football_spec, WeightField(football), data, frames(football, data), k)
    assert abs(cc.b[0]) < 1e-10
    assert_allclose(abs(cc.c[0]), 1 / np.sqrt(8 * np.pi), rtol=1e-8)


def test_cone_coeffs_football_three_quarter_group(football, football_spec):
    data, k = _cone(football, 0)
    cc = cone_coeffs(football_spec, WeightField(football), data, frames(football, data), k)
    g = football_spec.groups[1]
    # the rotation-invariant pair gives sum b_j^2 = 0 while sum |b_j|^2 = 1/pi^2
    assert abs(np.sum(cc.b[g] ** 2)) < 1e-10
    assert_allclose(np.sum(np.abs(cc.b[g]) ** 2), 1 / np.pi ** 2, rtol=1e-6)


def test_cone_coeffs_branch_flip_and_reality(f01, f01_spec, f01_data):
    fr = frames(f01, f01_data)
    flipped = [type(f)(**{**f.__dict__, "sqrt_c2": -f.sqrt_c2}) for f in fr]
    for k in range(f01_data.count):
        a = cone_coeffs(f01_spec, None, f01_data, fr, k)
        b = cone_coeffs(f01_spec, None, f01_data, flipped, k)
        assert_allclose(b.b, -a.b, atol=1e-12)
        assert_allclose(b.b ** 2, a.b ** 2, atol=1e-12)
        assert_allclose(a.a, np.conj(a.b), atol=1e-8)


@pytest.mark.parametrize("values,expected", [
    ([0, 0.75, 0.75 + 1e-7, 2, 2, 2], [[0], [1, 2], [3, 4, 5]]),
    ([0, 1, 2], [[0], [1], [2]]),
])
def test_group_indices(values, expected):
    assert group_indices(np.array(values, dtype=float)) == expected


def test_converged_count():
    a = np.array([0, 1, 2, 3, 4.0])
    b = a + np.array([0, 1e-6, 1e-5, 1e-2, 0])
    assert converged_count(a, b, 1e-4) == 3


def test_aitken_geometric():
    limit, r = 3.0, 0.4
    seq = np.array([[limit + r ** n] for n in range(3)])
    assert_allclose(aitken(seq), [limit], rtol=1e-12)


def test_spectrum_csv(tmp_path, f01_spec):
    path = tmp_path / "s.csv"
    f01_spec.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "lambda", "group_id", "reliable_flag"]
    assert len(rows) == len(f01_spec.values) + 1
    assert float(rows[2][1]) == pytest.approx(f01_spec.values[1])
