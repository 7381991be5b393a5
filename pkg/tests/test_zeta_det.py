import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conicdet.errors import TailUnreliable
from conicdet.rational_map import RationalMap
from conicdet.zeta_det import (_quadratic_zeta, exact_heat_coeffs, extrapolate_logdet, DetResult,
                               fit_heat_coeffs, fit_weyl_tail, football_logdet_oracle,
                               football_spectrum, football_zeta, heat_trace, log_det,
                               log_det_map, log_det_reference, sphere_logdet_oracle, sphere_spectrum,
                               zeta_prime_split)

# frozen from an independent mpmath evaluation (Hurwitz zeta route, 30 digits)
FOOTBALL_LOGDET = 1.4463668174942266
SPHERE_LOGDET = 1.1616845748018


def test_football_spectrum_examples():
    v = football_spectrum(2)
    assert_allclose(v[:10], [0, 0.75, 0.75, 2, 2, 2, 3.75, 3.75, 3.75, 3.75])
    assert len(v) == 1 + 2 + 3 + 4 + 5
    with pytest.raises(ValueError):
        football_spectrum(0.5)


def test_sphere_spectrum_examples():
    assert_allclose(sphere_spectrum(2), [0, 2, 2, 2, 6, 6, 6, 6, 6])


def test_oracles_frozen():
    assert_allclose(football_logdet_oracle(), FOOTBALL_LOGDET, rtol=1e-12)
    assert_allclose(sphere_logdet_oracle(), SPHERE_LOGDET, rtol=1e-12)
    assert_allclose(football_zeta()[0], -7 / 12, rtol=1e-12)
    assert_allclose(exact_heat_coeffs("football")[:2], [2, 5 / 12], rtol=1e-12)
    assert_allclose(exact_heat_coeffs("sphere")[:2], [1, 1 / 3], rtol=1e-12)
    with pytest.raises(ValueError):
        football_logdet_oracle(precision=13)


@pytest.mark.parametrize("kind,spectrum,oracle", [
    ("football", football_spectrum(400), FOOTBALL_LOGDET),
    ("sphere", sphere_spectrum(300), SPHERE_LOGDET),
])
@pytest.mark.parametrize("T", [0.03, 0.05, 0.1])
def test_oracle_two_methods(kind, spectrum, oracle, T):
    # split Mellin with exact short-time coefficients is independent of the Hurwitz route
    pos = spectrum[spectrum > 0]
    assert_allclose(-zeta_prime_split(pos, exact_heat_coeffs(kind), T), oracle, atol=1e-6)


@given(st.floats(0.2, 5.0))
@settings(max_examples=20, deadline=None)
def test_scaling_identity(c):
    # eigenvalues times c: log det' shifts by +zeta(0) log c
    z0, dz = football_zeta()
    _, dz_c = _quadratic_zeta(2, 1, 1, 0.25 * c)
    assert_allclose(-dz_c, -dz + z0 * np.log(c), atol=1e-10)


def test_heat_trace_examples():
    v = np.array([0.0, 1.0, 2.0])
    assert_allclose(heat_trace(v, None, 1.0), 1 + np.exp(-1) + np.exp(-2))
    assert_allclose(heat_trace(v, None, 1.0, subtract_zero=True), np.exp(-1) + np.exp(-2))
    with pytest.raises(ValueError):
        heat_trace(v, None, 0.0)


def test_heat_trace_tail_guard():
    v = football_spectrum(20)
    with pytest.raises(TailUnreliable):
        heat_trace(v, fit_weyl_tail(v), 1e-4)


def test_weyl_slope_football():
    # area 8 pi: lambda_j ~ 4 pi j / area = j / 2
    tail = fit_weyl_tail(football_spectrum(200))
    assert_allclose(tail.slope, 0.5, rtol=2e-2)


@pytest.mark.parametrize("kind,spectrum,c_m1,c_0", [
    ("football", football_spectrum(500), 2.0, 5 / 12),
    ("sphere", sphere_spectrum(500), 1.0, 1 / 3),
])
def test_fit_exact_spectra(kind, spectrum, c_m1, c_0):
    m = fit_heat_coeffs(spectrum, with_log_probe=True)
    assert_allclose(m.c_m1, c_m1, rtol=1e-4)
    assert_allclose(m.c_0, c_0, rtol=5e-2)
    assert abs(m.c_mhalf) < 1e-3
    assert abs(m.log_coeff) < 5e-3


def test_log_det_exact_football():
    res = log_det(football_spectrum(500))
    assert_allclose(res.logdet, FOOTBALL_LOGDET, atol=3e-3)


def test_reference_route_zero_mode_and_T():
    v = football_spectrum(60)
    a = log_det_reference(v, 2, 2)
    b = log_det_reference(v[1:], 2, 2)
    assert a.logdet == pytest.approx(b.logdet, abs=1e-14)
    assert_allclose(a.logdet, FOOTBALL_LOGDET, atol=1e-10)
    assert_allclose(log_det_reference(v, 2, 2, T=0.5).logdet, FOOTBALL_LOGDET, atol=1e-10)


def test_reference_route_guard():
    with pytest.raises(TailUnreliable):
        log_det_reference(football_spectrum(5), 2, 2, T=0.01)


def test_log_det_map_needs_converged_eigenvalues():
    with pytest.raises(TailUnreliable):
        log_det_map(RationalMap.degree2(0, 1), Ls=(30, 40))


def test_extrapolate_aitken_and_table():
    rs = [DetResult(1 + 0.5 ** n, 0.0, 0.1, 10) for n in range(3)]
    out = extrapolate_logdet(rs, [10, 20, 30])
    assert_allclose(out.logdet, 1.0, atol=1e-12)
    assert [row["L"] for row in out.L_table] == [10, 20, 30]
    assert out.uncertainty >= 0.25
