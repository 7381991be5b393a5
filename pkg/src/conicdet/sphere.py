"""Real orthonormal spherical harmonics on the cover sphere.

The cover sphere carries the stereographic coordinate
``w = tan(theta/2) exp(i phi)`` (``w = 0`` at the north pole).  Basis
functions are indexed by ``(l, m)`` with ``m < 0`` denoting the sine
harmonic ``sqrt(2) P_l^|m| sin(|m| phi)``; ``P`` is the orthonormal
associated Legendre function without Condon-Shortley phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def basis_indices(L: int) -> tuple[np.ndarray, np.ndarray]:
    """``(ell, m)`` arrays ordered by degree, then ``m = 0, 1, -1, 2, -2, ...``."""
    ell, em = [], []
    for l in range(L + 1):
        ell.append(l)
        em.append(0)
        for m in range(1, l + 1):
            ell += [l, l]
            em += [m, -m]
    return np.array(ell), np.array(em)


def legendre_table(L: int, theta: np.ndarray, with_derivs: bool = False):
    """Orthonormal ``P_l^m(cos theta)`` for ``0 <= m <= l <= L``.

    Returns ``P[l, m, ...]``; with ``with_derivs`` also ``dP/dtheta`` and
    ``Q = P / sin(theta)`` (``m >= 1``), both regular at the poles.
    """
    theta = np.asarray(theta, dtype=float)
    x, s = np.cos(theta), np.sin(theta)
    shape = (L + 1, L + 1) + theta.shape
    Pt = np.zeros(shape)
    Qt = np.zeros(shape)
    sect = np.full(theta.shape, 1.0 / np.sqrt(4 * np.pi))
    sect_q = np.zeros(theta.shape)
    for m in range(L + 1):
        if m > 0:
            c = np.sqrt((2 * m + 1) / (2.0 * m))
            sect_q = c * sect
            sect = sect_q * s
        for table, start in ((Pt, sect), (Qt, sect_q)):
            table[m, m] = start
            if m + 1 <= L:
                table[m + 1, m] = np.sqrt(2 * m + 3) * x * start
            for l in range(m + 2, L + 1):
                a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
                b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
                table[l, m] = a * (x * table[l - 1, m] - b * table[l - 2, m])
    if not with_derivs:
        return Pt
    dP = np.zeros(shape)
    for l in range(1, L + 1):
        dP[l, 0] = -np.sqrt(l * (l + 1.0)) * Pt[l, 1]
        for m in range(1, l + 1):
            c = np.sqrt((2 * l + 1.0) * (l * l - m * m) / (2 * l - 1.0))
            dP[l, m] = l * x * Qt[l, m] - (c * Qt[l - 1, m] if l - 1 >= m else 0.0)
    return Pt, dP, Qt


def w_to_angles(w):
    w = np.asarray(w, dtype=complex)
    theta = 2.0 * np.arctan(np.abs(w))
    phi = np.angle(w)
    return theta, phi


def angles_to_w(theta, phi):
    return np.tan(np.asarray(theta) / 2.0) * np.exp(1j * np.asarray(phi))


class HarmonicBasis:
    """Real spherical harmonics up to degree ``L``."""

    def __init__(self, L: int):
        self.L = L
        self.ell, self.m = basis_indices(L)
        self.size = len(self.ell)

    @cached_property
    def stiffness(self) -> np.ndarray:
        return (self.ell * (self.ell + 1.0)).astype(float)

    def _trig(self, phi: np.ndarray):
        am = np.abs(self.m)
        arg = np.multiply.outer(phi, am)
        cos, sin = np.cos(arg), np.sin(arg)
        scale = np.where(self.m == 0, 1.0, np.sqrt(2.0))
        trig = np.where(self.m >= 0, cos, sin) * scale
        dtrig = np.where(self.m >= 0, -sin, cos) * (scale * am)
        return trig, dtrig

    def evaluate(self, theta, phi) -> np.ndarray:
        """Matrix ``Y[point, basis]`` at matched arrays of angles."""
        theta = np.atleast_1d(np.asarray(theta, float))
        phi = np.atleast_1d(np.asarray(phi, float))
        Pt = legendre_table(self.L, theta)
        trig, _ = self._trig(phi)
        Pb = Pt[self.ell, np.abs(self.m)].T
        return Pb * trig

    def evaluate_w(self, w) -> np.ndarray:
        theta, phi = w_to_angles(np.atleast_1d(w))
        return self.evaluate(theta, phi)

    def complex_derivatives(self, theta, phi, chart: str = "w"):
        """``(d/dw Y, d/dwbar Y)`` per point and basis function.

        ``d/dw = exp(-i phi) cos^2(theta/2) (d/dtheta - i/sin(theta) d/dphi)``.
        With ``chart="inv"`` derivatives are taken in ``v = 1/w``.
        """
        theta = np.atleast_1d(np.asarray(theta, float))
        phi = np.atleast_1d(np.asarray(phi, float))
        Pt, dP, Qt = legendre_table(self.L, theta, with_derivs=True)
        am = np.abs(self.m)
        Pb = Pt[self.ell, am].T
        dPb = dP[self.ell, am].T
        Qb = Qt[self.ell, am].T
        trig, dtrig = self._trig(phi)
        d_theta = dPb * trig
        # (1/sin theta) d/dphi, regular at the poles through Q
        d_phi_over_sin = Qb * dtrig
        if chart == "w":
            pref = (np.exp(-1j * phi) * np.cos(theta / 2) ** 2)[:, None]
            dw = pref * (d_theta - 1j * d_phi_over_sin)
            dwbar = np.conj(pref) * (d_theta + 1j * d_phi_over_sin)
        else:
            pref = (np.exp(1j * phi) * np.sin(theta / 2) ** 2)[:, None]
            dw = pref * (-d_theta + 1j * d_phi_over_sin)
            dwbar = np.conj(pref) * (-d_theta - 1j * d_phi_over_sin)
        return dw, dwbar


@dataclass(frozen=True)
class Grid:
    """Gauss-Legendre in ``cos theta`` times uniform azimuth."""

    n_theta: int
    n_phi: int

    @classmethod
    def for_degree(cls, L: int, oversample: float = 2.0) -> "Grid":
        return cls(int(np.ceil(oversample * (2 * L + 2))), int(np.ceil(oversample * (4 * L + 2))))

    @cached_property
    def theta(self) -> np.ndarray:
        x, _ = np.polynomial.legendre.leggauss(self.n_theta)
        return np.arccos(x)

    @cached_property
    def theta_weights(self) -> np.ndarray:
        _, wts = np.polynomial.legendre.leggauss(self.n_theta)
        return wts

    @cached_property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def phi_weight(self) -> float:
        return 2 * np.pi / self.n_phi

    def points_w(self) -> np.ndarray:
        """Stereographic coordinates, shape ``(n_theta, n_phi)``."""
        return angles_to_w(self.theta[:, None], self.phi[None, :])

    def integrate(self, values: np.ndarray) -> float:
        """Round-sphere integral of samples shaped ``(n_theta, n_phi)``."""
        return float(self.theta_weights @ values.sum(axis=1) * self.phi_weight)
