"""Model solutions near a conical point and eigenvalue-perturbation predictions.

The model surface is the football ``z = w**2`` with its two antipodal
``4 pi`` cones.  Near the cone at ``w = 0`` the special solution

    Y = (1/w) (cos(nu r) + sin(nu r) |w|^2) / cos(nu pi),   cot(r/2) = |w|^2,

solves ``(Delta - lambda) Y = 0`` with ``lambda = nu (nu + 1)`` and behaves
like ``1/x + a xbar + O(|x|^3)`` in the distinguished parameter ``x = w``.
On a general cover the same singular solution is built as ``rho Yhat`` plus
a Galerkin resolvent correction; its ``x`` coefficient is ``b(lambda)``.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.polynomial.polynomial as P
import scipy.linalg

from .errors import (HalfIntegerNu, IncompleteGroup, InfiniteCriticalValue,
                     RootFindingFailure)
from .local_frame import schiffer_at_critical
from .rational_map import CriticalData, RationalMap, critical_data, is_inf
from .spectral import WeightField, assemble, solve
from .sphere import HarmonicBasis, w_to_angles

HALF_INTEGER_TOL = 1e-10
CHUNK = 1024


# ----------------------------------------------------------------------------
# model solution on the football
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Spectral parameter ``nu`` of the model solution, ``lambda = nu (nu + 1)``."""

    nu: complex
    cone_at_zero: bool = True

    def __post_init__(self):
        if abs(cmath.cos(cmath.pi * complex(self.nu))) < HALF_INTEGER_TOL:
            raise HalfIntegerNu(f"cos(nu pi) vanishes at nu={self.nu}")

    @property
    def lam(self) -> complex:
        nu = complex(self.nu)
        return nu * (nu + 1)

    @classmethod
    def from_lambda(cls, lam: float) -> "ModelParams":
        """Root with ``Re nu >= -1/2`` (``nu = -1/2 + i kappa`` below ``-1/4``)."""
        return cls(-0.5 + cmath.sqrt(0.25 + complex(lam)))


def _g(t, nu: complex):
    """``g(t) = (cos(nu r) + t sin(nu r)) / cos(nu pi)`` and ``g'(t)``, ``r = 2 arccot t``."""
    t = np.asarray(t, dtype=float)
    r = 2.0 * np.arctan2(1.0, t)
    dr = -2.0 / (1.0 + t * t)
    c, s = np.cos(nu * r), np.sin(nu * r)
    den = np.cos(nu * np.pi)
    g = (c + t * s) / den
    dg = ((-nu * s + t * nu * c) * dr + s) / den
    return g, dg


def football_Y(w, params: ModelParams):
    """Model solution as a function of the cover coordinate ``w != 0``."""
    w = np.asarray(w, dtype=complex)
    g, _ = _g(np.abs(w) ** 2, complex(params.nu))
    return g / w


def football_Y_derivatives(w, params: ModelParams):
    """``(Y, dY/dw, dY/dwbar)`` of the model solution."""
    w = np.asarray(w, dtype=complex)
    g, dg = _g(np.abs(w) ** 2, complex(params.nu))
    return g / w, -g / w ** 2 + dg * np.conj(w) / w, dg


def legendre_Y(r, psi, params: ModelParams):
    """Model solution in geodesic polar coordinates about the far cone.

    ``r`` in ``(0, pi)`` is the distance from ``w = infinity``; ``psi = arg w``.
    """
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= np.pi)):
        raise ValueError("r must lie in (0, pi)")
    nu = complex(params.nu)
    t = 1.0 / np.tan(r / 2.0)
    w = np.sqrt(t) * np.exp(1j * np.asarray(psi, dtype=float))
    out = (np.cos(nu * r) + np.sin(nu * r) * t) / (np.cos(nu * np.pi) * w)
    return complex(out) if out.ndim == 0 else out


def football_density(w):
    """Area density of the football metric in ``w``: ``16|w|^2/(1+|w|^4)^2``."""
    a2 = np.abs(np.asarray(w, dtype=complex)) ** 2
    return 16.0 * a2 / (1.0 + a2 * a2) ** 2


def stencil_residual(params: ModelParams, w, h: float = 2e-3):
    """``(Delta - lambda) Y`` at ``w`` by fourth-order five-point stencils per axis.

    ``Delta = -(flat Laplacian) / density`` in the ``w`` chart.
    """
    w = np.asarray(w, dtype=complex)
    stencil = ((-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0))
    lap = np.zeros(w.shape, dtype=complex)
    for step in (h, 1j * h):
        for k, c in stencil:
            lap = lap + c * football_Y(w + k * step, params)
    lap = lap / (12.0 * h * h)
    return -lap / football_density(w) - params.lam * football_Y(w, params)


def model_b_a(params: ModelParams) -> tuple[complex, complex, complex]:
    """Closed-form ``(b, a, c)`` of the model solution at the cone ``w = 0``."""
    nu = complex(params.nu)
    return 0j, (1 + 2 * nu) * cmath.tan(nu * cmath.pi), 0j


# ----------------------------------------------------------------------------
# expansion coefficients and the boundary pairing
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionCoeffs:
    """``u = am1/xbar + bm1/x + a0c log|x| + b0c + a1 xbar + b1 x + O(|x|^2)``."""

    am1: complex = 0j
    bm1: complex = 0j
    a0c: complex = 0j
    b0c: complex = 0j
    a1: complex = 0j
    b1: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.am1, self.bm1, self.a0c, self.b0c, self.a1, self.b1], dtype=complex)

    @classmethod
    def from_array(cls, arr) -> "ExpansionCoeffs":
        return cls(*(complex(v) for v in arr))

    def __add__(self, other: "ExpansionCoeffs") -> "ExpansionCoeffs":
        return ExpansionCoeffs.from_array(self.as_array() + other.as_array())

    def scale(self, c: complex) -> "ExpansionCoeffs":
        return ExpansionCoeffs.from_array(c * self.as_array())

    def to_json(self) -> dict:
        return {k: [v.real, v.imag] for k, v in zip(
            ("am1", "bm1", "a0c", "b0c", "a1", "b1"), self.as_array())}


def q_pairing(u: ExpansionCoeffs, v: ExpansionCoeffs) -> complex:
    """Boundary form ``(Delta u, v) - (u, Delta v)`` from the cone coefficients.

    ``v``'s fields are read as ``(c_-1, d_-1, c_0, d_0, c_1, d_1)``.
    """
    c = np.conj(v.as_array())
    cm1, dm1, c0, d0, c1, d1 = c
    return complex(4 * np.pi * (-u.am1 * d1 - u.bm1 * c1 - u.b0c * c0 / 2
                                + u.a0c * d0 / 2 + u.b1 * cm1 + u.a1 * dm1))


def extract_expansion(fun: Callable[[np.ndarray], np.ndarray], r_in: float = 1e-3,
                      r_out: float = 1e-2, n_r: int = 12, n_phi: int = 32) -> ExpansionCoeffs:
    """Least-squares expansion coefficients of ``fun(x)`` on an annulus.

    Higher terms ``xbar^2, x^2, |x|^2, xbar|x|^2, x|x|^2`` join the basis so
    that the remainder does not leak into the six reported coefficients.
    """
    r = np.linspace(r_in, r_out, n_r)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    x = (r[:, None] * np.exp(1j * phi[None, :])).ravel()
    xb = np.conj(x)
    a = np.abs(x)
    cols = [1 / xb, 1 / x, np.log(a), np.ones_like(x), xb, x,
            xb ** 2, x ** 2, a ** 2, xb * a ** 2, x * a ** 2]
    A = np.stack(cols, axis=1)
    # scale columns for conditioning
    norms = np.linalg.norm(A, axis=0)
    sol, *_ = np.linalg.lstsq(A / norms, np.asarray(fun(x), dtype=complex), rcond=None)
    return ExpansionCoeffs.from_array((sol / norms)[:6])


# ----------------------------------------------------------------------------
# group derivatives
# ----------------------------------------------------------------------------

def _check_group(group: Sequence[int], groups) -> None:
    if groups is None:
        return
    members = set(int(j) for j in group)
    for cluster in groups:
        cl = set(int(j) for j in cluster)
        if cl & members and not cl <= members:
            raise IncompleteGroup(f"group {sorted(members)} splits cluster {sorted(cl)}")


def group_derivative_prediction(coeffs, group: Sequence[int], groups=None,
                                indices=None) -> tuple[complex, complex]:
    """``(A, B)`` with ``A = 2 pi sum b_j^2`` over the group and ``B = conj(A)``.

    ``coeffs.b[i]`` belongs to eigen-index ``indices[i]`` (default: ``i``).
    ``groups`` (the spectrum's clusters) enables the completeness check.
    """
    _check_group(group, groups)
    pos = {int(j): i for i, j in enumerate(indices)} if indices is not None else None
    total = 0j
    for j in group:
        i = pos[int(j)] if pos is not None else int(j)
        total += complex(coeffs.b[i]) ** 2
    A = 2 * np.pi * total
    return A, np.conj(A)


@dataclass
class GroupDerivative:
    """Finite-difference ``d/dh`` of a group sum along a one-parameter family."""

    group: list
    A: complex
    h: float
    base_sum: float
    sums: dict


def group_sum_derivatives(family: Callable[[complex], RationalMap], groups: Sequence[Sequence[int]],
                          L: int = 40, h: float = 1e-3) -> list[GroupDerivative]:
    """Complex derivatives ``A = (D_x - i D_y)/2`` of several group sums.

    ``family(h)`` returns the map with one critical value shifted by ``h``;
    a group sum is smooth even where individual eigenvalues cross.  The four
    perturbed spectra are shared by all groups.
    """
    groups = [[int(j) for j in g] for g in groups]
    J = max(max(g) for g in groups) + 1
    spectra = {d: solve(WeightField(family(d)), L, J=J, vectors=False).values
               for d in (0, h, -h, 1j * h, -1j * h)}
    out = []
    for g in groups:
        sums = {d: float(np.sum(vals[g])) for d, vals in spectra.items()}
        dx = (sums[h] - sums[-h]) / (2 * h)
        dy = (sums[1j * h] - sums[-1j * h]) / (2 * h)
        out.append(GroupDerivative(g, 0.5 * (dx - 1j * dy), h, sums[0], sums))
    return out


def group_sum_derivative(family: Callable[[complex], RationalMap], group: Sequence[int],
                         L: int = 40, h: float = 1e-3) -> GroupDerivative:
    """Single-group form of :func:`group_sum_derivatives`."""
    return group_sum_derivatives(family, [group], L, h)[0]


# ----------------------------------------------------------------------------
# b(lambda) on a general cover
# ----------------------------------------------------------------------------

def _smooth_step(u):
    """``S(u)``: 0 at ``u <= 0``, 1 at ``u >= 1``, and its first two derivatives."""
    u = np.clip(np.asarray(u, dtype=float), 1e-12, 1 - 1e-12)
    g = 1 / u - 1 / (1 - u)
    dg = -1 / u ** 2 - 1 / (1 - u) ** 2
    ddg = 2 / u ** 3 - 2 / (1 - u) ** 3
    with np.errstate(over="ignore"):
        sig = 1 / (1 + np.exp(g))
    d1 = sig * (1 - sig)
    d2 = d1 * (1 - 2 * sig)
    return sig, -d1 * dg, d2 * dg * dg - d1 * ddg


@dataclass(frozen=True)
class CutoffAnnulus:
    """Radial cutoff ``rho = 1`` for ``|what| < r0`` and ``0`` beyond ``r1``."""

    r0: float
    r1: float

    def profile(self, r):
        width = self.r1 - self.r0
        S, dS, ddS = _smooth_step((self.r1 - r) / width)
        return S, -dS / width, ddS / width ** 2


def _default_annulus(z: complex, others: list) -> CutoffAnnulus:
    s = np.sqrt(1 + abs(z) ** 2)
    finite = [abs(o - z) for o in others if not is_inf(o)]
    d = min(finite) if finite else np.inf
    R = 1.0
    # keep the x-disc clear of the other critical values and of -1/conj(z)
    for _ in range(200):
        ok_model = abs(z) * R * R < 0.5
        x_max = s * R / np.sqrt(max(1 - abs(z) * R * R, 1e-12))
        if ok_model and x_max ** 2 < 0.6 * d:
            break
        R *= 0.95
    return CutoffAnnulus(0.35 * R, 0.9 * R)


def _chart_polys(fmap: RationalMap, data: CriticalData, k: int):
    if is_inf(data.points[k]):
        pv, qv = fmap.inverted_chart()
        return pv, qv, 0j, True
    return fmap.numerator, fmap.denominator, complex(data.points[k]), False


def _lift(fmap: RationalMap, data: CriticalData, k: int, x: np.ndarray,
          steps: int = 8, iters: int = 40) -> np.ndarray:
    """Source-chart points over ``z_k + x^2`` on the branch of the local frame.

    ``x`` has shape ``(n_r, n_phi)`` with radii increasing along axis 0;
    roots are continued outward from the frame series along each ray.
    """
    p, q, base, inverted = _chart_polys(fmap, data, k)
    dp, dq = P.polyder(p), P.polyder(q)
    frame = schiffer_at_critical(fmap, data, k)
    series = frame.w_of_x.coeffs
    z = complex(data.values[k])

    def newton(u0, X):
        u = u0.copy()
        Z = z + X * X
        for _ in range(iters):
            F = P.polyval(u, p) - Z * P.polyval(u, q)
            dF = P.polyval(u, dp) - Z * P.polyval(u, dq)
            step = F / dF
            u = u - step
            if np.all(np.abs(step) <= 1e-14 * (1 + np.abs(u))):
                return u
        if np.any(np.abs(step) > 1e-9 * (1 + np.abs(u))):
            raise RootFindingFailure("lift of the cutoff annulus did not converge")
        return u

    r = np.abs(x[:, 0])
    unit = x[0] / r[0]
    start = 0.05 * r[0]
    # march from a small radius where the series is accurate
    X = start * unit
    u = base + P.polyval(X, series)
    u = newton(u, X)
    for rr in np.geomspace(start, r[0], steps)[1:]:
        u = newton(u, rr * unit)
    out = np.empty(x.shape, dtype=complex)
    for i in range(len(r)):
        u = newton(u, x[i])
        out[i] = u
    return (1.0 / out) if inverted else out


@dataclass
class BLambdaResult:
    """``b(lambda)`` at critical point ``k`` with the pieces of its construction."""

    k: int
    lam: float
    b: complex
    b_model: complex
    correction: complex
    L: int
    annulus: CutoffAnnulus


def b_of_lambda(fmap: RationalMap, k: int, lam: float, L: int = 40,
                annulus: CutoffAnnulus | None = None, n_r: int = 48, n_phi: int = 96,
                data: CriticalData | None = None, assembly=None,
                method: str = "pairing") -> BLambdaResult:
    """Coefficient ``b(lambda)`` of the singular solution at critical point ``k``.

    ``Y = rho Yhat + R`` where ``Yhat`` is the rotated football solution
    (whose own ``x`` coefficient is ``conj(z)/(2(1+|z|^2))``) and the
    correction solves ``(Delta - lambda) R = -[Delta, rho] Yhat`` in the
    Galerkin space of degree ``L``.  ``lambda = 0`` fixes ``R`` up to a
    constant, which does not affect ``b``.
    """
    data = critical_data(fmap) if data is None else data
    z = data.values[k]
    if is_inf(z):
        raise InfiniteCriticalValue(f"critical value {k} is infinite")
    z = complex(z)
    s2 = 1 + abs(z) ** 2
    s = np.sqrt(s2)
    params = ModelParams.from_lambda(lam)
    if annulus is None:
        others = [v for j, v in enumerate(data.values) if j != k]
        annulus = _default_annulus(z, others)

    # quadrature on the transition annulus in the model coordinate
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    half = 0.5 * (annulus.r1 - annulus.r0)
    r = annulus.r0 + half * (xr + 1)
    wr = wr * half
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    what = r[:, None] * np.exp(1j * phi[None, :])
    Y, dY, dYb = football_Y_derivatives(what, params)
    Y, dY, dYb = Y / s, dY / s, dYb / s
    chi, d1, d2 = annulus.profile(r)
    rr = r[:, None]
    d_chi = d1[:, None] * np.conj(what) / (2 * rr)
    db_chi = d1[:, None] * what / (2 * rr)
    lap_chi = 0.25 * (d2[:, None] + d1[:, None] / rr)
    commutator = -4 * (lap_chi * Y + d_chi * dYb + db_chi * dY)
    weights = (wr * r)[:, None] * (2 * np.pi / n_phi)

    x = s * what / np.sqrt(1 - np.conj(z) * what ** 2)
    w = _lift(fmap, data, k, x)
    if assembly is not None:
        K, M, basis = assembly
    elif lam == 0:
        # the Dirichlet form alone is metric independent
        basis = HarmonicBasis(L)
        K, M = basis.stiffness, None
    else:
        K, M, basis = assemble(WeightField(fmap), L)
    theta, ang = w_to_angles(w.ravel())
    dens = (commutator * weights).ravel()
    G = np.zeros(basis.size, dtype=complex)
    for lo in range(0, len(dens), CHUNK):
        sl = slice(lo, lo + CHUNK)
        G += basis.evaluate(theta[sl], ang[sl]).T @ dens[sl]

    if lam == 0:
        v = np.zeros(basis.size, dtype=complex)
        v[1:] = -G[1:] / K[1:]
    else:
        v = scipy.linalg.solve(np.diag(K) - lam * M, -G, assume_a="sym")

    b_model = np.conj(z) / (2 * s2)
    if method == "pairing":
        # Green's identity: 4 pi (b - b_model) = -int [Delta, rho] Yhat (rho Yhat + R) dA
        direct = np.sum(commutator * weights * chi[:, None] * Y)
        correction = -complex(direct + G @ v) / (4 * np.pi)
    elif method == "pointwise":
        frame = schiffer_at_critical(fmap, data, k)
        wk = data.points[k]
        if is_inf(wk):
            th, ph, chart = np.array([np.pi]), np.array([0.0]), "inv"
        else:
            th, ph = w_to_angles(np.array([complex(wk)]))
            chart = "w"
        dw, _ = basis.complex_derivatives(th, ph, chart)
        correction = complex(dw[0] @ v) / frame.sqrt_c2
    else:
        raise ValueError(f"unknown method {method!r}")
    return BLambdaResult(k, float(lam), b_model + correction, b_model, correction, L, annulus)


def expected_b0(fmap: RationalMap, k: int, data: CriticalData | None = None) -> complex:
    """``b(0) = -S/6`` from the Schiffer connection at critical point ``k``."""
    data = critical_data(fmap) if data is None else data
    return schiffer_at_critical(fmap, data, k).b0


__all__ = [
    "ModelParams", "legendre_Y", "football_Y", "football_Y_derivatives", "stencil_residual",
    "model_b_a", "ExpansionCoeffs", "q_pairing", "extract_expansion",
    "group_derivative_prediction", "GroupDerivative", "group_sum_derivative",
    "group_sum_derivatives",
    "CutoffAnnulus", "BLambdaResult", "b_of_lambda", "expected_b0",
]
