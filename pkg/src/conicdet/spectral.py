"""Galerkin eigensolver for the pulled-back round metric on the cover sphere.

The Dirichlet energy is conformally invariant, so in the round orthonormal
harmonic basis the stiffness matrix is ``diag(l(l+1))`` and every metric
dependence sits in the mass matrix ``M_ij = int Y_i Y_j mu dA``, where
``mu = f*m / m_round``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as P
import scipy.linalg

from .errors import ConvergenceWarning, QuadratureUnderflow
from .rational_map import INF, CriticalData, RationalMap, is_inf
from .local_frame import FrameData
from .sphere import Grid, HarmonicBasis, w_to_angles

GROUP_TOL = 1e-5
RELIABLE_FRACTION = 1.0 / 3.0


def _wronskian(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return P.polysub(P.polymul(P.polyder(p), q), P.polymul(p, P.polyder(q)))


class WeightField:
    """Conformal factor ``mu(w) = |f'|^2 (1+|w|^2)^2 / (1+|f|^2)^2``.

    Evaluated as ``|W|^2 (1+|w|^2)^2 / (|p|^2+|q|^2)^2`` with ``W = p'q - pq'``,
    which is regular at poles of ``f``; the ``v = 1/w`` chart is used for
    ``|w| > 1``.
    """

    def __init__(self, fmap: RationalMap):
        self.map = fmap
        p, q = fmap.numerator, fmap.denominator
        pv, qv = fmap.inverted_chart()
        self._charts = ((p, q, _wronskian(p, q)), (pv, qv, _wronskian(pv, qv)))

    @staticmethod
    def _mu(chart, z):
        p, q, W = chart
        num = np.abs(P.polyval(z, W)) ** 2 * (1 + np.abs(z) ** 2) ** 2
        den = (np.abs(P.polyval(z, p)) ** 2 + np.abs(P.polyval(z, q)) ** 2) ** 2
        return num / den

    def __call__(self, w) -> np.ndarray:
        if is_inf(w):
            return float(self._mu(self._charts[1], 0.0))
        w = np.asarray(w, dtype=complex)
        inner = np.abs(w) <= 1
        out = np.empty(w.shape)
        out[inner] = self._mu(self._charts[0], w[inner])
        outer = ~inner
        out[outer] = self._mu(self._charts[1], 1.0 / w[outer])
        return out


def weight(wf: WeightField, w) -> float:
    """Scalar conformal factor at ``w`` (``INF`` allowed)."""
    if is_inf(w):
        return wf(INF)
    return float(wf(np.array([w]))[0])


def _exp_coeffs(L: int, m: np.ndarray) -> np.ndarray:
    """Rows express the real azimuthal factor of ``m`` in ``exp(i k phi)``, ``k=-L..L``."""
    U = np.zeros((len(m), 2 * L + 1), dtype=complex)
    r2 = 1 / np.sqrt(2)
    for row, mm in enumerate(m):
        a = abs(mm)
        if mm == 0:
            U[row, L] = 1
        elif mm > 0:
            U[row, L + a] = r2
            U[row, L - a] = r2
        else:
            U[row, L + a] = -1j * r2
            U[row, L - a] = 1j * r2
    return U


def assemble(wf: WeightField, L: int, oversample: float = 2.0):
    """Stiffness diagonal ``K`` and mass matrix ``M`` at degree ``L``.

    Returns ``(K, M, basis)`` with ``K`` a 1-D array of diagonal entries.
    """
    if L < 2:
        raise ValueError("L must be at least 2")
    basis = HarmonicBasis(L)
    grid = Grid.for_degree(L, oversample)
    mu = wf(grid.points_w())
    # azimuthal integrals of mu against exp(i j phi), j = -2L..2L, per ring
    spec = np.fft.fft(mu, axis=1) * grid.phi_weight
    j = np.arange(-2 * L, 2 * L + 1)
    F = np.conj(spec[:, j % grid.n_phi])
    ms = np.array([0] + [s * a for a in range(1, L + 1) for s in (1, -1)])
    U = _exp_coeffs(L, ms)
    k = np.arange(2 * L + 1)
    hank = F[:, k[:, None] + k[None, :]]
    Phi = np.einsum("ak,tkl,bl->tab", U, hank, U, optimize=True).real
    Phi *= grid.theta_weights[:, None, None]

    from .sphere import legendre_table
    Pt = legendre_table(L, grid.theta)  # (l, m, t)
    Ppad = np.transpose(Pt[:, np.abs(ms), :], (2, 1, 0))  # (t, m_signed, l)
    nm = len(ms)
    M4 = np.empty((nm, L + 1, nm, L + 1))
    for a in range(nm):
        X = Phi[:, a, :, None] * Ppad
        M4[a] = (Ppad[:, a, :].T @ X.reshape(len(grid.theta), -1)).reshape(L + 1, nm, L + 1)
    # map (m_signed index, l) to basis index
    pos = {mm: i for i, mm in enumerate(ms)}
    mi = np.array([pos[mm] for mm in basis.m])
    M = M4[mi[:, None], basis.ell[:, None], mi[None, :], basis.ell[None, :]]
    M = 0.5 * (M + M.T)
    return basis.stiffness, M, basis


@dataclass
class Spectrum:
    """Lowest eigenpairs of the Galerkin problem ``K v = lambda M v``."""

    L: int
    values: np.ndarray
    vectors: np.ndarray
    groups: list
    reliable: np.ndarray
    ceiling: float
    basis: HarmonicBasis = field(repr=False)

    @property
    def reliable_values(self) -> np.ndarray:
        return self.values[self.reliable]

    def group_of(self, j: int) -> list:
        for g in self.groups:
            if j in g:
                return g
        raise IndexError(j)

    def to_csv(self, path) -> None:
        gid = np.empty(len(self.values), dtype=int)
        for i, g in enumerate(self.groups):
            gid[g] = i
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["index", "lambda", "group_id", "reliable_flag"])
            for j, lam in enumerate(self.values):
                out.writerow([j, repr(float(lam)), int(gid[j]), int(self.reliable[j])])


def group_indices(values: np.ndarray, tol: float = GROUP_TOL) -> list:
    """Split sorted values into clusters with gaps below ``tol (1 + lambda)``."""
    groups, cur = [], [0]
    for j in range(1, len(values)):
        if values[j] - values[j - 1] < tol * (1 + abs(values[j])):
            cur.append(j)
        else:
            groups.append(cur)
            cur = [j]
    groups.append(cur)
    return groups


def solve(wf: WeightField, L: int, J: int | None = None, group_tol: float = GROUP_TOL,
          vectors: bool = True, oversample: float = 2.0) -> Spectrum:
    """Eigenpairs ``0..J`` (default: the reliable third of the basis)."""
    K, M, basis = assemble(wf, L, oversample)
    n = basis.size
    n_rel = int(n * RELIABLE_FRACTION)
    explicit = J is not None
    if J is None:
        J = n_rel - 1
    if J > n - 2:
        raise ValueError(f"J={J} exceeds basis size {n}")
    top = max(J, n_rel)
    try:
        chol = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise QuadratureUnderflow("mass matrix is not positive definite") from exc
    # C = chol^-1 K chol^-T
    Linv = scipy.linalg.solve_triangular(chol, np.eye(n), lower=True)
    C = (Linv * K[None, :]) @ Linv.T
    C = 0.5 * (C + C.T)
    if vectors:
        lam, y = scipy.linalg.eigh(C, subset_by_index=[0, top], driver="evr")
        vec = Linv.T @ y
    else:
        lam = scipy.linalg.eigh(C, subset_by_index=[0, top], eigvals_only=True, driver="evr")
        vec = np.zeros((n, 0))
    ceiling = float(lam[n_rel - 1]) if n_rel - 1 < len(lam) else float(lam[-1])
    lam = lam[: J + 1]
    vec = vec[:, : J + 1] if vectors else vec
    if explicit and J + 1 > n_rel:
        warnings.warn(f"lambda_J={lam[-1]:.4g} is near the reliability ceiling {ceiling:.4g}",
                      ConvergenceWarning, stacklevel=2)
    if vectors:
        # fix eigenvector signs deterministically: largest component positive
        idx = np.argmax(np.abs(vec), axis=0)
        vec = vec * np.sign(vec[idx, np.arange(vec.shape[1])])
    reliable = np.arange(len(lam)) < n_rel
    lam = np.asarray(lam, dtype=float)
    lam[0] = max(lam[0], 0.0) if abs(lam[0]) < 1e-9 else lam[0]
    return Spectrum(L, lam, vec, group_indices(lam, group_tol), reliable, ceiling, basis)


def eigenfunction_value(spec: Spectrum, j: int, w: complex) -> float:
    Y = spec.basis.evaluate_w(np.array([w]))
    return float(Y[0] @ spec.vectors[:, j])


def eigenfunction_deriv(spec: Spectrum, wf: WeightField | None, j, w: complex,
                        chart: str = "w"):
    """``d/dw Phi_j`` at finite ``w`` from analytic basis derivatives.

    ``j`` may be an index or an index array; with ``chart="inv"`` the
    derivative is with respect to ``v = 1/w`` at the point ``w``.
    """
    theta, phi = w_to_angles(np.array([w]))
    dw, _ = spec.basis.complex_derivatives(theta, phi, chart)
    return dw[0] @ spec.vectors[:, j]


@dataclass
class ConeCoeffs:
    """Expansion ``Phi_j = c_j + b_j x + a_j xbar + ...`` at one cone."""

    k: int
    c: np.ndarray
    b: np.ndarray
    a: np.ndarray

    def to_json(self) -> dict:
        return {"k": self.k, "c": self.c.tolist(),
                "b": [[z.real, z.imag] for z in self.b],
                "a": [[z.real, z.imag] for z in self.a]}


def cone_coeffs(spec: Spectrum, wf: WeightField | None, data: CriticalData,
                frames: list[FrameData] | None, k: int, indices=None,
                check_tol: float | None = 1e-8) -> ConeCoeffs:
    """Cone coefficients at critical point ``k`` for eigenfunctions ``indices``.

    ``b_j = (d/dx Phi_j)(0) = (d/dw Phi_j)(w_k) / sqrt(c2)`` where
    ``x = sqrt(c2) (w - w_k) + ...`` is the distinguished parameter.
    For a critical point at infinity the ``v = 1/w`` chart is used.
    """
    if indices is None:
        indices = np.arange(len(spec.values))
    indices = np.asarray(indices)
    wk = data.points[k]
    if frames is not None:
        s = frames[k].sqrt_c2
    else:
        s = np.sqrt(complex(data.c2[k]))
    if is_inf(wk):
        theta, phi = np.array([np.pi]), np.array([0.0])
        chart = "inv"
    else:
        theta, phi = w_to_angles(np.array([wk]))
        chart = "w"
    dw, dwbar = spec.basis.complex_derivatives(theta, phi, chart)
    Y = spec.basis.evaluate(theta, phi)[0]
    vecs = spec.vectors[:, indices]
    b = (dw[0] @ vecs) / s
    a = (dwbar[0] @ vecs) / np.conj(s)
    if check_tol is not None:
        err = np.abs(a - np.conj(b))
        scale = 1 + np.abs(b)
        if np.any(err > check_tol * scale):
            raise AssertionError(f"a_j != conj(b_j): max deviation {err.max():.3g}")
    return ConeCoeffs(k, Y @ vecs, b, a)


def converged_count(fine: np.ndarray, coarse: np.ndarray, rtol: float = 1e-4) -> int:
    """Length of the leading run where ``fine`` and ``coarse`` agree to ``rtol``.

    Galerkin eigenvalues converge from above, so agreement between two
    degrees certifies the coarser one; the finer is at least as accurate.
    """
    n = min(len(fine), len(coarse))
    rel = np.abs(fine[:n] - coarse[:n]) / np.maximum(np.abs(fine[:n]), 1.0)
    bad = np.nonzero(rel > rtol)[0]
    return int(bad[0]) if len(bad) else n


def aitken(seq: np.ndarray) -> np.ndarray:
    """Aitken delta-squared limit of the last three rows of ``seq`` (axis 0).

    Falls back to the last entry where the second difference is tiny or the
    sequence is not contracting.
    """
    seq = np.asarray(seq, dtype=float)
    if len(seq) < 3:
        return seq[-1]
    x0, x1, x2 = seq[-3], seq[-2], seq[-1]
    d1, d2 = x1 - x0, x2 - x1
    dd = d2 - d1
    out = x2.copy()
    ok = (np.abs(dd) > 1e-300) & (np.abs(d2) < np.abs(d1))
    out[ok] = x2[ok] - d2[ok] ** 2 / dd[ok]
    # never move farther than the last increment
    bad = np.abs(out - x2) > np.abs(d2) + 1e-15
    out[bad] = x2[bad]
    return out


def extrapolated_values(wf: WeightField, Ls=(24, 32, 40), count: int = 15):
    """Lowest ``count`` eigenvalues at each ``L`` and their extrapolated limit."""
    table = np.array([solve(wf, L, J=count - 1, vectors=False).values[:count] for L in Ls])
    return aitken(table), table
