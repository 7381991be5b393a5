"""Heat traces, short-time fits and zeta-regularized determinants.

Two routes to ``zeta'(0)`` from a truncated spectrum are provided.

* ``log_det``: split Mellin transform at ``T``; below ``T`` the fitted
  short-time expansion is integrated term by term, above ``T`` the
  eigenvalue sum of ``E1(lambda T)`` plus a Weyl tail is used.
* ``log_det_reference``: the heat trace of a cover with ``M`` simple cones
  of angle ``4 pi`` agrees with ``(M/2) Theta_football + (N - M) Theta_sphere``
  up to exponentially small terms as ``t -> 0``, so the difference of the
  two zeta functions needs only the large-time eigenvalue sums.
"""
from __future__ import annotations

from functools import lru_cache
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.special import exp1

from .errors import IllConditionedFit, TailUnreliable

EULER_GAMMA = float(mpmath.euler)
FIT_BASIS = (-1.0, -0.5, 0.0, 0.5, 1.0)
# default fit window: truncation-free lower end, upper end before t^2 terms matter
FIT_LOWER = 12.0
FIT_UPPER = 0.25


# ---------------------------------------------------------------- exact spectra

def football_spectrum(nu_max: float) -> np.ndarray:
    """``nu (nu+1)`` for ``nu = 0, 1/2, ..., nu_max``, each ``2 nu + 1`` times."""
    if nu_max < 1:
        raise ValueError("nu_max must be at least 1")
    n2 = int(np.floor(2 * nu_max + 1e-9))
    nu = np.arange(n2 + 1) / 2.0
    return np.repeat(nu * (nu + 1), (2 * nu + 1).astype(int))


def sphere_spectrum(l_max: int) -> np.ndarray:
    """Round unit sphere: ``l (l+1)`` with multiplicity ``2l + 1``."""
    ell = np.arange(l_max + 1)
    return np.repeat(ell * (ell + 1.0), 2 * ell + 1)


def _quadratic_zeta(a, c, g, scale, precision: int = 12):
    """``(zeta(0), zeta'(0))`` for eigenvalues ``scale (n^2 - c)``, ``n in a + N0``,
    with multiplicity ``g n``.

    Expands ``(n^2 - c)^-s`` binomially into Hurwitz zeta values; the series
    in ``p`` is cut once the bound ``c^p (a^(1-2p) + a^(2-2p)/(2p-2)) / p``
    on the remaining terms is below ``10^-(precision+3)``.
    """
    with mpmath.workdps(precision + 15):
        a, c, g, scale = (mpmath.mpf(x) for x in (a, c, g, scale))
        z0 = g * (mpmath.zeta(-1, a) + c / 2)
        dz = 2 * mpmath.zeta(-1, a, derivative=1) - c * mpmath.digamma(a)
        eps = mpmath.mpf(10) ** (-(precision + 3))
        p = 2
        while True:
            dz += c ** p * mpmath.zeta(2 * p - 1, a) / p
            bound = c ** (p + 1) * (a ** (-1 - 2 * p) + a ** (-2 * p) / (2 * p)) / (p + 1)
            if bound / (1 - c / a ** 2) < eps:
                break
            p += 1
        dz = -mpmath.log(scale) * z0 + g * dz
        return float(z0), float(dz)


@lru_cache(maxsize=None)
def football_zeta(precision: int = 12) -> tuple[float, float]:
    """``(zeta(0), zeta'(0))`` of the exact football spectrum."""
    return _quadratic_zeta(2, 1, 1, 0.25, precision)


@lru_cache(maxsize=None)
def sphere_zeta(precision: int = 12) -> tuple[float, float]:
    """``(zeta(0), zeta'(0))`` of the round unit sphere."""
    return _quadratic_zeta(1.5, 0.25, 2, 1, precision)


def football_logdet_oracle(precision: int = 12) -> float:
    """``log det' Delta = -zeta'(0)`` for the football (two antipodal 4 pi cones)."""
    if precision > 12:
        raise ValueError("precision is capped at 12 digits")
    return -football_zeta(precision)[1]


def sphere_logdet_oracle(precision: int = 12) -> float:
    return -sphere_zeta(precision)[1]


def _half_lattice_heat_coeffs(h: float, order: int) -> list:
    """Coefficients of ``sum_{n in h + N0} n exp(-a n^2)`` in powers ``a^-1, a^0, ...``.

    Euler-Maclaurin with Bernoulli polynomials; asymptotic, not convergent.
    """
    out = [0.5]
    for j in range(order):
        out.append(-float(mpmath.bernpoly(2 * j + 2, h)) * (-1) ** j / ((2 * j + 2) * mpmath.factorial(j)))
    return out


def exact_heat_coeffs(kind: str, order: int = 6) -> np.ndarray:
    """Short-time coefficients ``c_{-1}, c_0, c_1, ...`` of the exact heat trace.

    ``kind`` is ``"football"`` (trace ``exp(t/4) sum n exp(-t n^2 / 4)``) or
    ``"sphere"`` (``exp(t/4) sum 2n exp(-t n^2)`` over half-odd ``n``).
    """
    if kind == "football":
        h, g, a_per_t = 0.0, 1.0, 0.25
    elif kind == "sphere":
        h, g, a_per_t = 0.5, 2.0, 1.0
    else:
        raise ValueError(kind)
    lat = _half_lattice_heat_coeffs(h, order + 1)
    # series in t: lat[0]/(a) + sum_j lat[j+1] a^j, a = a_per_t t
    base = np.zeros(order + 2)
    base[0] = lat[0] / a_per_t
    for j in range(order + 1):
        base[j + 1] += lat[j + 1] * a_per_t ** j
    expo = np.array([0.25 ** i / float(mpmath.factorial(i)) for i in range(order + 2)])
    out = np.zeros(order + 2)
    for i in range(order + 2):
        for j in range(order + 2 - i):
            out[i + j] += expo[i] * base[j]
    return g * out


def zeta_prime_split(values: np.ndarray, coeffs: np.ndarray, T: float) -> float:
    """``zeta'(0)`` from exact short-time coefficients and the full spectrum.

    ``coeffs`` multiply ``t^-1, t^0, t^1, ...``; ``values`` exclude zero.
    """
    total = coeffs[0] / (-T)
    total += (coeffs[1] - 1) * (np.log(T) + EULER_GAMMA)
    for i, c in enumerate(coeffs[2:], start=1):
        total += c * T ** i / i
    return float(total + np.sum(exp1(values * T)))


# ----------------------------------------------------------------- heat traces

@dataclass(frozen=True)
class WeylTail:
    """Linear model ``lambda_j ~ slope j + offset`` beyond the last computed index."""

    slope: float
    offset: float
    start: int

    def count_integral_exp(self, t: float) -> float:
        """``int_{start+1/2}^inf exp(-(slope x + offset) t) dx``."""
        x0 = (self.slope * (self.start + 0.5) + self.offset) * t
        return float(np.exp(-x0) / (self.slope * t))

    def count_integral_e1(self, T: float) -> float:
        """``int_{start+1/2}^inf E1((slope x + offset) T) dx``."""
        x0 = (self.slope * (self.start + 0.5) + self.offset) * T
        return float((np.exp(-x0) - x0 * exp1(x0)) / (self.slope * T))


def fit_weyl_tail(values: np.ndarray) -> WeylTail:
    """Least-squares ``lambda_j = s j + o`` over the top decade ``j in [J/10, J]``."""
    J = len(values) - 1
    j = np.arange(max(1, J // 10), J + 1)
    A = np.column_stack([j, np.ones_like(j)]).astype(float)
    (s, o), *_ = np.linalg.lstsq(A, values[j], rcond=None)
    return WeylTail(float(s), float(o), J)


def heat_trace(values: np.ndarray, tail: WeylTail | None, t: float,
               subtract_zero: bool = False, check: bool = True) -> float:
    """``sum_j exp(-lambda_j t)`` plus the Weyl tail beyond ``lambda_J``."""
    if t <= 0:
        raise ValueError("t must be positive")
    values = np.asarray(values, dtype=float)
    if check and tail is not None and t < 2.0 / values[-1]:
        raise TailUnreliable(f"t={t:.3g} below 2/lambda_J={2 / values[-1]:.3g}")
    total = float(np.sum(np.exp(-values * t)))
    if tail is not None:
        total += tail.count_integral_exp(t)
    return total - 1.0 if subtract_zero else total


@dataclass
class HeatModel:
    """Fitted short-time expansion ``sum_alpha c_alpha t^alpha`` (+ ``log t`` probe)."""

    c_m1: float
    c_mhalf: float
    c_0: float
    c_half: float
    c_1: float
    log_coeff: float
    tail: WeylTail | None
    t_range: tuple
    residual: float
    log_probe: bool = False

    @property
    def powers(self) -> dict:
        return {-1.0: self.c_m1, -0.5: self.c_mhalf, 0.0: self.c_0, 0.5: self.c_half, 1.0: self.c_1}

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = sum(c * t ** a for a, c in self.powers.items())
        return out + self.log_coeff * np.log(t)

    def to_json(self) -> dict:
        return {"c_m1": self.c_m1, "c_mhalf": self.c_mhalf, "c_0": self.c_0,
                "c_half": self.c_half, "c_1": self.c_1, "log_coeff": self.log_coeff,
                "t_range": list(self.t_range), "residual": self.residual}


def reliability_window(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    lam1 = values[values > 1e-9][0]
    return 2.0 / values[-1], 1.0 / lam1


def default_fit_window(values: np.ndarray) -> tuple[float, float]:
    """``[12/lambda_J, min(1/lambda_1, 0.25)]``, inside the reliability window."""
    lo, hi = reliability_window(values)
    a = FIT_LOWER / float(np.max(values))
    b = min(hi, FIT_UPPER)
    if a > b / 3:
        raise TailUnreliable(f"spectrum too short for a fit window (lambda_J={np.max(values):.3g})")
    return a, b


def fit_heat_coeffs(values: np.ndarray, t_range=None, with_log_probe: bool = False,
                    samples: int = 60, tail: WeylTail | None = None) -> HeatModel:
    """Least-squares fit of the heat trace on a log-spaced grid in ``t_range``."""
    values = np.sort(np.asarray(values, dtype=float))
    lo, hi = reliability_window(values)
    if t_range is None:
        t_range = default_fit_window(values)
    if t_range[0] < lo * (1 - 1e-12) or t_range[1] > hi * (1 + 1e-12):
        raise TailUnreliable(f"t_range {t_range} outside window [{lo:.3g}, {hi:.3g}]")
    if tail is None:
        tail = fit_weyl_tail(values)
    t = np.geomspace(t_range[0], t_range[1], samples)
    y = np.array([heat_trace(values, tail, ti, check=False) for ti in t])
    cols = [t ** a for a in FIT_BASIS]
    if with_log_probe:
        cols.append(np.log(t))
    A = np.column_stack(cols)
    norms = np.linalg.norm(A, axis=0)
    cond = np.linalg.cond(A / norms)
    if cond > 1e10:
        raise IllConditionedFit(f"design matrix condition {cond:.3g}")
    # weight by 1/y so the fit is relative across the window
    wts = 1.0 / np.abs(y)
    coef, *_ = np.linalg.lstsq(A * wts[:, None] / norms, y * wts, rcond=None)
    coef = coef / norms
    resid = float(np.max(np.abs(A @ coef - y) * wts))
    log_c = float(coef[5]) if with_log_probe else 0.0
    return HeatModel(*map(float, coef[:5]), log_c, tail, tuple(map(float, t_range)),
                     resid, with_log_probe)


# ---------------------------------------------------------------- determinants

@dataclass
class DetResult:
    logdet: float
    uncertainty: float
    T: float
    J: int
    L_table: list = field(default_factory=list)
    method: str = "fit"
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"logdet": self.logdet, "uncertainty": self.uncertainty, "T": self.T,
                "J": self.J, "L_table": self.L_table, "method": self.method,
                "diagnostics": self.diagnostics}


def _positive(values) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float))
    return values[values > 1e-9]


def zeta_prime_fit(values: np.ndarray, model: HeatModel, T: float) -> float:
    """Split-Mellin ``zeta'(0)`` using the fitted expansion below ``T``.

    A ``t^alpha`` term contributes ``c T^alpha / alpha`` (``alpha != 0``), the
    constant term ``(c_0 - 1)(log T + gamma)``; ``log t`` terms are excluded.
    """
    pos = _positive(values)
    small = sum(c * T ** a / a for a, c in model.powers.items() if a != 0)
    small += (model.c_0 - 1) * (np.log(T) + EULER_GAMMA)
    large = float(np.sum(exp1(pos * T)))
    if model.tail is not None:
        large += model.tail.count_integral_e1(T)
    return float(small + large)


def _values_of(spec) -> np.ndarray:
    if hasattr(spec, "reliable_values"):
        return np.asarray(spec.reliable_values)
    return np.asarray(spec, dtype=float)


def log_det(spec, model: HeatModel | None = None, T: float | None = None,
            with_log_probe: bool = True) -> DetResult:
    """``-zeta'(0)`` via the fitted short-time expansion.

    ``spec`` is a ``Spectrum`` (reliable values used) or a sorted array that
    includes the zero mode.  When ``model`` is omitted it is fitted over the
    default window; ``T`` defaults to the lower end of the fit window, where
    the eigenvalue sum is already truncation-free.
    """
    values = np.sort(_values_of(spec))
    if not np.any(np.abs(values) < 1e-9):
        values = np.concatenate([[0.0], values])
    probe = None
    if model is None:
        model = fit_heat_coeffs(values, with_log_probe=False)
        if with_log_probe:
            probe = fit_heat_coeffs(values, with_log_probe=True)
    lo, hi = model.t_range
    if T is None:
        T = lo
    if T < 2.0 / values[-1]:
        raise TailUnreliable(f"split T={T:.3g} below 2/lambda_J")
    zp = zeta_prime_fit(values, model, T)
    spread = abs(zeta_prime_fit(values, model, min(2 * T, hi)) - zp)
    spread = max(spread, abs(zeta_prime_fit(values, model, max(T / 2, lo)) - zp))
    diag = {"model": model.to_json(), "split_spread": spread}
    if probe is not None:
        diag["log_coeff"] = probe.log_coeff
    return DetResult(-zp, spread, T, len(values) - 1, [], "fit", diag)


def reference_trace_weights(degree: int, cones: int) -> tuple[float, float]:
    """Weights ``(football, sphere)`` of the local reference heat trace."""
    return cones / 2.0, float(degree - cones)


REFERENCE_CUT = 10.0
REFERENCE_T_MAX = 0.3


def log_det_reference(spec, degree: int, cones: int, T: float | None = None,
                      cut: float = REFERENCE_CUT, T_max: float = REFERENCE_T_MAX,
                      lam_cut: float | None = None) -> DetResult:
    """``-zeta'(0)`` for a degree-``degree`` cover with ``cones`` simple branch points.

    Uses ``zeta'_X(0) = w_f zeta'_fb(0) + w_s zeta'_S2(0)
    + sum_X E1(lambda T) - sum_ref E1(mu T) + (n_ref - 1)(log T + gamma)``
    with both eigenvalue sums truncated at the largest supplied ``lambda``.
    ``T`` defaults to ``min(cut / lambda_max, T_max)``: large enough that the
    truncation is negligible, small enough that the exponentially small
    difference of the two short-time traces is.  The reported uncertainty is
    the change under ``T -> 1.5 T`` and ``T -> T / 1.5``.  A fixed
    ``lam_cut`` for the reference sums keeps the result smooth across nearby
    maps, as needed for finite differences in moduli.
    """
    values = np.sort(_values_of(spec))
    pos = values[values > 1e-9]
    lam_max = float(values[-1]) if lam_cut is None else float(lam_cut)
    if T is None:
        T = min(cut / lam_max, T_max)
    if T * lam_max < 8:
        raise TailUnreliable(f"T lambda_max = {T * lam_max:.3g} < 8; more converged eigenvalues needed")
    wf_, ws_ = reference_trace_weights(degree, cones)
    fb = sp = np.zeros(0)
    if wf_:
        nu_max = max(np.ceil(np.sqrt(lam_max + 0.25)), 1.0)
        fb = football_spectrum(nu_max)
        fb = fb[(fb > 1e-9) & (fb <= lam_max)]
    if ws_:
        sp = sphere_spectrum(int(np.ceil(np.sqrt(lam_max))) + 1)
        sp = sp[(sp > 1e-9) & (sp <= lam_max)]
    n_ref = wf_ + ws_
    base = wf_ * football_zeta()[1] + ws_ * sphere_zeta()[1]

    def zp(T_):
        ref = wf_ * np.sum(exp1(fb * T_)) + ws_ * np.sum(exp1(sp * T_))
        return (base + np.sum(exp1(pos * T_)) - ref
                + (n_ref - 1) * (np.log(T_) + EULER_GAMMA))

    z = zp(T)
    spread = abs(zp(T / 1.5) - z) if T / 1.5 * lam_max >= 8 else 0.0
    spread = max(spread, abs(zp(T * 1.5) - z))
    diag = {"lambda_max": lam_max, "count": int(len(values)),
            "reference_weights": [wf_, ws_], "split_spread": spread}
    return DetResult(float(-z), float(spread), float(T), len(values) - 1, [], "reference", diag)


def log_det_map(fmap, Ls=(40, 50), method: str = "reference", rtol: float = 1e-4,
                J: int | None = None) -> DetResult:
    """Log-determinant of ``f*m`` from Galerkin spectra at consecutive degrees.

    For each pair ``(L_prev, L)`` only the eigenvalues of degree ``L`` that
    agree with degree ``L_prev`` to ``rtol`` are used.  The result is the
    last pair's value; the uncertainty is the larger of its split spread and
    the change from the previous pair.
    """
    from .rational_map import critical_data
    from .spectral import WeightField, converged_count, solve

    Ls = sorted(Ls)
    if len(Ls) < 2:
        raise ValueError("at least two degrees are needed to certify convergence")
    wf = WeightField(fmap)
    cones = critical_data(fmap, strict=False).count
    spectra = [solve(wf, L, J=J, vectors=False) for L in Ls]
    results = []
    for prev, cur in zip(spectra, spectra[1:]):
        n = converged_count(cur.values, prev.values, rtol)
        vals = cur.values[:n]
        if method == "reference":
            res = log_det_reference(vals, fmap.degree, cones)
        elif method == "fit":
            res = log_det(vals)
        else:
            raise ValueError(f"unknown method {method!r}")
        res.diagnostics["converged"] = n
        results.append(res)
    return extrapolate_logdet(results, Ls[1:], aitken_limit=False)


def extrapolate_logdet(results: list, Ls: list, aitken_limit: bool = True) -> DetResult:
    """Combine per-``L`` results into one ``DetResult``.

    With ``aitken_limit`` and three or more entries the Aitken limit is
    returned, otherwise the last entry.  The uncertainty is the larger of
    the last entry's own spread and the distance to the previous entry (or
    to the limit).
    """
    from .spectral import aitken
    vals = np.array([r.logdet for r in results])
    best = float(vals[-1])
    ext_spread = 0.0
    if len(vals) >= 3 and aitken_limit:
        best = float(aitken(vals[:, None])[0])
        ext_spread = abs(vals[-1] - best)
    if len(vals) >= 2:
        ext_spread = max(ext_spread, abs(vals[-1] - vals[-2]))
    last = results[-1]
    unc = max(float(ext_spread), last.uncertainty)
    table = [{"L": int(L), "logdet": float(r.logdet), "uncertainty": float(r.uncertainty),
              "T": float(r.T), "count": int(r.J + 1)} for L, r in zip(Ls, results)]
    return DetResult(best, unc, last.T, last.J, table, last.method, dict(last.diagnostics))


@dataclass
class GradientCheck:
    """Finite-difference ``d log det / d z_k`` against the variational formula."""

    k: int
    fd: complex
    predicted: complex
    h: float

    @property
    def rel_error(self) -> float:
        return float(abs(self.fd - self.predicted) / max(abs(self.predicted), 1e-300))

    def to_json(self) -> dict:
        return {"k": self.k, "fd": [self.fd.real, self.fd.imag],
                "predicted": [self.predicted.real, self.predicted.imag],
                "h": self.h, "rel_error": self.rel_error}


def log_det_gradient_fd(fmap, ks=None, h: float = 1e-3, Ls=(40, 50),
                        rtol: float = 1e-4) -> tuple[list, DetResult]:
    """Central differences of ``log det'`` in the critical values ``z_k``.

    The eigenvalue count, split time and reference cut are frozen at the
    base map so the finite differences see a smooth function of the moduli;
    ``d/dz = (D_x - i D_y)/2`` for the real-valued determinant.
    """
    from .local_frame import variational_rhs
    from .rational_map import critical_data
    from .spectral import WeightField, converged_count, solve
    from .tau import shift_value

    Ls = sorted(Ls)
    data = critical_data(fmap)
    cones = data.count
    coarse = solve(WeightField(fmap), Ls[-2], vectors=False)
    fine = solve(WeightField(fmap), Ls[-1], vectors=False)
    n = converged_count(fine.values, coarse.values, rtol)
    base = log_det_reference(fine.values[:n], fmap.degree, cones)
    T, cut = base.T, float(fine.values[n - 1])

    def value(m) -> float:
        vals = solve(WeightField(m), Ls[-1], J=n - 1, vectors=False).values[:n]
        return log_det_reference(vals, fmap.degree, cones, T=T, lam_cut=cut).logdet

    checks = []
    for k in (range(cones) if ks is None else ks):
        d = {s: value(shift_value(fmap, k, s, data)) for s in (h, -h, 1j * h, -1j * h)}
        dx = (d[h] - d[-h]) / (2 * h)
        dy = (d[1j * h] - d[-1j * h]) / (2 * h)
        checks.append(GradientCheck(int(k), complex(0.5 * (dx - 1j * dy)),
                                    complex(variational_rhs(fmap, data, k)), h))
    base.diagnostics.update({"converged": n, "lam_cut": cut})
    return checks, base
