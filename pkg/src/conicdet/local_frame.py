"""Power series at a critical point: distinguished parameter and Schwarzian.

At a simple critical point ``w_k`` with value ``z_k`` the distinguished
parameter is ``x = sqrt(f(w) - z_k)``.  On the cover sphere the Bergman
projective connection vanishes in the coordinate ``w``, so the Schiffer
projective connection at ``x = 0`` is the Schwarzian ``{w, x}(0)`` of the
chart change.  The endpoint coefficients entering the variation of
``log det'`` are ``b(0) = -schiffer/6`` and
``b(-inf) = conj(z_k) / (2 (1 + |z_k|^2))``.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCritical, InfiniteCriticalValue, NonInvertible
from .rational_map import CriticalData, RationalMap, is_inf, point_to_json

INTERNAL_ORDER = 6
MIN_ORDER = 4


@dataclass(frozen=True)
class PowerSeries:
    """Truncated series ``sum_n coeffs[n] * y**n`` known through ``y**order``."""

    coeffs: np.ndarray
    order: int

    def __post_init__(self):
        c = np.zeros(self.order + 1, dtype=complex)
        src = np.asarray(self.coeffs, dtype=complex)[: self.order + 1]
        c[: len(src)] = src
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, n: int) -> complex:
        return complex(self.coeffs[n]) if n <= self.order else 0j

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        order = min(self.order, other.order)
        return PowerSeries(self.coeffs[: order + 1] + other.coeffs[: order + 1], order)

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs * other, self.order)
        order = min(self.order, other.order)
        return PowerSeries(np.convolve(self.coeffs, other.coeffs)[: order + 1], order)

    __rmul__ = __mul__

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """``self(inner(y))``; ``inner`` must have zero constant term."""
        if abs(inner[0]) > 0:
            raise ValueError("inner series must vanish at the origin")
        order = min(self.order, inner.order)
        out = np.zeros(order + 1, dtype=complex)
        power = np.zeros(order + 1, dtype=complex)
        power[0] = 1.0
        inner_c = inner.coeffs[: order + 1]
        for n in range(order + 1):
            out += self[n] * power
            power = np.convolve(power, inner_c)[: order + 1]
        return PowerSeries(out, order)

    def sqrt1p(self) -> "PowerSeries":
        """``(1 + self)**(1/2)`` by the binomial series; requires zero constant term."""
        if abs(self[0]) > 0:
            raise ValueError("sqrt1p needs a series vanishing at the origin")
        out = np.zeros(self.order + 1, dtype=complex)
        power = np.zeros(self.order + 1, dtype=complex)
        power[0] = 1.0
        binom = 1.0
        for n in range(self.order + 1):
            out += binom * power
            binom *= (0.5 - n) / (n + 1)
            power = np.convolve(power, self.coeffs)[: self.order + 1]
        return PowerSeries(out, self.order)


def series_invert(s: PowerSeries) -> PowerSeries:
    """Compositional inverse ``t`` with ``s(t(y)) = y`` through the truncation order."""
    if s.order < MIN_ORDER:
        raise ValueError(f"truncation order {s.order} < {MIN_ORDER}")
    if abs(s[0]) > 1e-14:
        raise NonInvertible("series has a nonzero constant term")
    if abs(s[1]) < 1e-14:
        raise NonInvertible("linear coefficient vanishes")
    t = np.zeros(s.order + 1, dtype=complex)
    t[1] = 1.0 / s[1]
    for n in range(2, s.order + 1):
        # coefficient of y**n in s(t) with t_n still zero, then solve linearly
        trial = s.compose(PowerSeries(t, s.order))
        t[n] = -trial[n] / s[1]
    return PowerSeries(t, s.order)


def schwarzian_at_zero(w_of_x: PowerSeries) -> complex:
    """``{w, x}(0) = w'''/w' - 3/2 (w''/w')**2`` from the first series coefficients."""
    if w_of_x.order < MIN_ORDER:
        raise ValueError(f"truncation order {w_of_x.order} < {MIN_ORDER}")
    a1, a2, a3 = w_of_x[1], w_of_x[2], w_of_x[3]
    if abs(a1) < 1e-14:
        raise NonInvertible("linear coefficient vanishes")
    r2, r3 = a2 / a1, a3 / a1
    return 6.0 * r3 - 6.0 * r2 * r2


@dataclass(frozen=True)
class FrameData:
    k: int
    sqrt_c2: complex
    w_of_x: PowerSeries
    schiffer: complex
    b0: complex
    binf: complex | None
    critical_value: complex | None

    @property
    def binf_flagged(self) -> bool:
        return self.binf is None

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "sqrt_c2": point_to_json(self.sqrt_c2),
            "schiffer": point_to_json(self.schiffer),
            "b0": point_to_json(self.b0),
            "binf": None if self.binf is None else point_to_json(self.binf),
            "w_of_x": [point_to_json(c) for c in self.w_of_x.coeffs],
        }


def b_minus_infinity(z: complex) -> complex:
    z = complex(z)
    return 0.5 * z.conjugate() / (1.0 + abs(z) ** 2)


def distinguished_series(taylor: np.ndarray, sqrt_c2: complex | None = None,
                         order: int = INTERNAL_ORDER) -> tuple[complex, PowerSeries]:
    """``x(u) = sqrt(c2) u (1 + (c3/c2) u + (c4/c2) u^2 + ...)^(1/2)`` as a series in ``u``."""
    c2 = complex(taylor[2])
    if abs(c2) < 1e-14:
        raise DegenerateCritical("c2 vanishes: critical point is not simple")
    if sqrt_c2 is None:
        sqrt_c2 = cmath.sqrt(c2)
    order = min(order, len(taylor) - 2)
    ratio = np.zeros(order, dtype=complex)
    # ratio(u) = (c3 u + c4 u^2 + ...)/c2, needed through u**(order-1)
    ratio[1:] = np.asarray(taylor[3:order + 2], dtype=complex) / c2
    root = PowerSeries(ratio, order - 1).sqrt1p()
    x = np.zeros(order + 1, dtype=complex)
    x[1:] = sqrt_c2 * root.coeffs[:order]
    return sqrt_c2, PowerSeries(x, order)


def schiffer_at_critical(fmap: RationalMap, data: CriticalData, k: int,
                         sqrt_c2: complex | None = None) -> FrameData:
    """Schiffer connection, ``b(0)`` and ``b(-inf)`` at critical point ``k``.

    Critical points at ``w = INF`` are handled in the ``1/w`` chart (the
    Schwarzian of a Moebius change of the source coordinate vanishes).
    """
    taylor = data.taylor[k]
    if abs(taylor[2]) < 1e-12 * max(1.0, float(np.max(np.abs(taylor[2:])))):
        raise DegenerateCritical(f"critical point {k} is not simple")
    sqrt_c2, x_of_u = distinguished_series(taylor, sqrt_c2)
    w_of_x = series_invert(x_of_u)
    schiffer = schwarzian_at_zero(w_of_x)
    value = data.values[k]
    binf = None if is_inf(value) else b_minus_infinity(value)
    return FrameData(
        k=k,
        sqrt_c2=sqrt_c2,
        w_of_x=w_of_x,
        schiffer=schiffer,
        b0=-schiffer / 6.0,
        binf=binf,
        critical_value=None if is_inf(value) else complex(value),
    )


def frames(fmap: RationalMap, data: CriticalData) -> list[FrameData]:
    return [schiffer_at_critical(fmap, data, k) for k in range(data.count)]


def variational_rhs(fmap: RationalMap, data: CriticalData, k: int,
                    frame: FrameData | None = None) -> complex:
    """``d log det' / d z_k`` predicted from the local frame at critical point ``k``."""
    if frame is None:
        frame = schiffer_at_critical(fmap, data, k)
    if frame.binf is None:
        raise InfiniteCriticalValue(f"critical value {k} is infinite")
    endpoint = (frame.b0 - frame.binf) / 2.0
    z = frame.critical_value
    direct = -frame.schiffer / 12.0 - 0.25 * z.conjugate() / (1.0 + abs(z) ** 2)
    if abs(endpoint - direct) > 1e-12 * max(1.0, abs(direct)):
        raise ArithmeticError("variational routes disagree")
    return endpoint
