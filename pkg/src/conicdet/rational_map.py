"""Rational maps of the Riemann sphere and their Hurwitz data.

A map ``f = p/q`` is stored with ascending complex coefficient arrays and
normalized so the leading coefficient of ``q`` equals one.  The point at
infinity is the singleton :data:`INF`; it is never encoded as an overflowed
float.  Local computations near ``w = INF`` (or near a point whose value is
``INF``) are done in the inverted chart ``1/w`` (resp. ``1/z``), and the chart
used is recorded alongside the result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateCritical, InvalidMap, RootFindingFailure


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
Point = Union[complex, _Infinity]

# charts: "w" is the affine coordinate, "inv" is 1/w (and likewise for z)
AFFINE, INVERTED = "w", "inv"


def is_inf(z) -> bool:
    return z is INF


def chordal(a: Point, b: Point) -> float:
    """Chordal distance on the unit sphere (diameter 2)."""
    if is_inf(a) and is_inf(b):
        return 0.0
    if is_inf(a):
        a, b = b, a
    if is_inf(b):
        return 2.0 / math.sqrt(1.0 + abs(a) ** 2)
    return 2.0 * abs(a - b) / math.sqrt((1.0 + abs(a) ** 2) * (1.0 + abs(b) ** 2))


def point_to_json(z: Point):
    if is_inf(z):
        return "inf"
    return [float(z.real), float(z.imag)]


def point_from_json(obj) -> Point:
    if isinstance(obj, str) and obj.lower() in ("inf", "infinity"):
        return INF
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, dict):
        return complex(obj.get("re", 0.0), obj.get("im", 0.0))
    if isinstance(obj, str):
        # accepts "1+2i" as well as Python's "1+2j"
        return complex(obj.replace(" ", "").replace("i", "j"))
    re, im = obj
    return complex(re, im)


def _trim(c: np.ndarray, rtol: float = 1e-14) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        return np.zeros(1, dtype=complex)
    n = c.size
    while n > 1 and abs(c[n - 1]) <= rtol * scale:
        n -= 1
    return c[:n].copy()


def _taylor_shift(c: np.ndarray, w0: complex) -> np.ndarray:
    """Coefficients of ``c(w0 + u)`` in ``u``."""
    out = np.zeros(len(c), dtype=complex)
    d = c.copy()
    fact = 1.0
    for k in range(len(c)):
        out[k] = P.polyval(w0, d) / fact
        d = P.polyder(d) if len(d) > 1 else np.zeros(1, dtype=complex)
        fact *= k + 1
    return out


def series_divide(num: np.ndarray, den: np.ndarray, order: int) -> np.ndarray:
    """Truncated power series quotient ``num/den`` through ``u**order``."""
    a = np.zeros(order + 1, dtype=complex)
    b = np.zeros(order + 1, dtype=complex)
    a[: min(len(num), order + 1)] = num[: order + 1]
    b[: min(len(den), order + 1)] = den[: order + 1]
    if b[0] == 0:
        raise ZeroDivisionError("series denominator vanishes at the origin")
    out = np.zeros(order + 1, dtype=complex)
    for n in range(order + 1):
        out[n] = (a[n] - np.dot(out[:n], b[n:0:-1])) / b[0]
    return out


@dataclass(frozen=True)
class RationalMap:
    numerator: np.ndarray
    denominator: np.ndarray

    def __post_init__(self):
        p = _trim(self.numerator)
        q = _trim(self.denominator)
        if not np.any(q):
            raise InvalidMap("zero denominator")
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise InvalidMap("non-finite coefficient")
        lead = q[-1]
        p, q = p / lead, q / lead
        object.__setattr__(self, "numerator", p)
        object.__setattr__(self, "denominator", q)
        if self.degree < 2:
            raise InvalidMap(f"degree {self.degree} < 2")
        if _share_root(p, q):
            raise InvalidMap("numerator and denominator share a root")

    @property
    def degree(self) -> int:
        return max(len(self.numerator), len(self.denominator)) - 1

    @classmethod
    def degree2(cls, z1: complex, z2: complex) -> "RationalMap":
        """``F(w) = (z1+z2)/2 + (z2-z1)/4 * (w + 1/w)``: critical values z1 at w=-1, z2 at w=1."""
        z1, z2 = complex(z1), complex(z2)
        k = (z2 - z1) / 4
        return cls(np.array([k, (z1 + z2) / 2, k]), np.array([0, 1], dtype=complex))

    @classmethod
    def football(cls) -> "RationalMap":
        """``w**2``: two antipodal cones over ``0`` and ``infinity``."""
        return cls(np.array([0, 0, 1], dtype=complex), np.array([1], dtype=complex))

    @classmethod
    def tetrahedral(cls) -> "RationalMap":
        """Degree-3 map ``w (w^2 - b)/(1 - b w^2)``, ``b = i sqrt(3)``.

        Its four critical values sit at the vertices of a regular tetrahedron.
        """
        b = 1j * np.sqrt(3.0)
        return cls(np.array([0, -b, 0, 1], dtype=complex), np.array([1, 0, -b], dtype=complex))

    @classmethod
    def from_descriptor(cls, desc: dict) -> "RationalMap":
        fam = desc.get("family")
        if fam == "degree2":
            return cls.degree2(point_from_json(desc["z1"]), point_from_json(desc["z2"]))
        if fam == "football":
            return cls.football()
        if fam == "tetrahedral":
            return cls.tetrahedral()
        if "family" in desc:
            raise InvalidMap(f"unknown map family {desc['family']!r}")
        try:
            num = [point_from_json(c) for c in desc["numerator"]]
            den = [point_from_json(c) for c in desc["denominator"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidMap(f"malformed map descriptor: {exc}") from exc
        return cls(np.array(num, dtype=complex), np.array(den, dtype=complex))

    def to_descriptor(self) -> dict:
        return {
            "numerator": [point_to_json(c) for c in self.numerator],
            "denominator": [point_to_json(c) for c in self.denominator],
        }

    def __call__(self, w):
        return evaluate(self, w).value

    def values(self, w: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at finite points (``nan`` never produced; poles give ``inf``)."""
        w = np.asarray(w, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return P.polyval(w, self.numerator) / P.polyval(w, self.denominator)

    def inverted_chart(self) -> tuple[np.ndarray, np.ndarray]:
        """Polynomials ``(pv, qv)`` with ``f(1/v) = pv(v)/qv(v)``."""
        p, q = self.numerator, self.denominator
        dp, dq = len(p) - 1, len(q) - 1
        pv, qv = p[::-1].copy(), q[::-1].copy()
        if dq > dp:
            pv = np.concatenate([np.zeros(dq - dp, dtype=complex), pv])
        elif dp > dq:
            qv = np.concatenate([np.zeros(dp - dq, dtype=complex), qv])
        return pv, qv

    def equals(self, other: "RationalMap", tol: float = 1e-10) -> bool:
        n = max(len(self.numerator), len(other.numerator))
        d = max(len(self.denominator), len(other.denominator))
        a = np.zeros(n, complex)
        b = np.zeros(n, complex)
        a[: len(self.numerator)] = self.numerator
        b[: len(other.numerator)] = other.numerator
        c = np.zeros(d, complex)
        e = np.zeros(d, complex)
        c[: len(self.denominator)] = self.denominator
        e[: len(other.denominator)] = other.denominator
        return bool(np.max(np.abs(a - b), initial=0) <= tol and np.max(np.abs(c - e), initial=0) <= tol)


def _share_root(p: np.ndarray, q: np.ndarray) -> bool:
    if len(q) < 2 or len(p) < 2:
        return False
    roots = np.roots(q[::-1])
    pscale = np.sum(np.abs(p))
    for r in roots:
        s = max(1.0, abs(r)) ** (len(p) - 1)
        if abs(P.polyval(r, p)) <= 1e-10 * pscale * s:
            return True
    return False


class Evaluation(NamedTuple):
    value: Point
    derivative: Point
    chart: str


def _eval_affine(fmap: RationalMap, w: complex) -> Evaluation:
    p, q = fmap.numerator, fmap.denominator
    pw, qw = P.polyval(w, p), P.polyval(w, q)
    dp, dq = P.polyval(w, P.polyder(p)), P.polyval(w, P.polyder(q))
    scale = np.sum(np.abs(q) * np.abs(w) ** np.arange(len(q)))
    if abs(qw) <= 1e-15 * scale:
        return Evaluation(INF, INF, AFFINE)
    return Evaluation(complex(pw / qw), complex((dp * qw - pw * dq) / qw**2), AFFINE)


def _eval_inverted(fmap: RationalMap, w) -> Evaluation:
    pv, qv = fmap.inverted_chart()
    v = 0j if is_inf(w) else 1.0 / complex(w)
    pw, qw = P.polyval(v, pv), P.polyval(v, qv)
    dpv, dqv = P.polyval(v, P.polyder(pv)), P.polyval(v, P.polyder(qv))
    scale = np.sum(np.abs(qv) * abs(v) ** np.arange(len(qv)))
    if abs(qw) <= 1e-15 * scale:
        return Evaluation(INF, INF, INVERTED)
    val = complex(pw / qw)
    dfdv = (dpv * qw - pw * dqv) / qw**2
    if is_inf(w):
        # df/dw = -v^2 df/dv -> 0 at a finite value
        return Evaluation(val, 0j, INVERTED)
    return Evaluation(val, complex(-(v**2) * dfdv), INVERTED)


def evaluate(fmap: RationalMap, w: Point, chart: str | None = None) -> Evaluation:
    """Value and affine derivative ``df/dw`` at ``w``.

    The ``1/w`` chart is used when ``|w| > 1`` unless ``chart`` forces one.
    """
    if is_inf(w):
        return _eval_inverted(fmap, w)
    w = complex(w)
    if chart is None:
        chart = INVERTED if abs(w) > 1 else AFFINE
    if chart == INVERTED and w != 0:
        return _eval_inverted(fmap, w)
    return _eval_affine(fmap, w)


@dataclass(frozen=True)
class CriticalData:
    """Critical points of a map with local Taylor data.

    ``taylor[k, n]`` is the coefficient of ``u**n`` in the expansion of the
    map near point ``k`` minus its critical value, where ``u`` is the local
    source coordinate (``w - w_k``, or ``1/w`` at ``w_k = INF``) and the value
    is taken in the target chart recorded in ``charts[k][1]``.
    """

    points: list
    values: list
    taylor: np.ndarray
    charts: list
    simple: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def c2(self) -> np.ndarray:
        return self.taylor[:, 2]

    @property
    def c3(self) -> np.ndarray:
        return self.taylor[:, 3]

    @property
    def c4(self) -> np.ndarray:
        return self.taylor[:, 4]

    def to_json(self) -> dict:
        return {
            "points": [point_to_json(p) for p in self.points],
            "values": [point_to_json(v) for v in self.values],
            "c2": [point_to_json(c) for c in self.c2],
            "c3": [point_to_json(c) for c in self.c3],
            "c4": [point_to_json(c) for c in self.c4],
            "charts": [list(c) for c in self.charts],
            "simple": list(self.simple),
        }


TAYLOR_ORDER = 7


def _local_taylor(num: np.ndarray, den: np.ndarray, w0: complex, order: int = TAYLOR_ORDER):
    """Taylor data of ``num/den`` at ``w0`` minus its value, with the target chart used."""
    ps = _taylor_shift(num, w0)
    qs = _taylor_shift(den, w0)
    scale = np.sum(np.abs(den) * max(1.0, abs(w0)) ** np.arange(len(den)))
    if abs(qs[0]) > 1e-12 * scale:
        series = series_divide(ps, qs, order)
        value = complex(series[0])
        series[0] = 0
        return value, AFFINE, series
    series = series_divide(qs, ps, order)
    series[0] = 0
    return INF, INVERTED, series


def _sort_key(w):
    if is_inf(w):
        return (1, 0.0, 0.0)
    return (0, round(w.real, 9), round(w.imag, 9))


def critical_data(fmap: RationalMap, tol: float = 1e-8, strict: bool = True) -> CriticalData:
    """Critical points, critical values and local Taylor coefficients.

    Critical points are the zeros of the Wronskian ``p'q - pq'`` (companion
    eigenvalues, Newton polished); the degree deficit of the Wronskian gives
    the multiplicity of ``INF`` as a critical point.  With ``strict`` a
    non-simple critical point raises :class:`DegenerateCritical`; otherwise
    it is reported through ``simple``.
    """
    p, q = fmap.numerator, fmap.denominator
    N = fmap.degree
    wr = _trim(P.polysub(P.polymul(P.polyder(p), q), P.polymul(p, P.polyder(q))), 1e-12)
    total = 2 * N - 2
    deg = len(wr) - 1
    at_inf = total - deg
    roots = np.roots(wr[::-1]) if deg > 0 else np.array([], dtype=complex)
    dwr = P.polyder(wr)
    polished = []
    for r in roots:
        r = complex(r)
        for _ in range(50):
            d = P.polyval(r, dwr)
            if d == 0:
                break
            step = P.polyval(r, wr) / d
            r -= step
            if abs(step) <= 1e-15 * max(1.0, abs(r)):
                break
        resid = abs(P.polyval(r, wr)) / (np.sum(np.abs(wr) * max(1.0, abs(r)) ** np.arange(len(wr))))
        if not np.isfinite(resid) or resid > tol:
            raise RootFindingFailure(f"Wronskian root {r} polished only to residual {resid:.2e}")
        polished.append(complex(r))

    simple = [True] * len(polished)
    for i in range(len(polished)):
        for j in range(i + 1, len(polished)):
            if chordal(polished[i], polished[j]) < 1e-6:
                simple[i] = simple[j] = False
    points: list = list(polished)
    if at_inf > 0:
        points += [INF] * at_inf
        simple += [at_inf == 1] * at_inf

    pv, qv = fmap.inverted_chart()
    values, taylors, charts = [], [], []
    for w in points:
        if is_inf(w):
            val, tchart, series = _local_taylor(pv, qv, 0j)
            schart = INVERTED
        else:
            val, tchart, series = _local_taylor(p, q, w)
            schart = AFFINE
        values.append(val)
        taylors.append(series)
        charts.append((schart, tchart))

    taylor = np.array(taylors) if taylors else np.zeros((0, TAYLOR_ORDER + 1), complex)
    for k in range(len(points)):
        scale = max(1.0, np.max(np.abs(taylor[k, 2:])))
        if abs(taylor[k, 2]) < tol * scale:
            simple[k] = False
    if strict and not all(simple):
        bad = [points[k] for k in range(len(points)) if not simple[k]]
        raise DegenerateCritical(f"non-simple critical point(s) at {bad}")

    order = sorted(range(len(points)), key=lambda k: _sort_key(points[k]))
    return CriticalData(
        points=[points[k] for k in order],
        values=[values[k] for k in order],
        taylor=taylor[order] if len(order) else taylor,
        charts=[charts[k] for k in order],
        simple=[simple[k] for k in order],
    )


@dataclass
class ValidationReport:
    paper_standard: bool
    solver_admissible: bool
    critical_count: int
    expected_count: int
    reasons: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.paper_standard:
            return "paper-standard"
        if self.solver_admissible:
            return "solver-admissible"
        return "rejected"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "paper_standard": self.paper_standard,
            "solver_admissible": self.solver_admissible,
            "critical_count": self.critical_count,
            "expected_count": self.expected_count,
            "reasons": list(self.reasons),
        }


DISTINCT_TOL = 1e-8


def validate(fmap: RationalMap, data: CriticalData | None = None) -> ValidationReport:
    if data is None:
        data = critical_data(fmap, strict=False)
    reasons = []
    expected = 2 * fmap.degree - 2
    if data.count != expected:
        reasons.append(f"critical count {data.count} != 2N-2 = {expected}")
    simple = all(data.simple)
    if not simple:
        reasons.append("non-simple critical point")
    finite = not any(is_inf(v) for v in data.values)
    if not finite:
        reasons.append("critical value at infinity (pole is critical)")
    distinct = True
    for i in range(data.count):
        for j in range(i + 1, data.count):
            if chordal(data.values[i], data.values[j]) <= DISTINCT_TOL:
                distinct = False
    if not distinct:
        reasons.append("coincident critical values")
    admissible = simple and data.count == expected
    return ValidationReport(
        paper_standard=admissible and finite and distinct,
        solver_admissible=admissible,
        critical_count=data.count,
        expected_count=expected,
        reasons=reasons,
    )


@dataclass(frozen=True)
class TargetRotation:
    """The isometry ``z -> (a z + b) / (-conj(b) z + conj(a))`` of the round sphere."""

    a: complex
    b: complex

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-12:
            raise ValueError("rotation is not unitary: |a|^2 + |b|^2 != 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls) -> "TargetRotation":
        return cls(1.0, 0.0)

    @classmethod
    def about_axis(cls, axis, angle: float) -> "TargetRotation":
        """One-parameter subgroup ``exp(-i angle/2 n.sigma)`` for a unit 3-vector ``n``."""
        n = np.asarray(axis, dtype=float)
        n = n / np.linalg.norm(n)
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return cls(complex(c, -n[2] * s), complex(-n[1] * s, -n[0] * s))

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        return np.array([[a, b], [-b.conjugate(), a.conjugate()]])

    def __call__(self, z: Point) -> Point:
        a, b = self.a, self.b
        if is_inf(z):
            if b == 0:
                return INF
            return a / (-b.conjugate())
        den = -b.conjugate() * z + a.conjugate()
        if den == 0:
            return INF
        return (a * z + b) / den

    def compose(self, first: "TargetRotation") -> "TargetRotation":
        """``self o first``."""
        m = self.matrix @ first.matrix
        return TargetRotation(m[0, 0], m[0, 1])


def rotate_target(fmap: RationalMap, rot: TargetRotation) -> RationalMap:
    """``rot o f`` as a normalized map."""
    p, q = fmap.numerator, fmap.denominator
    n = max(len(p), len(q))
    pp = np.zeros(n, complex)
    qq = np.zeros(n, complex)
    pp[: len(p)] = p
    qq[: len(q)] = q
    return RationalMap(rot.a * pp + rot.b * qq, -rot.b.conjugate() * pp + rot.a.conjugate() * qq)
