"""Genus-0 tau function along paths in the space of rational maps.

``d log|tau|^2 = 2 Re sum_k omega_k dz_k`` with ``omega_k = -S_k / 12``,
where ``S_k`` is the Schwarzian of the cover coordinate in the
distinguished parameter at the ``k``-th critical point and ``z_k`` is the
corresponding critical value.  Along a coefficient curve ``t -> f_t`` the
critical values move with ``dz_k/dt = (d/dt f_t)(w_k)`` because
``f_t'(w_k) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import numpy.polynomial.polynomial as P

from .errors import (CoincidentValues, CollisionDetected, ConfigError,
                     InfiniteCriticalValue, TrackingLost)
from .local_frame import schiffer_at_critical
from .rational_map import (CriticalData, RationalMap, TargetRotation, chordal,
                           critical_data, is_inf, point_from_json)

COLLISION_MARGIN = 0.05
GAUSS_ORDER = 8

Curve = Callable[[float], tuple]


def one_form(fmap: RationalMap, data: CriticalData | None = None) -> np.ndarray:
    """Components ``-S_k / 12`` in critical-point order."""
    if data is None:
        data = critical_data(fmap)
    return np.array([-schiffer_at_critical(fmap, data, k).schiffer / 12.0
                     for k in range(data.count)])


def tau2_n2(z1: complex, z2: complex) -> float:
    """``log|tau|^2 = (1/2) log|z1 - z2|`` for degree two."""
    d = abs(complex(z1) - complex(z2))
    if d == 0:
        raise CoincidentValues("critical values coincide")
    return 0.5 * float(np.log(d))


def _pad(c, n):
    out = np.zeros(n, dtype=complex)
    out[: len(c)] = c
    return out


def _value_rate(Pc, Qc, dP, dQ, w) -> tuple[complex, complex]:
    """``(P/Q)(w)`` and its ``t``-derivative; ``w`` may be ``INF``."""
    n = max(len(Pc), len(Qc), len(dP), len(dQ))
    Pc, Qc, dP, dQ = (_pad(c, n) for c in (Pc, Qc, dP, dQ))
    if is_inf(w):
        p, q, dp, dq = Pc[-1], Qc[-1], dP[-1], dQ[-1]
    else:
        p, q, dp, dq = (P.polyval(w, c) for c in (Pc, Qc, dP, dQ))
    if q == 0:
        raise InfiniteCriticalValue("critical value at infinity along the path")
    return p / q, (dp * q - p * dq) / q ** 2


@dataclass
class PathSample:
    t: float
    values: np.ndarray
    omega: np.ndarray
    rates: np.ndarray

    @property
    def integrand(self) -> float:
        return float(2.0 * np.real(np.sum(self.omega * self.rates)))


@dataclass
class ModuliPath:
    """Coefficient curve ``t in [0, 1] -> (P_t, Q_t, dP/dt, dQ/dt)``.

    ``breaks`` are parameter values where the curve may fail to be smooth
    (polyline vertices); quadrature panels never straddle them.
    """

    curve: Curve
    breaks: tuple = (0.0, 1.0)
    samples: int = 4
    margin: float = COLLISION_MARGIN
    descriptor: dict = field(default_factory=dict)

    def map_at(self, t: float) -> RationalMap:
        Pc, Qc, _, _ = self.curve(t)
        return RationalMap(np.asarray(Pc, complex), np.asarray(Qc, complex))

    # -------------------------------------------------------- constructors
    @classmethod
    def degree2(cls, nodes, samples: int = 4, margin: float = COLLISION_MARGIN) -> "ModuliPath":
        """Polyline through ``(z1, z2)`` nodes in the degree-two family."""
        nodes = np.array([[complex(a), complex(b)] for a, b in nodes])
        if len(nodes) < 2:
            raise ConfigError("a path needs at least two nodes")
        seg = len(nodes) - 1

        def coeffs(z1, z2):
            k = (z2 - z1) / 4
            return np.array([k, (z1 + z2) / 2, k]), np.array([0, 1], dtype=complex)

        def curve(t):
            i = min(int(t * seg), seg - 1)
            s = t * seg - i
            a, b = nodes[i], nodes[i + 1]
            z = a + s * (b - a)
            dz = (b - a) * seg
            Pc, Qc = coeffs(*z)
            dk = (dz[1] - dz[0]) / 4
            return Pc, Qc, np.array([dk, (dz[0] + dz[1]) / 2, dk]), np.zeros(2, complex)

        desc = {"family": "degree2", "nodes": [[[z.real, z.imag] for z in n] for n in nodes],
                "samples": samples}
        return cls(curve, tuple(np.linspace(0, 1, seg + 1)), samples, margin, desc)

    @classmethod
    def degree2_circle(cls, z1: complex, center: complex, radius: float, samples: int = 8,
                       margin: float = COLLISION_MARGIN) -> "ModuliPath":
        """Closed loop: ``z1`` fixed, ``z2 = center + radius exp(2 pi i t)``."""
        z1 = complex(z1)

        def curve(t):
            e = np.exp(2j * np.pi * t)
            z2 = center + radius * e
            dz2 = 2j * np.pi * radius * e
            k = (z2 - z1) / 4
            return (np.array([k, (z1 + z2) / 2, k]), np.array([0, 1], dtype=complex),
                    np.array([dz2 / 4, dz2 / 2, dz2 / 4]), np.zeros(2, complex))

        desc = {"family": "degree2_circle", "z1": [z1.real, z1.imag],
                "center": [complex(center).real, complex(center).imag], "radius": radius,
                "samples": samples}
        return cls(curve, (0.0, 1.0), samples, margin, desc)

    @classmethod
    def coeff_curve(cls, maps, samples: int = 4, margin: float = COLLISION_MARGIN) -> "ModuliPath":
        """Polyline through rational maps, interpolating raw coefficients."""
        maps = list(maps)
        if len(maps) < 2:
            raise ConfigError("a path needs at least two nodes")
        n = max(max(len(m.numerator), len(m.denominator)) for m in maps)
        Ps = np.array([_pad(m.numerator, n) for m in maps])
        Qs = np.array([_pad(m.denominator, n) for m in maps])
        seg = len(maps) - 1

        def curve(t):
            i = min(int(t * seg), seg - 1)
            s = t * seg - i
            dP = (Ps[i + 1] - Ps[i]) * seg
            dQ = (Qs[i + 1] - Qs[i]) * seg
            return Ps[i] + s * dP / seg, Qs[i] + s * dQ / seg, dP, dQ

        desc = {"family": "coeff_curve", "nodes": [m.to_descriptor() for m in maps],
                "samples": samples}
        return cls(curve, tuple(np.linspace(0, 1, seg + 1)), samples, margin, desc)

    @classmethod
    def coeff_loop(cls, base: RationalMap, u: np.ndarray, v: np.ndarray, eps: float,
                   samples: int = 8, margin: float = COLLISION_MARGIN) -> "ModuliPath":
        """Closed loop ``num = base.num + eps (cos 2 pi t u + sin 2 pi t v)``."""
        p0 = np.asarray(base.numerator, complex)
        q0 = np.asarray(base.denominator, complex)
        u, v = np.asarray(u, complex), np.asarray(v, complex)

        def curve(t):
            c, s = np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)
            Pc = p0 + eps * (c * u + s * v)
            dP = eps * 2 * np.pi * (-s * u + c * v)
            return Pc, q0, dP, np.zeros_like(q0)

        desc = {"family": "coeff_loop", "base": base.to_descriptor(), "eps": eps,
                "samples": samples}
        return cls(curve, (0.0, 1.0), samples, margin, desc)

    @classmethod
    def su2_orbit(cls, base: RationalMap, axis, angle: float, samples: int = 4,
                  margin: float = COLLISION_MARGIN) -> "ModuliPath":
        """``t -> R(axis, t angle) o base``: a pure target-rotation family."""
        n = np.asarray(axis, float)
        n = n / np.linalg.norm(n)
        p0 = np.asarray(base.numerator, complex)
        q0 = np.asarray(base.denominator, complex)
        size = max(len(p0), len(q0))
        p0, q0 = _pad(p0, size), _pad(q0, size)

        def ab(t):
            rot = TargetRotation.about_axis(n, t * angle)
            return rot.a, rot.b

        def curve(t):
            a, b = ab(t)
            da, db = _rotation_rates(n, angle, t)
            Pc = a * p0 + b * q0
            Qc = -np.conj(b) * p0 + np.conj(a) * q0
            dP = da * p0 + db * q0
            dQ = -np.conj(db) * p0 + np.conj(da) * q0
            return Pc, Qc, dP, dQ

        desc = {"family": "su2_orbit", "base": base.to_descriptor(), "axis": n.tolist(),
                "angle": angle, "samples": samples}
        return cls(curve, (0.0, 1.0), samples, margin, desc)

    @classmethod
    def from_descriptor(cls, desc: dict) -> "ModuliPath":
        fam = desc.get("family")
        samples = int(desc.get("samples", 4))
        margin = float(desc.get("margin", COLLISION_MARGIN))
        if fam == "degree2":
            nodes = [(point_from_json(a), point_from_json(b)) for a, b in desc["nodes"]]
            return cls.degree2(nodes, samples, margin)
        if fam == "degree2_circle":
            return cls.degree2_circle(point_from_json(desc["z1"]), point_from_json(desc["center"]),
                                      float(desc["radius"]), samples, margin)
        if fam == "coeff_curve":
            return cls.coeff_curve([RationalMap.from_descriptor(m) for m in desc["nodes"]],
                                   samples, margin)
        if fam == "su2_orbit":
            return cls.su2_orbit(RationalMap.from_descriptor(desc["base"]), desc["axis"],
                                 float(desc["angle"]), samples, margin)
        raise ConfigError(f"unknown path family {fam!r}")


def _rotation_rates(axis: np.ndarray, angle: float, t: float) -> tuple[complex, complex]:
    """``d/dt`` of the Cayley-Klein pair of ``TargetRotation.about_axis(axis, t angle)``."""
    # the pair is linear in (cos(theta/2), sin(theta/2)); differentiate exactly
    half = 0.5 * t * angle
    r0 = TargetRotation.about_axis(axis, 0.0)
    rq = TargetRotation.about_axis(axis, np.pi)  # cos = 0, sin = 1
    c, s = np.cos(half), np.sin(half)
    dc, ds = -s * 0.5 * angle, c * 0.5 * angle
    return r0.a * dc + rq.a * ds, r0.b * dc + rq.b * ds


def sample(path: ModuliPath, t: float) -> PathSample:
    Pc, Qc, dP, dQ = path.curve(t)
    fmap = RationalMap(np.asarray(Pc, complex), np.asarray(Qc, complex))
    data = critical_data(fmap)
    vals, rates = [], []
    for w in data.points:
        z, dz = _value_rate(Pc, Qc, dP, dQ, w)
        vals.append(z)
        rates.append(dz)
    vals = np.array(vals)
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            if chordal(vals[i], vals[j]) < path.margin:
                raise CollisionDetected(
                    f"critical values {vals[i]:.4g} and {vals[j]:.4g} closer than {path.margin} at t={t:.6g}")
    return PathSample(t, vals, one_form(fmap, data), np.array(rates))


def _track(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Permutation of ``cur`` matching ``prev`` by nearest neighbours."""
    d = np.abs(prev[:, None] - cur[None, :])
    perm = np.argmin(d, axis=1)
    if len(set(perm.tolist())) != len(perm):
        raise TrackingLost("critical values cannot be matched between samples")
    sep = min((abs(a - b) for i, a in enumerate(prev) for b in prev[i + 1:]), default=np.inf)
    if np.max(d[np.arange(len(prev)), perm]) > 0.5 * sep:
        raise TrackingLost("critical values moved farther than half their separation")
    return perm


@dataclass
class TauResult:
    delta_log_tau2: float
    rhs_delta: float | None
    panels: int
    start_values: list
    end_values: list
    ledger: list = field(default_factory=list)

    def to_json(self) -> dict:
        enc = lambda zs: [[complex(z).real, complex(z).imag] for z in zs]
        return {"delta_log_tau2": self.delta_log_tau2, "rhs_delta": self.rhs_delta,
                "panels": self.panels, "start_values": enc(self.start_values),
                "end_values": enc(self.end_values), "ledger": self.ledger}


def _panel_integral(path: ModuliPath, a: float, b: float, nodes, weights):
    ts = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    smp = [sample(path, t) for t in ts]
    return 0.5 * (b - a) * sum(w * s.integrand for w, s in zip(weights, smp)), smp


def integrate_log_tau2(path: ModuliPath, tol: float = 1e-8, max_refine: int = 8) -> TauResult:
    """Change of ``log|tau|^2`` along ``path`` by composite Gauss quadrature.

    Panels are doubled until two successive totals agree to ``tol``.
    Critical values are tracked across all samples for collision and
    continuity checks.
    """
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    panels = max(1, path.samples)
    prev_total = None
    for _ in range(max_refine):
        edges = []
        for a, b in zip(path.breaks[:-1], path.breaks[1:]):
            edges.extend(np.linspace(a, b, panels + 1)[:-1])
        edges.append(path.breaks[-1])
        total, samples = 0.0, []
        for a, b in zip(edges[:-1], edges[1:]):
            val, smp = _panel_integral(path, a, b, nodes, weights)
            total += val
            samples.extend(smp)
        if prev_total is not None and abs(total - prev_total) <= tol * max(1.0, abs(total)):
            break
        prev_total = total
        panels *= 2
    start = sample(path, path.breaks[0])
    end = sample(path, path.breaks[-1])
    track = start.values
    for s in samples + [end]:
        track = s.values[_track(track, s.values)]
    ledger = [{"t": s.t, "integrand": s.integrand} for s in samples[:: max(1, GAUSS_ORDER)]]
    return TauResult(float(total), None, len(edges) - 1, list(start.values), list(track), ledger)


def rhs_teorema_delta(path: ModuliPath, tol: float = 1e-8) -> TauResult:
    """Change of ``log|tau|^2 - (1/4) sum_k log(1 + |z_k|^2)`` along ``path``."""
    res = integrate_log_tau2(path, tol)
    area_term = lambda zs: 0.25 * sum(np.log1p(abs(z) ** 2) for z in zs)
    res.rhs_delta = float(res.delta_log_tau2 - (area_term(res.end_values) - area_term(res.start_values)))
    return res


def value_jacobian(fmap: RationalMap, data: CriticalData | None = None) -> np.ndarray:
    """``dz_k / dp_j`` for the numerator coefficients ``p_j`` (all critical points finite)."""
    if data is None:
        data = critical_data(fmap)
    q = fmap.denominator
    rows = []
    for w in data.points:
        if is_inf(w):
            raise InfiniteCriticalValue("critical point at infinity; rotate the source first")
        rows.append(w ** np.arange(len(fmap.numerator)) / P.polyval(w, q))
    return np.array(rows)


def shift_value(fmap: RationalMap, k: int, h: complex, data: CriticalData | None = None) -> RationalMap:
    """Numerator change moving ``z_k`` by ``h`` and fixing the others to first order."""
    if data is None:
        data = critical_data(fmap)
    Jm = value_jacobian(fmap, data)
    if Jm.shape[0] != Jm.shape[1]:
        # use the leading square block of numerator coefficients
        Jm = Jm[:, : Jm.shape[0]]
    e = np.zeros(Jm.shape[0], complex)
    e[k] = h
    dp = np.linalg.solve(Jm, e)
    num = fmap.numerator.copy()
    num[: len(dp)] += dp
    return RationalMap(num, fmap.denominator.copy())
