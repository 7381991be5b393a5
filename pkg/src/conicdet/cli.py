"""Command-line front end: JSON config in, JSON report and CSV tables out.

Usage::

    conicdet --config run.json --out results/ [--threads 2] [--seed 7]

The config names a ``command`` and its parameters; every default that was
filled in is echoed in the report.  Exit codes: 0 when all verdicts pass,
2 when a verification verdict fails, 1 on configuration or numerical errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import local_frame, perturbation, rational_map, spectral, tau, zeta_det
from .errors import ConfigError, ConicDetError, DegenerateCritical, InvalidMap

SCHEMA_VERSION = "1.0"
EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

log = logging.getLogger("conicdet")

MAP_KEYS = ("map", "family", "z1", "z2", "numerator", "denominator")

DEFAULTS: dict[str, dict] = {
    "validate": {},
    "spectrum": {"L": 40, "J": None},
    "heat-fit": {"source": "galerkin", "L": 40, "nu_max": 200, "with_log_probe": True},
    "logdet": {"Ls": [40, 50], "method": "reference", "rtol": 1e-4},
    "schiffer": {},
    "tau": {"path": None, "tol": 1e-8, "closed_tol": 1e-7},
    "verify-eq0": {"configs": [[0, 1], [0, 2], [1, "2i"]], "Ls": [40, 50, 60], "tol": 2e-2},
    "verify-system": {"map": {"family": "tetrahedral", "shift": {"k": 0, "h": 0.4}},
                      "Ls": [40, 50], "h": 1e-3, "tol": 3e-2},
    "verify-perturbation": {"z1": 0, "z2": 1, "k": 0, "L": 40, "groups": 4, "h": [1e-3, 5e-4],
                            "tol": 1e-2, "zero_tol": 1e-6},
    "verify-su2": {"map": {"family": "degree2", "z1": 0, "z2": 1}, "axis": None, "angle": None,
                   "Ls": [40, 50], "count": 15, "factor": 2.0, "spectrum_rtol": 1e-4},
}


@dataclass
class RunConfig:
    command: str
    params: dict
    out: Path | None = None
    threads: int = 1
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict, out=None, threads: int = 1, seed: int | None = None) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        command = raw.get("command")
        if command not in DEFAULTS:
            raise ConfigError(f"unknown command {command!r}; expected one of {sorted(DEFAULTS)}")
        params = {k: v for k, v in raw.items() if k not in ("command", "seed", "threads")}
        allowed = set(DEFAULTS[command]) | set(MAP_KEYS)
        unknown = sorted(set(params) - allowed)
        if unknown:
            raise ConfigError(f"unknown keys for {command}: {unknown}")
        merged = dict(DEFAULTS[command])
        merged.update(params)
        if threads < 1:
            raise ConfigError("--threads must be positive")
        seed = int(raw.get("seed", 0) if seed is None else seed)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return cls(command, merged, Path(out) if out else None, threads, seed)

    def echo(self) -> dict:
        return {"command": self.command, "seed": self.seed, "threads": self.threads, **self.params}


@dataclass
class Report:
    command: str
    inputs: dict
    results: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    error: dict | None = None
    timing: dict = field(default_factory=dict)

    def verdict(self, name: str, value: float, tolerance: float, method: str,
                passed: bool | None = None) -> bool:
        ok = bool(value <= tolerance) if passed is None else bool(passed)
        self.verdicts.append({"name": name, "value": float(value), "tolerance": float(tolerance),
                              "method": method, "pass": ok})
        return ok

    @property
    def passed(self) -> bool:
        return self.error is None and all(v["pass"] for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_ERROR
        return EXIT_PASS if self.passed else EXIT_FAIL

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "command": self.command, "inputs": self.inputs,
                "results": self.results, "verdicts": self.verdicts, "passed": self.passed,
                "tables": self.tables, "error": self.error, "timing": self.timing}


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def _map_from(params: dict) -> rational_map.RationalMap:
    desc = params.get("map")
    if desc is None:
        desc = {k: params[k] for k in MAP_KEYS if k in params and k != "map"}
    if not desc:
        raise ConfigError("no map given: use 'map' or top-level 'family'/'numerator' keys")
    try:
        fmap = rational_map.RationalMap.from_descriptor(desc)
        shift = desc.get("shift")
        if shift is not None:
            # move one critical value along the linearized value map
            fmap = tau.shift_value(fmap, int(shift["k"]), _point(shift["h"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed map descriptor: {exc}") from exc
    return fmap


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _point(obj) -> complex:
    try:
        z = rational_map.point_from_json(obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read a complex number from {obj!r}") from exc
    if rational_map.is_inf(z):
        raise ConfigError("infinite critical values are not supported here")
    return complex(z)


def _write_csv(report: Report, out: Path | None, name: str, header: list, rows) -> None:
    if out is None:
        return
    path = out / name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    report.tables.append(name)


def _pool_map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, rep: Report) -> None:
    fmap = _map_from(cfg.params)
    data = rational_map.critical_data(fmap, strict=False)
    vr = rational_map.validate(fmap, data)
    rep.results.update(vr.to_json())
    rep.results["critical"] = data.to_json()
    if vr.verdict == "rejected":
        if not all(data.simple):
            raise DegenerateCritical("map has a non-simple critical point")
        raise InvalidMap("; ".join(vr.reasons))


def cmd_spectrum(cfg: RunConfig, rep: Report) -> None:
    fmap = _map_from(cfg.params)
    spec = spectral.solve(spectral.WeightField(fmap), int(cfg.params["L"]), J=cfg.params["J"],
                          vectors=False)
    rep.results.update({"L": spec.L, "values": spec.values.tolist(), "groups": spec.groups,
                        "reliable_count": int(np.sum(spec.reliable)), "ceiling": spec.ceiling})
    if cfg.out is not None:
        spec.to_csv(cfg.out / "spectrum.csv")
        rep.tables.append("spectrum.csv")


def cmd_heat_fit(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    if p["source"] == "exact":
        values = zeta_det.football_spectrum(float(p["nu_max"]))
    elif p["source"] == "galerkin":
        fmap = _map_from(p)
        values = spectral.solve(spectral.WeightField(fmap), int(p["L"]), vectors=False).reliable_values
    else:
        raise ConfigError("source must be 'exact' or 'galerkin'")
    model = zeta_det.fit_heat_coeffs(values, with_log_probe=bool(p["with_log_probe"]))
    rep.results["model"] = model.to_json()
    rep.results["count"] = int(len(values))
    lo, hi = model.t_range
    ts = np.geomspace(lo, hi, 40)
    rows = [(t, zeta_det.heat_trace(values, model.tail, t), float(model(t))) for t in ts]
    _write_csv(rep, cfg.out, "heat_trace.csv", ["t", "trace", "model"], rows)


def cmd_logdet(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    res = zeta_det.log_det_map(_map_from(p), Ls=p["Ls"], method=p["method"], rtol=float(p["rtol"]))
    rep.results.update(res.to_json())
    _write_csv(rep, cfg.out, "logdet_table.csv", ["L", "logdet", "uncertainty", "T", "count"],
               [(r["L"], r["logdet"], r["uncertainty"], r["T"], r["count"]) for r in res.L_table])


def cmd_schiffer(cfg: RunConfig, rep: Report) -> None:
    fmap = _map_from(cfg.params)
    data = rational_map.critical_data(fmap)
    rows, out = [], []
    for fr in local_frame.frames(fmap, data):
        entry = fr.to_json()
        entry["point"] = rational_map.point_to_json(data.points[fr.k])
        entry["value"] = rational_map.point_to_json(data.values[fr.k])
        if fr.binf is not None:
            rhs = local_frame.variational_rhs(fmap, data, fr.k, fr)
            entry["variational_rhs"] = _cplx(rhs)
        else:
            rhs = complex("nan")
            entry["variational_rhs"] = None
        out.append(entry)
        rows.append((fr.k, fr.schiffer.real, fr.schiffer.imag, rhs.real, rhs.imag))
    rep.results["critical"] = out
    rep.results["schiffer"] = [e["schiffer"] for e in out]
    rep.results["variational_rhs"] = [e["variational_rhs"] for e in out]
    _write_csv(rep, cfg.out, "schiffer.csv", ["k", "S_re", "S_im", "rhs_re", "rhs_im"], rows)


def cmd_tau(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    if not isinstance(p["path"], dict):
        raise ConfigError("tau needs a 'path' descriptor object")
    path = tau.ModuliPath.from_descriptor(p["path"])
    res = tau.rhs_teorema_delta(path, float(p["tol"]))
    rep.results.update(res.to_json())
    closed = np.allclose(res.start_values, res.end_values, atol=1e-12)
    rep.results["closed"] = bool(closed)
    if closed:
        rep.verdict("closed_loop_integral", abs(res.delta_log_tau2), float(p["closed_tol"]),
                    "composite Gauss-Legendre line integral")
    elif p["path"].get("family") == "degree2" and len(res.start_values) == 2:
        (a1, a2), (b1, b2) = res.start_values, res.end_values
        expected = tau.tau2_n2(b1, b2) - tau.tau2_n2(a1, a2)
        rep.results["closed_form_delta"] = float(expected)
        rep.verdict("closed_form_deviation", abs(res.delta_log_tau2 - expected),
                    float(p["tol"]), "line integral vs (1/2) log|z1 - z2|")
    _write_csv(rep, cfg.out, "tau_ledger.csv", ["t", "integrand"],
               [(e["t"], e["integrand"]) for e in res.ledger])


def cmd_verify_eq0(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    configs = [(_point(a), _point(b)) for a, b in p["configs"]]
    if len(configs) < 2:
        raise ConfigError("verify-eq0 needs at least two configurations")

    def run(zz):
        z1, z2 = zz
        res = zeta_det.log_det_map(rational_map.RationalMap.degree2(z1, z2), Ls=p["Ls"])
        closed = 0.5 * np.log(abs(z1 - z2)) - 0.25 * np.log1p(abs(z1) ** 2) - 0.25 * np.log1p(abs(z2) ** 2)
        return res, float(closed)

    outs = _pool_map(run, configs, cfg.threads)
    consts = np.array([r.logdet - c for r, c in outs])
    dev = float(np.max(np.abs(consts - consts.mean())))
    rep.results["constant_mean"] = float(consts.mean())
    rep.results["entries"] = [{"z1": _cplx(z1), "z2": _cplx(z2), "logdet": r.logdet,
                               "uncertainty": r.uncertainty, "closed_part": c, "constant": r.logdet - c}
                              for (z1, z2), (r, c) in zip(configs, outs)]
    rep.verdict("max_deviation_from_mean", dev, float(p["tol"]), "reference heat trace, converged prefix")
    _write_csv(rep, cfg.out, "eq0.csv", ["z1_re", "z1_im", "z2_re", "z2_im", "logdet", "constant"],
               [(z1.real, z1.imag, z2.real, z2.imag, r.logdet, r.logdet - c)
                for (z1, z2), (r, c) in zip(configs, outs)])


def cmd_verify_system(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    fmap = _map_from(p)
    checks, base = zeta_det.log_det_gradient_fd(fmap, h=float(p["h"]), Ls=p["Ls"])
    rep.results["logdet"] = base.logdet
    rep.results["components"] = [c.to_json() for c in checks]
    for c in checks:
        rep.verdict(f"component_{c.k}_rel_error", c.rel_error, float(p["tol"]),
                    "central differences vs -S/12 - conj(z)/(4(1+|z|^2))")
    _write_csv(rep, cfg.out, "system.csv", ["k", "fd_re", "fd_im", "pred_re", "pred_im", "rel_error"],
               [(c.k, c.fd.real, c.fd.imag, c.predicted.real, c.predicted.imag, c.rel_error)
                for c in checks])


def cmd_verify_perturbation(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    z1, z2, k, L = _point(p["z1"]), _point(p["z2"]), int(p["k"]), int(p["L"])
    fmap = rational_map.RationalMap.degree2(z1, z2)
    data = rational_map.critical_data(fmap)
    wf = spectral.WeightField(fmap)
    ngroups = int(p["groups"])
    spec = spectral.solve(wf, L, J=4 * ngroups + 8)
    groups = [g for g in spec.groups if spec.values[g[0]] > 1e-9][:ngroups]
    cc = spectral.cone_coeffs(spec, wf, data, local_frame.frames(fmap, data), k)
    zk = complex(data.values[k])

    def family(dh):
        zs = [z1, z2]
        zs[k] = zs[k] + dh
        return rational_map.RationalMap.degree2(*zs)

    steps = [float(h) for h in p["h"]]
    fds = _pool_map(lambda h: perturbation.group_sum_derivatives(family, groups, L, h), steps, cfg.threads)
    entries, rows = [], []
    for gi, g in enumerate(groups):
        A, B = perturbation.group_derivative_prediction(cc, g, spec.groups)
        errs = []
        for h, fd in zip(steps, fds):
            err = abs(fd[gi].A - A)
            rel = err / abs(A) if abs(A) > float(p["zero_tol"]) else None
            errs.append((h, fd[gi].A, err, rel))
            rows.append((spec.values[g[0]], len(g), h, A.real, A.imag, fd[gi].A.real, fd[gi].A.imag,
                         rel if rel is not None else err))
        trivial = errs[0][3] is None
        entries.append({"lambda": float(spec.values[g[0]]), "indices": g, "A": _cplx(A), "B": _cplx(B),
                        "fd": [{"h": h, "A": _cplx(a), "abs_error": e, "rel_error": r}
                               for h, a, e, r in errs], "trivial": trivial})
        name = f"group_{g[0]}_lambda_{spec.values[g[0]]:.5f}"
        if trivial:
            rep.verdict(name + "_abs_error", max(e for _, _, e, _ in errs), float(p["zero_tol"]),
                        "vanishing prediction; absolute finite-difference check")
        else:
            rep.verdict(name + "_rel_error", max(r for _, _, _, r in errs), float(p["tol"]),
                        "A = 2 pi sum b_j^2 vs central differences of the group sum")
    rep.results.update({"critical_value": _cplx(zk), "L": L, "groups": entries})
    _write_csv(rep, cfg.out, "perturbation.csv",
               ["lambda", "multiplicity", "h", "A_re", "A_im", "fd_re", "fd_im", "error"], rows)


def cmd_verify_su2(cfg: RunConfig, rep: Report) -> None:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    axis = p["axis"] if p["axis"] is not None else rng.normal(size=3).tolist()
    angle = float(p["angle"]) if p["angle"] is not None else float(rng.uniform(0.3, 2.8))
    rep.inputs["axis_used"] = [float(a) for a in axis]
    rep.inputs["angle_used"] = angle
    fmap = _map_from(p)
    rot = rational_map.TargetRotation.about_axis(axis, angle)
    gmap = rational_map.rotate_target(fmap, rot)
    Ls = p["Ls"]
    count = int(p["count"])

    def run(m):
        wf = spectral.WeightField(m)
        spec = spectral.solve(wf, max(Ls), vectors=False)
        return spec.values[:count], zeta_det.log_det_map(m, Ls=Ls)

    (v1, d1), (v2, d2) = _pool_map(run, [fmap, gmap], cfg.threads)
    spec_dev = float(np.max(np.abs(v1 - v2) / np.maximum(np.abs(v1), 1.0)))
    det_dev = abs(d1.logdet - d2.logdet)
    det_tol = float(p["factor"]) * max(d1.uncertainty, d2.uncertainty, 1e-12)
    rep.results.update({"values": v1.tolist(), "values_rotated": v2.tolist(), "logdet": d1.logdet,
                        "logdet_rotated": d2.logdet, "uncertainty": [d1.uncertainty, d2.uncertainty],
                        "rotated_map": gmap.to_descriptor()})
    rep.verdict("spectrum_rel_deviation", spec_dev, float(p["spectrum_rtol"]), "Galerkin spectra")
    rep.verdict("logdet_deviation", det_dev, det_tol, "reference heat trace; tolerance = factor x uncertainty")
    _write_csv(rep, cfg.out, "su2_spectra.csv", ["index", "lambda", "lambda_rotated"],
               [(i, a, b) for i, (a, b) in enumerate(zip(v1, v2))])


COMMANDS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "heat-fit": cmd_heat_fit,
    "logdet": cmd_logdet,
    "schiffer": cmd_schiffer,
    "tau": cmd_tau,
    "verify-eq0": cmd_verify_eq0,
    "verify-system": cmd_verify_system,
    "verify-perturbation": cmd_verify_perturbation,
    "verify-su2": cmd_verify_su2,
}


def _origin(exc: BaseException) -> str:
    """Innermost package module in the traceback."""
    tb, name = exc.__traceback__, "unknown"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("conicdet"):
            name = mod
        tb = tb.tb_next
    return name


def run(cfg: RunConfig) -> Report:
    """Execute one config; numerical errors are captured in the report."""
    rep = Report(cfg.command, cfg.echo())
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        COMMANDS[cfg.command](cfg, rep)
    except ConicDetError as exc:
        rep.error = {"type": type(exc).__name__, "module": getattr(exc, "module", None)
                     or type(exc).__module__, "message": str(exc)}
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.exception("numerical failure in %s", cfg.command)
        rep.error = {"type": type(exc).__name__, "module": _origin(exc), "message": str(exc)}
    rep.timing["elapsed_s"] = time.perf_counter() - start
    if cfg.out is not None:
        with open(cfg.out / "report.json", "w") as fh:
            json.dump(rep.to_json(), fh, indent=2, default=str)
    return rep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conicdet", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="directory for report.json and CSV tables")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for batch items")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomized choices (u64)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = RunConfig.from_dict(raw, args.out, args.threads, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        err = {"type": type(exc).__name__, "module": "cli", "message": str(exc)}
        print(json.dumps({"schema_version": SCHEMA_VERSION, "error": err}), file=sys.stderr)
        return EXIT_ERROR
    rep = run(cfg)
    summary = {"command": rep.command, "passed": rep.passed, "error": rep.error,
               "verdicts": [(v["name"], v["pass"]) for v in rep.verdicts]}
    print(json.dumps(summary, default=str))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
