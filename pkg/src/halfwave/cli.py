"""Command-line entry point.

Configuration is flat ``key=value`` text with dotted section prefixes
(``sim.dt=0.05``, ``sweep.epsilons=0.4,0.2,0.1``); ``#`` starts a comment.
``--set key=value`` overrides file values.  Exit codes: 0 success,
1 failed verification, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

__all__ = ["Command", "DEFAULTS", "UsageError", "load_config", "parse_args", "dispatch", "main"]

VERBS = ("verify-identities", "fraclap", "check-estimates", "simulate", "advection-oracle", "sweep", "fit", "odi")

DEFAULTS: dict[str, str] = {
    "sim.n": "1",
    "sim.L": "256",
    "sim.N": "4096",
    "sim.p": "2",
    "sim.epsilon": "0.2",
    "sim.profile": "gaussian",
    "sim.dt": "0.05",
    "sim.T_max": "400",
    "sim.threshold": "1e6",
    "sim.snapshot_stride": "0",
    "sim.growth_cfl": "0.05",
    "sim.dealias": "true",
    "sim.nonlinear": "true",
    "sim.confirm": "true",
    "sweep.epsilons": "0.4,0.2,0.1,0.05,0.025",
    "sweep.law": "critical_exp",
    "sweep.parallel_width": "1",
    "fit.records": "",
    "fit.law": "critical_exp",
    "odi.epsilon": "0.2",
    "odi.snapshot_stride": "4",
    "odi.r_points": "64",
    "odi.fraction": "0.9",
    "odi.max_snapshots": "400",
    "advection.p": "1.5,2",
    "advection.profiles": "sech2,gaussian,lorentzian",
    "advection.epsilon": "0.5",
    "advection.epsilons": "1,0.5,0.2,0.1,0.05,0.02",
    "advection.N": "1024",
    "advection.L": "64",
    "advection.dt": "0.01",
    "advection.tolerance": "0.02",
    "advection.slope_tolerance": "0.05",
    "fraclap.n": "1",
    "fraclap.sigma": "0.5",
    "fraclap.q": "2",
    "fraclap.t": "0",
    "fraclap.points": "0",
    "fraclap.rtol": "1e-8",
    "estimates.n": "1",
    "estimates.q": "0.5,1,2",
    "estimates.r": "1,10",
    "estimates.R": "10",
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Command:
    verb: str
    config_path: str | None
    output_dir: str
    overrides: tuple = ()
    quiet: bool = False
    n_max: int = 10


# ------------------------------------------------------------------ config


def _parse_pairs(lines, origin):
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{origin}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise UsageError(f"{origin}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path: str | None, overrides=()) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    if path is not None:
        if not os.path.isfile(path):
            raise UsageError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            cfg.update(_parse_pairs(fh.read().splitlines(), path))
    cfg.update(_parse_pairs(overrides, "--set"))
    return cfg


class _View:
    """Typed access to a flat config."""

    def __init__(self, cfg):
        self.cfg = cfg

    def _raw(self, key):
        return self.cfg[key]

    def str(self, key):
        return self._raw(key)

    def float(self, key):
        try:
            return float(self._raw(key))
        except ValueError:
            raise UsageError(f"{key}: expected a number, got {self._raw(key)!r}") from None

    def int(self, key):
        try:
            return int(self._raw(key))
        except ValueError:
            raise UsageError(f"{key}: expected an integer, got {self._raw(key)!r}") from None

    def bool(self, key):
        v = self._raw(key).lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {v!r}")

    def floats(self, key):
        text = self._raw(key).strip()
        if not text:
            return []
        try:
            return [float(v) for v in text.split(",")]
        except ValueError:
            raise UsageError(f"{key}: expected a comma list of numbers") from None

    def strs(self, key):
        return [v.strip() for v in self._raw(key).split(",") if v.strip()]


def _sim_config(v: _View, **changes):
    from .grid import GridSpec
    from .solver import SimConfig

    try:
        grid = GridSpec(v.int("sim.n"), v.float("sim.L"), v.int("sim.N"))
        kw = dict(
            grid=grid, p=v.float("sim.p"), epsilon=v.float("sim.epsilon"), profile_f=v.str("sim.profile"),
            dt=v.float("sim.dt"), T_max=v.float("sim.T_max"), threshold=v.float("sim.threshold"),
            snapshot_stride=v.int("sim.snapshot_stride"), growth_cfl=v.float("sim.growth_cfl"),
            dealias=v.bool("sim.dealias"), nonlinear=v.bool("sim.nonlinear"), confirm=v.bool("sim.confirm"),
        )
        kw.update(changes)
        return SimConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ------------------------------------------------------------------ output helpers


class _Out:
    def __init__(self, cmd: Command):
        self.dir = cmd.output_dir
        self.quiet = cmd.quiet

    def path(self, name):
        os.makedirs(self.dir, exist_ok=True)
        return os.path.join(self.dir, name)

    def text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def json(self, name, obj):
        self.text(name, json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n")

    def dat(self, name, x, y):
        self.text(name, "".join(f"{float(a)!r} {float(b)!r}\n" for a, b in zip(x, y)))

    def say(self, msg):
        if not self.quiet:
            print(msg)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


# ------------------------------------------------------------------ verbs


def _verify_identities(cmd, v, out):
    from .specfun import FracIdentityQuery, c0, c0_double_factorial, frac_power_at_origin
    from .fraclap import RadialProfile, fraclap_quadrature

    ok = True
    rows = []
    for n in range(1, cmd.n_max + 1):
        a, b = c0(n), c0_double_factorial(n)
        good = abs(a - b) <= 1e-12 * abs(b)
        ok &= good
        rows.append({"n": n, "gamma_form": a, "double_factorial_form": b, "abs_diff": abs(a - b), "ok": good})
        out.say(f"c0({n}) = {a:.15g}  double-factorial form {b:.15g}  {'ok' if good else 'FAIL'}")
    special = [
        {"n": 1, "value": c0(1), "expected": math.pi / 4},
        {"n": 2, "value": c0(2), "expected": 8.0 / (3.0 * math.pi)},
    ]
    for s in special:
        s["ok"] = abs(s["value"] - s["expected"]) <= 1e-12
        ok &= s["ok"]
    spots = []
    for n in (1, 2):
        for sigma in (0.25, 0.5, 0.75):
            q = n + 1.0
            exact = frac_power_at_origin(FracIdentityQuery(n, sigma, q))
            val = fraclap_quadrature(RadialProfile(q), np.zeros(n), sigma, rtol=1e-9)
            rel = abs(val - exact) / abs(exact)
            good = rel <= 1e-6
            ok &= good
            spots.append({"n": n, "sigma": sigma, "q": q, "closed_form": exact, "quadrature": val, "rel_err": rel, "ok": good})
            out.say(f"origin identity n={n} sigma={sigma} q={q}: rel err {rel:.2e}  {'ok' if good else 'FAIL'}")
    out.json("identities.json", {"c0": rows, "c0_special": special, "origin_identity": spots, "pass": bool(ok)})
    return 0 if ok else 1


def _fraclap(cmd, v, out):
    from .fraclap import QuadratureError, RadialProfile, fraclap_quadrature
    from .specfun import FracIdentityQuery, frac_power_at_origin

    n = v.int("fraclap.n")
    sigma, q, t = v.float("fraclap.sigma"), v.float("fraclap.q"), v.float("fraclap.t")
    try:
        prof = RadialProfile(q, t)
        points = [np.array([float(c) for c in s.split(",")]) for s in v.str("fraclap.points").split(";") if s.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    ok = True
    for x in points:
        if x.size != n:
            raise UsageError(f"point {x.tolist()} does not have {n} coordinates")
        row = {"x": x.tolist()}
        try:
            val, err = fraclap_quadrature(prof, x, sigma, scale=prof.width, rtol=v.float("fraclap.rtol"), full_output=True)
            row.update(value=val, error_estimate=err)
        except QuadratureError as exc:
            ok = False
            row.update(value=_num(exc.value), error_estimate=_num(exc.error), failed=True)
        if not np.any(x) and q > n:
            exact = frac_power_at_origin(FracIdentityQuery(n, sigma, q)) * prof.width ** (-q - 2.0 * sigma)
            row["closed_form"] = exact
        rows.append(row)
        out.say(f"x={x.tolist()}  value={row['value']}")
    out.json("fraclap.json", {"n": n, "sigma": sigma, "q": q, "t": t, "rows": rows})
    return 0 if ok else 1


def _check_estimates(cmd, v, out):
    from .testfn import verify_phi_bound, verify_scale_average_bound, verify_profile_decay, verify_shifted_profile_bound, verify_eta_bound

    n = v.int("estimates.n")
    verdicts = []
    for q in v.floats("estimates.q"):
        verdicts.append(verify_profile_decay(q, n=n))
        if n == 1:
            verdicts.append(verify_shifted_profile_bound(q, n=n))
    verdicts.append(verify_eta_bound(n=n))
    for r in v.floats("estimates.r"):
        verdicts.append(verify_phi_bound(r, n=n))
    verdicts.append(verify_scale_average_bound(v.float("estimates.R"), n=n))
    for vd in verdicts:
        out.say(f"{vd.estimate_id:<28s} C={vd.fitted_constant:.6g} drift={vd.refinement_drift:.2e} {'ok' if vd.passed else 'FAIL'}")
    out.json("estimates.json", [vd.to_dict() for vd in verdicts])
    return 0 if all(vd.passed for vd in verdicts) else 1


def _simulate(cmd, v, out):
    from .solver import integrate

    config = _sim_config(v)
    trace, res = integrate(config)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "sup_norm", "l2_norm"))
    for row in zip(trace.times, trace.sup_norms, trace.l2_norms):
        w.writerow([repr(float(c)) for c in row])
    out.text("trace.csv", buf.getvalue())
    out.dat("sup_norm.dat", trace.times, np.log(trace.sup_norms))
    report = {k: _num(val) if isinstance(val, float) else val for k, val in res.to_dict().items()}
    report["config"] = {k: val for k, val in v.cfg.items() if k.startswith("sim.")}
    out.json("simulate.json", report)
    out.say(f"{res.status}: T_num = {res.T_num:.6g} (confirmation drift {res.resolution_check:.3g})")
    return 0


def _advection(cmd, v, out):
    from .advection import AdvectionProblem, advection_scaling_check, exact_lifespan, integrate_advection
    from .grid import GridSpec
    from .lifespan import FitError

    try:
        grid = GridSpec(1, v.float("advection.L"), v.int("advection.N"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dt, eps = v.float("advection.dt"), v.float("advection.epsilon")
    tol, slope_tol = v.float("advection.tolerance"), v.float("advection.slope_tolerance")
    ok = True
    rows, scaling = [], []
    for p in v.floats("advection.p"):
        for prof in v.strs("advection.profiles"):
            try:
                prob = AdvectionProblem(p, eps, prof)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            res = integrate_advection(prob, grid, dt)
            T = exact_lifespan(prob)
            rel = abs(res.T_num / T - 1.0)
            good = res.status == "blew_up" and rel <= tol
            ok &= good
            rows.append({"p": p, "profile": prof, "T_exact": T, "T_num": res.T_num, "rel_err": rel,
                         "status": res.status, "drift": _num(res.resolution_check), "ok": good})
            out.say(f"p={p} {prof:<10s} T*={T:.6g} T_num={res.T_num:.6g} rel {rel:.2e} {'ok' if good else 'FAIL'}")
        try:
            fit = advection_scaling_check(p, v.strs("advection.profiles")[0], v.floats("advection.epsilons"), grid=grid)
        except FitError as exc:
            raise UsageError(str(exc)) from None
        recs = fit.details["records"]
        good = abs(fit.details["numeric_slope"] + (p - 1.0)) <= slope_tol
        ok &= good
        out.dat(f"advection_p{p:g}_logeps_logT.dat", [math.log(r.epsilon) for r in recs], [math.log(r.T_num) for r in recs])
        d = fit.to_dict()
        d["ok"] = good
        scaling.append(d)
        out.say(f"p={p} scaling slope {fit.details['numeric_slope']:.5f} (expected {-(p - 1.0):g}) {'ok' if good else 'FAIL'}")
    out.json("advection.json", {"lifespans": rows, "scaling": scaling, "pass": bool(ok)})
    return 0 if ok else 1


def _fits_for(records, law, n, p):
    from .lifespan import fit_critical, fit_power, fit_subcritical

    if law == "critical_exp":
        fit = fit_critical(records, n)
        return {"critical_exp": fit, "power": fit_power(records)}, fit.details["envelope_holds"]
    if law == "subcritical_power":
        return {"subcritical_power": fit_subcritical(records, n, p)}, True
    fit = fit_power(records, model="advection_power")
    fit.details["expected_slope"] = -(p - 1.0)
    return {"advection_power": fit}, True


def _report_fits(out, fits):
    for law in sorted(fits):
        f = fits[law]
        params = " ".join(f"{k}={val:.6g}" for k, val in sorted(f.params.items()))
        out.say(f"{law:<18s} {params} R2={f.r2:.6f}")


def _sweep(cmd, v, out):
    from .lifespan import FitError, SweepConfig, export, run_sweep

    base = _sim_config(v)
    try:
        sc = SweepConfig(tuple(v.floats("sweep.epsilons")), base, v.str("sweep.law"), v.int("sweep.parallel_width"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records = run_sweep(sc)
    for r in records:
        out.say(f"epsilon={r.epsilon:<8g} T_num={r.T_num:.6g} {r.status} drift={r.drift:.3g}")
    ok = True
    try:
        fits, ok = _fits_for(records, sc.law, base.grid.n, base.p)
    except FitError as exc:
        out.say(f"fit skipped: {exc}")
        fits, ok = {}, False
    export(records, fits, out.dir)
    _report_fits(out, fits)
    return 0 if ok else 1


def _fit(cmd, v, out):
    from .lifespan import FitError, export, read_records_csv

    path = v.str("fit.records") or os.path.join(cmd.output_dir, "lifespan.csv")
    if not os.path.isfile(path):
        raise UsageError(f"records file not found: {path}")
    records = read_records_csv(path)
    if not records:
        raise UsageError(f"{path}: no records")
    n, p = records[0].n, records[0].p
    law = v.str("fit.law")
    try:
        fits, ok = _fits_for(records, law, n, p)
    except FitError as exc:
        out.say(f"fit failed: {exc}")
        return 1
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    export(records, fits, out.dir, stem="fit")
    _report_fits(out, fits)
    return 0 if ok else 1


def _odi(cmd, v, out):
    from .lifespan import default_r_grid, odi_diagnostic
    from .solver import integrate

    config = _sim_config(v, epsilon=v.float("odi.epsilon"), snapshot_stride=v.int("odi.snapshot_stride"))
    if config.snapshot_stride < 1:
        raise UsageError("odi.snapshot_stride must be at least 1")
    trace, res = integrate(config)
    if res.status == "unresolved":
        out.say("run unresolved under refinement; diagnostic not evaluated")
        return 1
    T = res.T_num if res.status == "blew_up" else trace.horizon
    r = default_r_grid(T, v.int("odi.r_points"), v.float("odi.fraction"))
    odi = odi_diagnostic(trace, R_grid=r, max_snapshots=v.int("odi.max_snapshots"))
    checks = {
        "y_nonnegative": bool(np.all(odi.y >= 0)),
        "Y_starts_at_zero": bool(odi.Y[0] == 0.0),
        "Y_nondecreasing": bool(np.all(np.diff(odi.Y) >= 0)),
        "fubini_agreement": odi.fubini_ok,
        "C_finite": bool(math.isfinite(odi.C)),
        "closing_bound": odi.closing_holds,
    }
    if odi.scale_average_within_ceiling is not None:
        checks["scale_average_within_ceiling"] = bool(odi.scale_average_within_ceiling)
    out.dat("odi_y.dat", odi.r, odi.y)
    out.dat("odi_Y.dat", odi.r, odi.Y)
    out.json("odi.json", {
        "T_num": res.T_num, "status": res.status, "C": _num(odi.C), "excluded": odi.excluded,
        "fubini_Y": odi.fubini_Y, "fubini_rel_diff": odi.fubini_rel_diff, "scale_average_constant": _num(odi.scale_average_constant),
        "scale_average_grid_constant": _num(odi.scale_average_grid_constant), "checks": checks,
        "r": odi.r, "y": odi.y, "Y": odi.Y, "Yprime": odi.Yprime,
    })
    for k, val in checks.items():
        out.say(f"{k:<22s} {'ok' if val else 'FAIL'}")
    out.say(f"ODI constant C = {odi.C:.6g}; scale-average constant {odi.scale_average_constant:.6g}")
    return 0 if all(checks.values()) else 1


_HANDLERS = {
    "verify-identities": _verify_identities,
    "fraclap": _fraclap,
    "check-estimates": _check_estimates,
    "simulate": _simulate,
    "advection-oracle": _advection,
    "sweep": _sweep,
    "fit": _fit,
    "odi": _odi,
}


# ------------------------------------------------------------------ entry


def _parser():
    ap = argparse.ArgumentParser(prog="halfwave", description="Half-wave equation numerics.")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--output-dir", metavar="PATH", default="halfwave-out")
    ap.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides")
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--n-max", type=int, default=10)
    return ap


def parse_args(argv) -> Command:
    ns = _parser().parse_args(argv)
    if ns.n_max < 1:
        raise UsageError("--n-max must be positive")
    return Command(ns.verb, ns.config, ns.output_dir, tuple(ns.overrides), ns.quiet, ns.n_max)


def dispatch(argv) -> int:
    try:
        cmd = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(cmd.config_path, cmd.overrides)
        return _HANDLERS[cmd.verb](cmd, _View(cfg), _Out(cmd))
    except UsageError as exc:
        print(f"halfwave {cmd.verb}: {exc}", file=sys.stderr)
        _parser().print_usage(sys.stderr)
        return 2


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)
