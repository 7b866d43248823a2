"""Lifespan sweeps, scaling-law fits and the ordinary differential
inequality (ODI) diagnostic along numerical solutions."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .solver import SimConfig, SolutionTrace, integrate
from .testfn import TestFunctionParams, phi_r, psi_r, verify_scale_average_bound

__all__ = [
    "LAWS",
    "FitError",
    "SweepConfig",
    "LifespanRecord",
    "FitResult",
    "OdiTrace",
    "linear_fit",
    "run_sweep",
    "fit_critical",
    "fit_power",
    "fit_subcritical",
    "subcritical_exponent",
    "odi_diagnostic",
    "records_to_csv",
    "read_records_csv",
    "export",
    "CSV_HEADER",
]

LAWS = ("critical_exp", "subcritical_power", "advection_power")
CSV_HEADER = ("epsilon", "p", "n", "T_num", "status", "dt", "N", "L", "M", "drift")


class FitError(ValueError):
    """Raised when the data cannot support a fit (too few points, narrow range)."""


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple
    base_sim: SimConfig
    law: str = "critical_exp"
    parallel_width: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if any(not e > 0 for e in eps):
            raise ValueError("epsilons must be positive")
        if any(a < b for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be sorted in descending order")
        if self.law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}; choose from {LAWS}")
        n, p = self.base_sim.grid.n, self.base_sim.p
        pc = (n + 1.0) / n
        if self.law == "critical_exp" and not math.isclose(p, pc, rel_tol=1e-12):
            raise ValueError(f"critical law needs p = (n+1)/n = {pc}, got {p}")
        if self.law == "subcritical_power" and not 1.0 < p < pc:
            raise ValueError(f"subcritical law needs 1 < p < {pc}, got {p}")
        if self.parallel_width < 1:
            raise ValueError("parallel_width must be >= 1")


@dataclass(frozen=True)
class LifespanRecord:
    epsilon: float
    T_num: float
    status: str
    dt: float
    N: int
    L: float
    threshold: float
    drift: float
    p: float
    n: int

    @property
    def resolved(self) -> bool:
        return self.status == "blew_up"

    def row(self) -> list[str]:
        return [
            repr(float(self.epsilon)), repr(float(self.p)), str(int(self.n)), repr(float(self.T_num)),
            self.status, repr(float(self.dt)), str(int(self.N)), repr(float(self.L)),
            repr(float(self.threshold)), repr(float(self.drift)),
        ]


@dataclass
class FitResult:
    model: str
    params: dict
    r2: float
    residuals: np.ndarray
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, dict):
                return {str(k): clean(w) for k, w in v.items()}
            if isinstance(v, (list, tuple, np.ndarray)):
                return [clean(w) for w in v]
            if isinstance(v, LifespanRecord):
                return dict(zip(CSV_HEADER, v.row()))
            if isinstance(v, (bool, np.bool_)):
                return bool(v)
            if isinstance(v, (int, np.integer)):
                return int(v)
            if isinstance(v, (float, np.floating)):
                v = float(v)
                return v if math.isfinite(v) else repr(v)
            return v

        return {
            "model": self.model,
            "params": clean(self.params),
            "r2": clean(self.r2),
            "residuals": clean(self.residuals),
            "details": clean(self.details),
        }


def linear_fit(x, y, model: str = "linear") -> FitResult:
    """Least squares y = offset + slope * x with R^2 and residuals."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        raise FitError("need at least two distinct abscissae")
    A = np.stack([np.ones_like(x), x], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(res**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return FitResult(model, {"offset": float(a), "slope": float(b)}, r2, res)


# ------------------------------------------------------------------ sweeps


def _one(args):
    base, eps = args
    _, res = integrate(replace(base, epsilon=eps, snapshot_stride=0))
    g = base.grid
    return LifespanRecord(
        epsilon=eps, T_num=float(res.T_num), status=res.status, dt=base.dt, N=g.N, L=g.L,
        threshold=base.threshold, drift=float(res.resolution_check), p=base.p, n=g.n,
    )


def run_sweep(config: SweepConfig) -> list[LifespanRecord]:
    """One record per epsilon, in the (descending) order of the config."""
    jobs = [(config.base_sim, e) for e in config.epsilons]
    if not jobs:
        return []
    if config.parallel_width > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.parallel_width, len(jobs))) as pool:
            return list(pool.map(_one, jobs))
    return [_one(j) for j in jobs]


# ------------------------------------------------------------------ fits


def _resolved(records: Iterable[LifespanRecord]) -> list[LifespanRecord]:
    good = [r for r in records if r.resolved and math.isfinite(r.T_num) and r.T_num > 0]
    if len(good) < 4:
        raise FitError(f"need at least 4 resolved records, got {len(good)}")
    eps = np.array([r.epsilon for r in good])
    if math.log10(eps.max() / eps.min()) < 1.0:
        raise FitError("epsilon range spans less than one decade")
    return sorted(good, key=lambda r: -r.epsilon)


def fit_power(records: Sequence[LifespanRecord], model: str = "power") -> FitResult:
    """log T = b + m log(epsilon)."""
    good = _resolved(records)
    eps = np.array([r.epsilon for r in good])
    T = np.array([r.T_num for r in good])
    fit = linear_fit(np.log(eps), np.log(T), model=model)
    fit.params["exponent"] = fit.params["slope"]
    fit.details["epsilons"] = eps
    return fit


def fit_critical(records: Sequence[LifespanRecord], n: int) -> FitResult:
    """Fit log T = a + C epsilon^(-1/n) and check the inflated envelope.

    The envelope offset a' = a + max residual bounds every record by
    construction; ``details["envelope_holds"]`` confirms it numerically.
    The power law log T = b + m log(epsilon) is fitted alongside and its
    R^2 reported for comparison.
    """
    good = _resolved(records)
    eps = np.array([r.epsilon for r in good])
    logT = np.log([r.T_num for r in good])
    x = eps ** (-1.0 / n)
    fit = linear_fit(x, logT, model="critical_exp")
    a, C = fit.params["offset"], fit.params["slope"]
    fit.params = {"C": C, "offset": a}
    a_env = a + float(max(0.0, np.max(fit.residuals)))
    envelope = a_env + C * x
    power = fit_power(good)
    fit.details.update(
        envelope_offset=a_env,
        envelope_holds=bool(np.all(logT <= envelope + 1e-12)),
        envelope_margin=float(np.min(envelope - logT)),
        power_slope=power.params["slope"],
        power_offset=power.params["offset"],
        power_r2=power.r2,
        critical_r2=fit.r2,
        epsilons=eps,
        x=x,
        logT=logT,
    )
    return fit


def subcritical_exponent(n: int, p: float) -> float:
    """Exponent 1/(n - 1/(p-1)) of the subcritical lifespan bound."""
    return 1.0 / (n - 1.0 / (p - 1.0))


def fit_subcritical(records: Sequence[LifespanRecord], n: int, p: float) -> FitResult:
    if not 1.0 < p < (n + 1.0) / n:
        raise ValueError(f"subcritical fit needs 1 < p < {(n + 1.0) / n}, got {p}")
    fit = fit_power(records, model="subcritical_power")
    expected = subcritical_exponent(n, p)
    fit.details["expected_exponent"] = expected
    fit.details["exponent_error"] = abs(fit.params["slope"] - expected)
    return fit


# ------------------------------------------------------------------ ODI diagnostic


@dataclass
class OdiTrace:
    """y(r), Y(R), Y'(R) along a numerical solution.

    ``C`` is the least constant with eps + Y <= C ((R+1) Y')^(n/(n+1)) on
    the grid (points with Y' <= 0 are excluded and counted).
    """

    r: np.ndarray
    y: np.ndarray
    Y: np.ndarray
    Yprime: np.ndarray
    C: float
    epsilon: float
    n: int
    excluded: int = 0
    closing_bound: np.ndarray | None = None
    closing_holds: bool = True
    fubini_Y: float = float("nan")
    fubini_rel_diff: float = float("nan")
    fubini_tol: float = 1e-2
    scale_average_constant: float = float("nan")
    scale_average_grid_constant: float = float("nan")
    scale_average_within_ceiling: bool | None = None
    details: dict = field(default_factory=dict)

    @property
    def fubini_ok(self) -> bool:
        return bool(self.fubini_rel_diff <= self.fubini_tol) if math.isfinite(self.fubini_rel_diff) else self.Y[-1] == 0

    def as_columns(self) -> np.ndarray:
        return np.stack([self.r, self.y, self.Y, self.Yprime], axis=1)


def default_r_grid(T: float, points: int = 64, fraction: float = 0.9) -> np.ndarray:
    """Grid uniform in log(r+1) on [0, fraction*(T-1)]."""
    R = fraction * (T - 1.0)
    if not R > 0:
        raise ValueError(f"horizon {T} too short for the diagnostic (need T > 1)")
    return np.expm1(np.linspace(0.0, math.log1p(R), points))


def _subsample(times, max_count):
    idx = np.arange(times.size)
    if times.size <= max_count:
        return idx
    pick = np.unique(np.round(np.linspace(0, times.size - 1, max_count)).astype(int))
    return idx[pick]


def _trapezoid_weights(v: np.ndarray) -> np.ndarray:
    w = np.zeros_like(v)
    d = np.diff(v)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def odi_diagnostic(
    trace: SolutionTrace,
    params: TestFunctionParams | None = None,
    R_grid: Sequence[float] | None = None,
    epsilon: float | None = None,
    max_snapshots: int = 400,
    fubini_panels: int = 256,
    check_scale_average: bool = True,
) -> OdiTrace:
    """Evaluate the ODI machinery on a stored trace.

    y(r) = int_0^T int |u|^((n+1)/n) psi_r dx dt uses the trapezoid rule in
    time over the stored snapshots (subsampled to at most ``max_snapshots``)
    and the grid rule in space. Y(R) = int_0^R y/(r+1) dr is the trapezoid
    rule on ``R_grid`` and Y' its centered differences.  The Fubini check
    recomputes Y(R_max) by integrating psi_r/(r+1) in r first (composite
    Gauss-Legendre) at every space-time node.
    """
    g = trace.grid
    n = g.n
    if params is None:
        params = TestFunctionParams(n=n)
    eps = trace.epsilon if epsilon is None else float(epsilon)
    T = trace.horizon
    r = default_r_grid(T) if R_grid is None else np.asarray(R_grid, dtype=float)
    if r[0] != 0.0:
        r = np.concatenate([[0.0], r])
    if np.any(np.diff(r) <= 0) or r[-1] + 1.0 > T + 1e-12:
        raise ValueError(f"R grid must increase and stay below T - 1 = {T - 1.0}")
    if trace.snapshot_times.size < 2:
        raise ValueError("odi_diagnostic needs a trace with snapshots")

    idx = _subsample(trace.snapshot_times, max_snapshots)
    ts = trace.snapshot_times[idx]
    wt = _trapezoid_weights(ts)
    expo = (n + 1.0) / n
    x = np.stack(g.mesh(), axis=-1).reshape(-1, n)
    vol = g.cell_volume

    y = np.zeros_like(r)
    for t, w, j in zip(ts, wt, idx):
        if w == 0 or t >= r[-1] + 1.0:
            continue
        dens = (np.abs(trace.snapshots[j]) ** expo).reshape(-1)
        live = dens > 1e-16 * dens.max()
        if not np.any(live):
            continue
        xl, dl = x[live], dens[live]
        for k, rk in enumerate(r):
            if t < rk + 1.0:
                y[k] += w * vol * float(np.sum(dl * psi_r(t, xl, replace(params, r=float(rk)))))

    integrand = y / (r + 1.0)
    Y = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(r) * (integrand[1:] + integrand[:-1]))])
    Yp = np.gradient(Y, r)

    ok = Yp > 0
    excluded = int(np.sum(~ok))
    if np.any(ok):
        ratios = (eps + Y[ok]) / ((r[ok] + 1.0) * Yp[ok]) ** (n / (n + 1.0))
        C = float(np.max(ratios))
    else:
        C = math.nan if eps > 0 else 0.0

    closing = None
    closing_holds = True
    if math.isfinite(C) and C > 0 and eps > 0:
        C2 = C ** (-(n + 1.0) / n) / n
        base = eps ** (-1.0 / n) - C2 * np.log1p(r)
        closing = np.where(base > 0, np.abs(base) ** (-n) - eps, np.inf)
        # discrete Y carries trapezoid error; allow a relative slack
        closing_holds = bool(np.all(Y >= closing * (1.0 - 1e-2) - 1e-14 * max(1.0, Y[-1])))

    out = OdiTrace(r=r, y=y, Y=Y, Yprime=Yp, C=C, epsilon=eps, n=n, excluded=excluded,
                   closing_bound=closing, closing_holds=closing_holds)
    out.details["exact_Yprime"] = integrand
    out.details["snapshots_used"] = int(ts.size)

    # r-first order of integration at R = r[-1]
    R = float(r[-1])
    if R > 0:
        nodes, weights = np.polynomial.legendre.leggauss(4)
        edges = np.expm1(np.linspace(0.0, math.log1p(R), fubini_panels + 1))
        lo, hi = edges[:-1], edges[1:]
        rq = ((0.5 * (lo + hi))[:, None] + (0.5 * (hi - lo))[:, None] * nodes).ravel()
        wq = ((0.5 * (hi - lo))[:, None] * weights).ravel()
        total = 0.0
        ratio_max = 0.0
        Rp = replace(params, r=R)
        for t, w, j in zip(ts, wt, idx):
            if w == 0 or t >= R + 1.0:
                continue
            dens = (np.abs(trace.snapshots[j]) ** expo).reshape(-1)
            live = dens > 1e-16 * dens.max()
            xl, dl = x[live], dens[live]
            K = np.zeros(xl.shape[0])
            for rk, wk in zip(rq, wq):
                if t < rk + 1.0:
                    K += wk * psi_r(t, xl, replace(params, r=float(rk))) / (rk + 1.0)
            total += w * vol * float(np.sum(dl * K))
            phR = phi_r(t, xl, Rp)
            pos = phR > 1e-12
            if np.any(pos):
                ratio_max = max(ratio_max, float(np.max(K[pos] / phR[pos])))
        out.fubini_Y = total
        scale = max(abs(total), abs(Y[-1]))
        out.fubini_rel_diff = abs(total - Y[-1]) / scale if scale > 0 else 0.0
        out.scale_average_grid_constant = ratio_max
        if check_scale_average:
            v = verify_scale_average_bound(R, n=n)
            out.scale_average_constant = v.fitted_constant
            out.scale_average_within_ceiling = v.details.get("within_ceiling")
            out.details["scale_average_verdict"] = v
    return out


# ------------------------------------------------------------------ export


def records_to_csv(records: Sequence[LifespanRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def read_records_csv(path) -> list[LifespanRecord]:
    """Inverse of :func:`records_to_csv`."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
    out = []
    for row in rows[1:]:
        d = dict(zip(CSV_HEADER, row))
        out.append(
            LifespanRecord(
                epsilon=float(d["epsilon"]), T_num=float(d["T_num"]), status=d["status"], dt=float(d["dt"]),
                N=int(d["N"]), L=float(d["L"]), threshold=float(d["M"]), drift=float(d["drift"]),
                p=float(d["p"]), n=int(d["n"]),
            )
        )
    return out


def _dat(x, y) -> str:
    return "".join(f"{float(a)!r} {float(b)!r}\n" for a, b in zip(x, y))


def export(records: Sequence[LifespanRecord], fits: dict, outdir, stem: str = "lifespan") -> list[str]:
    """Write ``<stem>.csv``, one ``<stem>_<law>.json`` per fit and
    two-column ``.dat`` files for plotting.  Returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(outdir, name)
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    put(f"{stem}.csv", records_to_csv(records))
    good = [r for r in records if r.resolved]
    if good:
        eps = np.array([r.epsilon for r in good])
        logT = np.log([r.T_num for r in good])
        put(f"{stem}_logeps_logT.dat", _dat(np.log(eps), logT))
        n = good[0].n
        put(f"{stem}_epsinv_logT.dat", _dat(eps ** (-1.0 / n), logT))
    for law in sorted(fits):
        put(f"{stem}_{law}.json", json.dumps(fits[law].to_dict(), sort_keys=True, indent=2) + "\n")
    return written
