"""Pseudospectral integrator for i u_t + (-Delta)^{1/2} u = |u|^p.

Written as u_t = i (-Delta)^{1/2} u - i |u|^p, the linear part is the
exact phase exp(i |xi| t) in Fourier space and the nonlinear part is
advanced by classical RK4 in the rotating frame (integrating-factor /
Lawson RK4).  Plane waves exp(i(kx + |k|t)) solve the linear flow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import GridSpec, ScalarField

__all__ = [
    "PROFILES",
    "SimConfig",
    "SolutionTrace",
    "BlowupResult",
    "make_initial_data",
    "propagate_linear",
    "integrate",
    "run",
    "weak_form_residual",
    "wave_residual",
]


def _gaussian(r2, n):
    return -1j * np.exp(-r2)


def _lorentzian(r2, n):
    return -1j * (1.0 + r2) ** (-(n + 1.0))


PROFILES: dict[str, Callable] = {"gaussian": _gaussian, "lorentzian": _lorentzian}


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    p: float
    epsilon: float
    profile_f: str = "gaussian"
    dt: float = 0.01
    T_max: float = 10.0
    threshold: float = 1e6
    snapshot_stride: int = 0
    nonlinear: bool = True
    dealias: bool = True
    # cap on dt * p * sup|u|^(p-1) once the solution grows
    growth_cfl: float = 0.05
    confirm: bool = True

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"nonlinearity power must exceed 1, got {self.p!r}")
        if self.epsilon < 0:
            raise ValueError(f"data amplitude must be nonnegative, got {self.epsilon!r}")
        if not (self.dt > 0 and self.T_max > 0):
            raise ValueError("dt and T_max must be positive")
        if self.profile_f not in PROFILES:
            raise ValueError(f"unknown profile {self.profile_f!r}; choose from {sorted(PROFILES)}")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be >= 0")

    def refined(self) -> "SimConfig":
        """Confirmation setting: twice the points per axis, half the step."""
        return replace(self, grid=self.grid.refined(), dt=self.dt / 2.0, growth_cfl=self.growth_cfl / 2.0)


@dataclass
class SolutionTrace:
    times: np.ndarray
    sup_norms: np.ndarray
    l2_norms: np.ndarray
    grid: GridSpec
    p: float
    epsilon: float
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: list = field(default_factory=list)
    u0: np.ndarray | None = None
    nonlinear: bool = True
    dealias: bool = False

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def snapshot_array(self) -> np.ndarray:
        return np.stack(self.snapshots) if self.snapshots else np.empty((0,) + self.grid.shape, complex)

    def truncated(self, T: float) -> "SolutionTrace":
        """Trace restricted to times <= T."""
        keep = self.times <= T
        skeep = self.snapshot_times <= T
        return replace(
            self,
            times=self.times[keep],
            sup_norms=self.sup_norms[keep],
            l2_norms=self.l2_norms[keep],
            snapshot_times=self.snapshot_times[skeep],
            snapshots=[s for s, k in zip(self.snapshots, skeep) if k],
        )


@dataclass
class BlowupResult:
    status: str  # "blew_up" | "survived_to_Tmax" | "unresolved"
    T_num: float
    resolution_check: float = float("nan")
    T_confirm: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "T_num": self.T_num,
            "resolution_check": self.resolution_check,
            "T_confirm": self.T_confirm,
        }


def make_initial_data(config: SimConfig) -> ScalarField:
    """u0 = epsilon * f with Re f = 0 and -Im f >= 0 on the grid."""
    g = config.grid
    f = PROFILES[config.profile_f](g.radius_squared(), g.n)
    if np.any(f.real != 0):
        raise ValueError(f"profile {config.profile_f!r} has a nonzero real part")
    if np.any(-f.imag < 0) or not g.integrate(-f.imag) > 0:
        raise ValueError(f"profile {config.profile_f!r} violates -Im f > 0")
    return ScalarField(g, config.epsilon * f)


def propagate_linear(u: ScalarField, t: float) -> ScalarField:
    """Exact linear flow exp(i t |xi|) applied to ``u``."""
    g = u.grid
    axes = tuple(range(g.n))
    return ScalarField(g, np.fft.ifftn(np.exp(1j * t * g.abs_xi) * np.fft.fftn(u.values, axes=axes), axes=axes))


class _Stepper:
    def __init__(self, grid: GridSpec, p: float, nonlinear: bool, dealias: bool):
        self.grid = grid
        self.p = p
        self.nonlinear = nonlinear
        self.axes = tuple(range(grid.n))
        self.abs_xi = grid.abs_xi
        self.mask = grid.dealias_mask() if dealias else None
        self._phase_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def fft(self, a):
        return np.fft.fftn(a, axes=self.axes)

    def ifft(self, a):
        return np.fft.ifftn(a, axes=self.axes)

    def phases(self, h):
        got = self._phase_cache.get(h)
        if got is None:
            got = (np.exp(1j * h * self.abs_xi), np.exp(0.5j * h * self.abs_xi))
            if len(self._phase_cache) < 4:
                self._phase_cache[h] = got
        return got

    def N(self, uh):
        u = self.ifft(uh)
        if self.p == 2.0:
            mod_p = (u.real**2 + u.imag**2)
        else:
            mod_p = np.abs(u) ** self.p
        out = self.fft(-1j * mod_p)
        if self.mask is not None:
            out *= self.mask
        return out

    def step(self, uh, h):
        E, E2 = self.phases(h)
        if not self.nonlinear:
            return E * uh
        k1 = self.N(uh)
        k2 = self.N(E2 * (uh + 0.5 * h * k1))
        k3 = self.N(E2 * uh + 0.5 * h * k2)
        k4 = self.N(E * uh + h * (E2 * k3))
        return E * uh + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)


def run(config: SimConfig, u0: ScalarField | None = None) -> tuple[SolutionTrace, BlowupResult]:
    """Single integration without the confirmation rerun."""
    g = config.grid
    if u0 is None:
        u0 = make_initial_data(config)
    stepper = _Stepper(g, config.p, config.nonlinear, config.dealias)
    uh = stepper.fft(u0.values)
    u = u0.values.copy()
    t = 0.0
    vol = g.cell_volume
    times, sups, l2s = [0.0], [float(np.max(np.abs(u)))], [math.sqrt(float(np.sum(np.abs(u) ** 2)) * vol)]
    snap_t, snaps = [], []
    stride = config.snapshot_stride
    if stride:
        snap_t.append(0.0)
        snaps.append(u.copy())
    status = "survived_to_Tmax"
    T_num = config.T_max
    k = 0
    eps_t = 1e-12 * config.T_max
    while t < config.T_max - eps_t:
        h = config.dt
        if config.nonlinear and sups[-1] > 0:
            h = min(h, config.growth_cfl / (config.p * sups[-1] ** (config.p - 1.0)))
        h = min(h, config.T_max - t)
        with np.errstate(over="ignore", invalid="ignore"):
            uh = stepper.step(uh, h)
            u = stepper.ifft(uh)
            sup = float(np.max(np.abs(u)))
        t += h
        k += 1
        if not math.isfinite(sup) or sup >= config.threshold:
            status = "blew_up"
            T_num = times[-1]
            break
        times.append(t)
        sups.append(sup)
        l2s.append(math.sqrt(float(np.sum(np.abs(u) ** 2)) * vol))
        if stride and k % stride == 0:
            snap_t.append(t)
            snaps.append(u.copy())
    trace = SolutionTrace(
        times=np.asarray(times),
        sup_norms=np.asarray(sups),
        l2_norms=np.asarray(l2s),
        grid=g,
        p=config.p,
        epsilon=config.epsilon,
        snapshot_times=np.asarray(snap_t),
        snapshots=snaps,
        u0=u0.values.copy(),
        nonlinear=config.nonlinear,
        dealias=config.dealias,
    )
    return trace, BlowupResult(status, T_num)


def integrate(config: SimConfig) -> tuple[SolutionTrace, BlowupResult]:
    """Integrate to T_max, the blowup threshold or a non-finite state.

    A run that crosses the threshold is repeated at (dt/2, 2N) when
    ``config.confirm`` is set; the relative change of T_num is recorded in
    ``resolution_check`` and a change above 5% downgrades the status to
    ``"unresolved"``.
    """
    trace, result = run(config)
    if result.status == "blew_up" and config.confirm:
        _, fine = run(replace(config.refined(), snapshot_stride=0))
        if fine.status == "blew_up":
            drift = abs(fine.T_num - result.T_num) / result.T_num
        else:
            drift = math.inf
        result.T_confirm = fine.T_num
        result.resolution_check = drift
        if drift > 0.05:
            result.status = "unresolved"
    return trace, result


# ------------------------------------------------------------------ diagnostics


def _time_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    if times.size > 1:
        dt = np.diff(times)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def weak_form_residual(trace: SolutionTrace, r: float, T: float | None = None, params=None) -> float:
    """|LHS - RHS| of the weak identity tested against phi_r.

    LHS = i int u0 phi_r(0) dx + int int |u|^p phi_r dx dt,
    RHS = int int u (-i d_t phi_r + (-Delta)^{1/2} phi_r) dx dt,
    with space integrals by the periodic trapezoid rule, the half Laplacian
    by the spectral engine and time integrals by the trapezoid rule over
    the stored snapshots.  Needs r + 1 <= T so that phi_r vanishes before
    the end of the trace.
    """
    from .fraclap import fraclap_spectral
    from .testfn import TestFunctionParams, dphi_r_dt, phi_r

    g = trace.grid
    if params is None:
        params = TestFunctionParams(n=g.n, r=r)
    else:
        params = replace(params, r=r)
    if T is None:
        T = trace.horizon
    if r + 1.0 > T + 1e-12:
        raise ValueError(f"phi_r is supported in t < {r + 1}, beyond the trace horizon {T}")
    if trace.snapshot_times.size < 2:
        raise ValueError("weak_form_residual needs a trace with snapshots")
    keep = trace.snapshot_times <= T + 1e-12
    ts = trace.snapshot_times[keep]
    us = [s for s, k in zip(trace.snapshots, keep) if k]
    wt = _time_weights(ts)
    xs = g.mesh()
    x = np.stack(xs, axis=-1)

    lhs = 1j * g.integrate(trace.u0 * phi_r(0.0, x, params))
    rhs = 0.0 + 0.0j
    for t, w, u in zip(ts, wt, us):
        if w == 0 or t >= r + 1.0:
            continue
        ph = phi_r(t, x, params)
        lap = fraclap_spectral(ScalarField(g, ph), 1.0).values.real
        if trace.nonlinear:
            lhs += w * g.integrate(np.abs(u) ** trace.p * ph)
        rhs += w * g.integrate(u * (-1j * dphi_r_dt(t, x, params) + lap))
    return float(abs(lhs - rhs))


def wave_residual(trace: SolutionTrace) -> float:
    """RMS over interior snapshots of the grid L2 norm of
    (d_t^2 - Delta) Im u + d_t(|u|^p), with three-point time differences.

    When the run was dealiased the source |u|^p is filtered the same way, so
    the residual measures the time discretization of the system actually
    integrated.
    """
    ts = trace.snapshot_times
    if ts.size < 3:
        raise ValueError("wave_residual needs at least three snapshots")
    g = trace.grid
    axes = tuple(range(g.n))
    U = trace.snapshot_array()
    im = U.imag
    src = np.abs(U) ** trace.p if trace.nonlinear else np.zeros_like(im)
    if trace.nonlinear and trace.dealias:
        mask = g.dealias_mask()
        axes_b = tuple(a + 1 for a in axes)
        src = np.fft.ifftn(mask * np.fft.fftn(src, axes=axes_b), axes=axes_b).real
    out = []
    for j in range(1, ts.size - 1):
        h1, h2 = ts[j] - ts[j - 1], ts[j + 1] - ts[j]
        d2 = 2.0 * (h1 * im[j + 1] - (h1 + h2) * im[j] + h2 * im[j - 1]) / (h1 * h2 * (h1 + h2))
        d1 = (
            -h2 / (h1 * (h1 + h2)) * src[j - 1]
            + (h2 - h1) / (h1 * h2) * src[j]
            + h1 / (h2 * (h1 + h2)) * src[j + 1]
        )
        lap = np.fft.ifftn(-(g.abs_xi**2) * np.fft.fftn(im[j], axes=axes), axes=axes).real
        res = d2 - lap + d1
        out.append(float(g.integrate(res**2)))
    return math.sqrt(float(np.mean(out)))
