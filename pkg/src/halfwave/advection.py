"""Semilinear advection w_t + w_x = w^p: closed-form solution and lifespan.

Along characteristics x - t = const the equation is the ODE w' = w^p, so

    w(t, x) = (w0(x - t)^(1-p) - (p-1) t)^(-1/(p-1)),
    T* = 1 / ((p-1) (sup w0)^(p-1)).

The numerical integrator (spectral shift + RK4 in the co-moving frame)
is only a cross-check of these formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import GridSpec
from .solver import BlowupResult

__all__ = [
    "ADVECTION_PROFILES",
    "AdvectionProblem",
    "exact_solution",
    "exact_solution_derivatives",
    "exact_lifespan",
    "integrate_advection",
    "advection_scaling_check",
]

# name -> (f, sup f)
ADVECTION_PROFILES: dict[str, tuple[Callable, float]] = {
    "sech2": (lambda x: 1.0 / np.cosh(x) ** 2, 1.0),
    "gaussian": (lambda x: np.exp(-np.asarray(x, dtype=float) ** 2), 1.0),
    "lorentzian": (lambda x: 1.0 / (1.0 + np.asarray(x, dtype=float) ** 2), 1.0),
    "constant": (lambda x: np.ones_like(np.asarray(x, dtype=float)), 1.0),
}


@dataclass(frozen=True)
class AdvectionProblem:
    p: float
    epsilon: float = 1.0
    profile: str = "sech2"
    shift: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.profile not in ADVECTION_PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")

    def w0(self, x):
        f, _ = ADVECTION_PROFILES[self.profile]
        return self.epsilon * f(np.asarray(x, dtype=float) - self.shift)

    def w0_prime(self, x):
        y = np.asarray(x, dtype=float) - self.shift
        if self.profile == "sech2":
            d = -2.0 * np.tanh(y) / np.cosh(y) ** 2
        elif self.profile == "gaussian":
            d = -2.0 * y * np.exp(-y * y)
        elif self.profile == "lorentzian":
            d = -2.0 * y / (1.0 + y * y) ** 2
        else:
            d = np.zeros_like(y)
        return self.epsilon * d

    @property
    def sup_w0(self) -> float:
        return self.epsilon * ADVECTION_PROFILES[self.profile][1]


def exact_lifespan(problem: AdvectionProblem) -> float:
    m = problem.sup_w0
    if m == 0:
        return math.inf
    return 1.0 / ((problem.p - 1.0) * m ** (problem.p - 1.0))


def exact_solution(problem: AdvectionProblem, t: float, x):
    """Closed-form solution at time ``t < T*``; zero where w0(x - t) = 0."""
    if t >= exact_lifespan(problem):
        raise ValueError(f"t={t} is at or beyond the blowup time {exact_lifespan(problem)}")
    p = problem.p
    a = np.asarray(problem.w0(np.asarray(x, dtype=float) - t), dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = (a[pos] ** (1.0 - p) - (p - 1.0) * t) ** (-1.0 / (p - 1.0))
    return out


def exact_solution_derivatives(problem: AdvectionProblem, t: float, x):
    """(w, w_t, w_x) from analytic differentiation of the closed form."""
    p = problem.p
    x = np.asarray(x, dtype=float)
    a = problem.w0(x - t)
    da = problem.w0_prime(x - t)
    base = a ** (1.0 - p) - (p - 1.0) * t
    w = base ** (-1.0 / (p - 1.0))
    dw_dbase = -1.0 / (p - 1.0) * base ** (-1.0 / (p - 1.0) - 1.0)
    # d base/dt = (1-p) a^{-p} (-da) - (p-1);  d base/dx = (1-p) a^{-p} da
    w_x = dw_dbase * (1.0 - p) * a ** (-p) * da
    w_t = dw_dbase * ((p - 1.0) * a ** (-p) * da - (p - 1.0))
    return w, w_t, w_x


def _run(problem, grid: GridSpec, dt, T_max, threshold, growth_cfl):
    x = grid.axis
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.N, d=grid.h)
    p = problem.p
    w = problem.w0(x).astype(float)
    wh = np.fft.rfft(w)
    sup = float(np.max(np.abs(w)))
    t = 0.0
    cache = {}

    def phases(h):
        if h not in cache:
            cache.clear()
            cache[h] = (np.exp(-1j * k * h), np.exp(-0.5j * k * h))
        return cache[h]

    def N(vh):
        v = np.fft.irfft(vh, n=grid.N)
        return np.fft.rfft(np.abs(v) ** p)

    while t < T_max:
        h = dt
        if sup > 0:
            h = min(h, growth_cfl / (p * sup ** (p - 1.0)))
        h = min(h, T_max - t)
        E, E2 = phases(h)
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = N(wh)
            k2 = N(E2 * (wh + 0.5 * h * k1))
            k3 = N(E2 * wh + 0.5 * h * k2)
            k4 = N(E * wh + h * (E2 * k3))
            wh_new = E * wh + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
            new_sup = float(np.max(np.abs(np.fft.irfft(wh_new, n=grid.N))))
        if not math.isfinite(new_sup) or new_sup >= threshold:
            return BlowupResult("blew_up", t)
        wh, sup = wh_new, new_sup
        t += h
    return BlowupResult("survived_to_Tmax", T_max)


def integrate_advection(
    problem: AdvectionProblem,
    grid: GridSpec,
    dt: float,
    T_max: float | None = None,
    threshold: float = 1e6,
    growth_cfl: float = 0.05,
    confirm: bool = True,
) -> BlowupResult:
    """Numerical blowup time on a periodic grid, confirmed at (dt/2, 2N).

    ``T_max`` defaults to twice the exact lifespan (or 100 when that is
    infinite).  The status becomes ``"unresolved"`` if the confirmation run
    moves T_num by more than 5%.
    """
    if grid.n != 1:
        raise ValueError("advection oracle is one dimensional")
    T_star = exact_lifespan(problem)
    if T_max is None:
        T_max = 2.0 * T_star if math.isfinite(T_star) else 100.0
    res = _run(problem, grid, dt, T_max, threshold, growth_cfl)
    if res.status == "blew_up" and confirm:
        fine = _run(problem, grid.refined(), dt / 2.0, T_max, threshold, growth_cfl / 2.0)
        res.T_confirm = fine.T_num
        res.resolution_check = abs(fine.T_num - res.T_num) / res.T_num if fine.status == "blew_up" else math.inf
        if res.resolution_check > 0.05:
            res.status = "unresolved"
    return res


def advection_scaling_check(
    p: float,
    profile: str,
    epsilons: Sequence[float],
    grid: GridSpec | None = None,
    dt: float | None = None,
    numeric: bool = True,
):
    """Regress log T against log epsilon for the exact and numerical lifespans.

    Returns a FitResult for the exact lifespans whose ``details`` carry the
    numerical slope, the expected slope -(p-1) and the per-epsilon records.
    """
    from .lifespan import FitError, LifespanRecord, linear_fit

    eps = np.asarray(sorted(epsilons, reverse=True), dtype=float)
    if eps.size < 5 or math.log10(eps.max() / eps.min()) < 1.5:
        raise FitError("need at least 5 epsilons spanning 1.5 decades")
    exact = np.array([exact_lifespan(AdvectionProblem(p, e, profile)) for e in eps])
    fit = linear_fit(np.log(eps), np.log(exact), model="advection_power")
    fit.details["expected_slope"] = -(p - 1.0)
    fit.details["slope_error"] = abs(fit.params["slope"] + (p - 1.0))
    if numeric:
        if grid is None:
            grid = GridSpec(1, 64.0, 2048)
        records = []
        for e, T_ex in zip(eps, exact):
            step = dt if dt is not None else min(0.05, T_ex / 400.0)
            res = integrate_advection(AdvectionProblem(p, e, profile), grid, step)
            records.append(
                LifespanRecord(
                    epsilon=float(e), T_num=res.T_num, status=res.status, dt=step, N=grid.N, L=grid.L,
                    threshold=1e6, drift=res.resolution_check, p=p, n=1,
                )
            )
        num = linear_fit(np.log(eps), np.log([r.T_num for r in records]), model="advection_power_numeric")
        fit.details["numeric_slope"] = num.params["slope"]
        fit.details["numeric_r2"] = num.r2
        fit.details["slope_agreement"] = abs(num.params["slope"] - fit.params["slope"])
        fit.details["records"] = records
        fit.details["max_rel_error"] = float(np.max(np.abs(np.array([r.T_num for r in records]) / exact - 1.0)))
    return fit
