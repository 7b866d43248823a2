"""Exact special-function values used as oracles throughout the package.

Gamma is evaluated with a Lanczos sum (Godfrey's g = 607/128 coefficient
set), which is good to a few ulps on the positive half line well beyond the
range the rest of the package needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "FracIdentityQuery",
    "gamma",
    "double_factorial",
    "c0",
    "c0_double_factorial",
    "half_ratio",
    "frac_power_at_origin",
]

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEFFS = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Gamma overflows a double just above this argument.
_GAMMA_MAX_ARG = 171.6


@dataclass(frozen=True)
class FracIdentityQuery:
    """Parameters of the closed form for (-Delta)^sigma (1+|x|^2)^(-q/2) at x = 0."""

    n: int
    sigma: float
    q: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n!r}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma!r}")
        if not self.q > self.n:
            raise ValueError(f"closed form needs q > n, got q={self.q!r}, n={self.n}")


def gamma(x: float) -> float:
    """Gamma function for real ``x > 0``.

    Raises
    ------
    ValueError
        If ``x <= 0`` or ``x`` is not finite.
    OverflowError
        If the result does not fit in a double.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"gamma is only defined here for finite x > 0, got {x!r}")
    if x > _GAMMA_MAX_ARG:
        raise OverflowError(f"gamma({x}) overflows a double")
    if x < 0.5:
        # shift up so the Lanczos sum is evaluated on its accurate range
        return gamma(x + 1.0) / x
    z = x - 1.0
    acc = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        acc += _LANCZOS_COEFFS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    # split the power so t**(z+1/2) cannot overflow before exp(-t) is applied
    half = t ** ((z + 0.5) / 2.0)
    return _SQRT_2PI * half * (half * math.exp(-t)) * acc


def _double_factorial_int(k: int) -> int:
    out = 1
    for j in range(k, 1, -2):
        out *= j
    return out


def double_factorial(k: int) -> float:
    """``k!!`` as a float, with ``0!! = 1``.

    Raises ``OverflowError`` instead of returning ``inf`` when the value is
    too large for a double (k around 300).
    """
    if int(k) != k or k < 0:
        raise ValueError(f"double factorial needs a nonnegative integer, got {k!r}")
    return float(_double_factorial_int(int(k)))


def c0(n: int) -> float:
    """Gamma(n/2+1)^2 / (Gamma((n+1)/2) Gamma((n+3)/2)), always in (0, 1)."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    a = gamma((n + 2) / 2.0)
    return (a / gamma((n + 1) / 2.0)) * (a / gamma((n + 3) / 2.0))


def c0_double_factorial(n: int) -> float:
    """Same constant as :func:`c0`, evaluated through double factorials."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    n = int(n)
    ratio = Fraction(_double_factorial_int(n), _double_factorial_int(n - 1))
    parity = 2 * (n % 2) - 1
    return (math.pi / 2.0) ** parity * float(ratio**2 / (n + 1))


def half_ratio(x: float) -> float:
    """Gamma(x + 1/2) / Gamma(x); increasing on (0, inf)."""
    return gamma(x + 0.5) / gamma(x)


def frac_power_at_origin(query: FracIdentityQuery) -> float:
    """Exact value of (-Delta)^sigma [(1+|.|^2)^(-q/2)] at the origin."""
    n, s, q = query.n, query.sigma, query.q
    return (
        4.0**s
        * (gamma(s + n / 2.0) / gamma(n / 2.0))
        * (gamma(s + q / 2.0) / gamma(q / 2.0))
    )
