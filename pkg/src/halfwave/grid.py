"""Periodic grids on [-L, L)^n and complex fields sampled on them.

Binary field layout (little endian)::

    int64 n | int64 N | float64 L | N**n complex values as interleaved
    (re, im) float64 pairs, row-major over the axes
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = ["GridSpec", "ScalarField", "write_field", "read_field"]

_HEADER = struct.Struct("<qqd")


@dataclass(frozen=True)
class GridSpec:
    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {self.n!r}")
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"half width must be positive, got {self.L!r}")
        N = int(self.N)
        if N != self.N or N < 8 or N & (N - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.N!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Frequencies pi*k/L for k in [-N/2, N/2), in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*([self.axis] * self.n), indexing="ij")

    def radius_squared(self) -> np.ndarray:
        return sum(c**2 for c in self.mesh())

    @cached_property
    def abs_xi(self) -> np.ndarray:
        """|xi| on the full frequency mesh (FFT order)."""
        ks = np.meshgrid(*([self.wavenumbers] * self.n), indexing="ij")
        return np.sqrt(sum(k**2 for k in ks))

    @cached_property
    def abs_xi_half(self) -> np.ndarray:
        """|xi| on the real-FFT frequency mesh (last axis holds k >= 0 only)."""
        ks = [self.wavenumbers] * (self.n - 1) + [np.abs(2.0 * np.pi * np.fft.rfftfreq(self.N, d=self.h))]
        ks = np.meshgrid(*ks, indexing="ij")
        return np.sqrt(sum(k**2 for k in ks))

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Boolean mask keeping modes with |k_i| < fraction * N/2 on every axis."""
        kmax = fraction * (self.N // 2) * (np.pi / self.L)
        ks = np.meshgrid(*([np.abs(self.wavenumbers)] * self.n), indexing="ij")
        keep = np.ones(self.shape, dtype=bool)
        for k in ks:
            keep &= k < kmax
        return keep

    def integrate(self, values: np.ndarray) -> complex | float:
        """Trapezoid rule on the periodic grid (a plain sum times the cell volume)."""
        return values.sum(axis=tuple(range(-self.n, 0))) * self.cell_volume

    def refined(self) -> "GridSpec":
        return GridSpec(self.n, self.L, 2 * self.N)


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    blown_up: bool = field(default=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.size != self.grid.N**self.grid.n:
            raise ValueError(
                f"field has {values.size} values, grid needs {self.grid.N ** self.grid.n}"
            )
        self.values = values.reshape(self.grid.shape)
        if not self.blown_up and not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "ScalarField":
        """Sample ``func(*coords)`` on the grid mesh."""
        return cls(grid, func(*grid.mesh()))

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))


def write_field(path, fld: ScalarField) -> None:
    g = fld.grid
    payload = np.ascontiguousarray(fld.values, dtype="<c16").ravel()
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(g.n, g.N, g.L))
        fh.write(payload.tobytes())


def read_field(path) -> ScalarField:
    raw = Path(path).read_bytes()
    n, N, L = _HEADER.unpack_from(raw)
    grid = GridSpec(int(n), float(L), int(N))
    values = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if values.size != N**n:
        raise ValueError(f"{path}: payload holds {values.size} values, header says {N ** n}")
    return ScalarField(grid, values.copy(), blown_up=not np.all(np.isfinite(values)))
