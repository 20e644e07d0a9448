"""Periodic 1D grids, external potentials and discrete Laplacians."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.interpolate import CubicSpline

from .elliptic import complete_K, jacobi_sn_cn_dn


class ConfigurationError(ValueError):
    """Raised when grids and potentials are mutually inconsistent."""


@dataclass(frozen=True)
class Grid:
    n_points: int
    period_length: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ConfigurationError(f"n_points must be a positive integer, got {self.n_points!r}")
        if not (self.period_length > 0 and math.isfinite(self.period_length)):
            raise ConfigurationError(f"period_length must be positive, got {self.period_length!r}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "period_length", float(self.period_length))

    @property
    def spacing(self) -> float:
        return self.period_length / self.n_points

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    def integrate(self, f: np.ndarray) -> float:
        # rectangle rule is spectrally accurate for smooth periodic integrands
        return float(np.sum(f) * self.spacing)

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(self.integrate(np.abs(f) ** 2))

    @classmethod
    def for_potential(cls, potential: "PotentialSpec", n_points: int, n_periods: int = 1) -> "Grid":
        period = potential_period(potential)
        if period is None:
            raise ConfigurationError(f"{type(potential).__name__} has no intrinsic period; build the Grid directly")
        return cls(n_points, n_periods * period)


# -- potentials -------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class EllipticSnSquared:
    """V(x) = -V0 sn^2(x, k); period 2 K(k)."""
    V0: float
    k: float

    def __post_init__(self):
        if not 0.0 <= self.k < 1.0:
            raise ConfigurationError(f"k must lie in [0, 1) for a periodic lattice, got {self.k!r}")


@dataclass(frozen=True)
class CosineLattice:
    """V(x) = V0 cos(wavenumber x); period 2 pi / wavenumber."""
    V0: float
    wavenumber: float

    def __post_init__(self):
        if not self.wavenumber > 0:
            raise ConfigurationError("CosineLattice wavenumber must be positive")


@dataclass(frozen=True, eq=False)
class Tabulated:
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float).copy())
        self.samples.setflags(write=False)

    def __eq__(self, other):
        return isinstance(other, Tabulated) and np.array_equal(self.samples, other.samples)

    __hash__ = None


PotentialSpec = Union[Zero, EllipticSnSquared, CosineLattice, Tabulated]


def potential_period(spec: PotentialSpec) -> float | None:
    if isinstance(spec, EllipticSnSquared):
        return 2.0 * complete_K(spec.k)
    if isinstance(spec, CosineLattice):
        return 2.0 * math.pi / spec.wavenumber
    return None


def _check_commensurate(period: float, grid: Grid) -> None:
    ratio = grid.period_length / period
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
        raise ConfigurationError(
            f"grid length {grid.period_length!r} is not an integer multiple of the potential period {period!r}"
        )


def sample_potential(spec: PotentialSpec, grid: Grid) -> np.ndarray:
    x = grid.points
    if isinstance(spec, Zero):
        return np.zeros(grid.n_points)
    if isinstance(spec, EllipticSnSquared):
        period = potential_period(spec)
        _check_commensurate(period, grid)
        # fold into one period so that wrapped points see identical arguments
        s, _, _ = jacobi_sn_cn_dn(np.mod(x, period), spec.k)
        return -spec.V0 * s * s
    if isinstance(spec, CosineLattice):
        period = potential_period(spec)
        _check_commensurate(period, grid)
        return spec.V0 * np.cos(spec.wavenumber * np.mod(x, period))
    if isinstance(spec, Tabulated):
        if spec.samples.shape != (grid.n_points,):
            raise ConfigurationError(
                f"tabulated potential has {spec.samples.size} samples, grid has {grid.n_points}"
            )
        return np.array(spec.samples)
    raise TypeError(f"unknown potential spec {spec!r}")


def load_tabulated(path: str | Path, grid: Grid) -> Tabulated:
    """Read a two-column ``x V`` text file (one header line) onto ``grid``.

    Data are treated as one period of a periodic function spanning the grid
    length and resampled with a periodic cubic spline.
    """
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ConfigurationError(f"{path}: expected two columns (x, V), got {data.shape[1]}")
    x, v = data[:, 0], data[:, 1]
    order = np.argsort(x)
    x, v = x[order], v[order]
    x0 = x[0]
    if x[-1] - x0 > grid.period_length + 1e-12:
        raise ConfigurationError(f"{path}: abscissae span more than the grid length")
    if not np.isclose(x[-1] - x0, grid.period_length):
        x = np.append(x, x0 + grid.period_length)
        v = np.append(v, v[0])
    else:
        v = v.copy()
        v[-1] = v[0]
    spline = CubicSpline(x, v, bc_type="periodic")
    return Tabulated(spline(x0 + np.mod(grid.points - x0, grid.period_length)))


# -- operators --------------------------------------------------------------

LAPLACIAN_BACKENDS = ("fd", "spectral")


def laplacian_operator(grid: Grid, backend: str = "fd") -> np.ndarray:
    """Dense periodic second-derivative matrix.

    ``fd`` is the 3-point central stencil; ``spectral`` is exact on all
    resolved Fourier modes (the Nyquist mode of even grids included).
    """
    n = grid.n_points
    if n < 8:
        raise ConfigurationError("laplacian_operator needs at least 8 grid points")
    if backend == "fd":
        h2 = grid.spacing ** 2
        lap = -2.0 * np.eye(n)
        idx = np.arange(n)
        lap[idx, (idx + 1) % n] += 1.0
        lap[idx, (idx - 1) % n] += 1.0
        lap /= h2
    elif backend == "spectral":
        q = grid.wavenumbers
        if n % 2 == 0:
            q[n // 2] = np.pi / grid.spacing
        col = np.real(np.fft.ifft(-(q ** 2)))
        idx = np.arange(n)
        lap = col[(idx[:, None] - idx[None, :]) % n]
    else:
        raise ConfigurationError(f"unknown Laplacian backend {backend!r}; choose from {LAPLACIAN_BACKENDS}")
    lap = 0.5 * (lap + lap.T)
    lap -= np.diag(lap.sum(axis=1))
    return lap


def apply_laplacian(f: np.ndarray, grid: Grid, backend: str = "fd") -> np.ndarray:
    """Matrix-free version of :func:`laplacian_operator`."""
    if backend == "fd":
        return (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / grid.spacing ** 2
    if backend == "spectral":
        q = grid.wavenumbers
        n = grid.n_points
        if n % 2 == 0:
            q[n // 2] = np.pi / grid.spacing
        out = np.fft.ifft(-(q ** 2) * np.fft.fft(f))
        return out if np.iscomplexobj(f) else out.real
    raise ConfigurationError(f"unknown Laplacian backend {backend!r}")
