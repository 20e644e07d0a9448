"""Stationary states of the zero-flow GPE: exact lattice solutions, Newton
solves of ``(-1/2 d^2 + V + g1 R^2 - mu) R = 0`` and Thomas-Fermi estimates."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize

from .elliptic import complete_E, complete_K, jacobi_sn_cn_dn
from .model import (
    ConfigurationError,
    CosineLattice,
    EllipticSnSquared,
    Grid,
    PotentialSpec,
    Tabulated,
    Zero,
    apply_laplacian,
    laplacian_operator,
    potential_period,
    sample_potential,
)

STATE_FORMAT = "gpestab.stationary-state/1"


class DomainError(ValueError):
    """Parameters outside the domain where the requested state exists."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, last_residual: float = math.nan, iterations: int = 0):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class StationaryState:
    """Real amplitude ``R`` of ``psi = R exp(-i mu t)`` (phase fixed to zero)."""

    R: np.ndarray = field(repr=False)
    mu: float
    g1: float
    grid: Grid
    potential: PotentialSpec
    backend: str = "fd"
    converged: bool = True
    iterations: int = 0
    trivial: bool = False
    phase: float = 0.0

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        if R.shape != (self.grid.n_points,):
            raise ConfigurationError(f"R has shape {R.shape}, grid has {self.grid.n_points} points")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "g1", float(self.g1))

    @property
    def V(self) -> np.ndarray:
        return sample_potential(self.potential, self.grid)

    @property
    def density(self) -> np.ndarray:
        return self.R ** 2

    def n_periods(self) -> int:
        period = potential_period(self.potential)
        if period is None:
            return 1
        return max(1, round(self.grid.period_length / period))

    def atom_number(self, n_lattice: int = 1) -> float:
        """``n_lattice`` times the norm carried by one lattice period."""
        return n_lattice * self.grid.integrate(self.R ** 2) / self.n_periods()


@dataclass(frozen=True, eq=False)
class TFState:
    R_tf: np.ndarray = field(repr=False)
    mu_tf: float
    g1: float
    grid: Grid
    potential: PotentialSpec


# -- residual & operators ---------------------------------------------------

def apply_L(R: np.ndarray, f: np.ndarray, V: np.ndarray, mu: float, g1: float, n: int,
            grid: Grid, backend: str) -> np.ndarray:
    return -0.5 * apply_laplacian(f, grid, backend) + (n * g1 * R ** 2 + V - mu) * f


def residual_vector(state: StationaryState) -> np.ndarray:
    return apply_L(state.R, state.R, state.V, state.mu, state.g1, 1, state.grid, state.backend)


def residual(state: StationaryState) -> float:
    """Sup norm of ``L1 R`` with the state's Laplacian backend."""
    return float(np.max(np.abs(residual_vector(state))))


# -- exact lattice solution -------------------------------------------------

def exact_sn_state(V0: float, k: float, g1: float, grid: Grid | None = None,
                   n_points: int = 512, backend: str = "spectral") -> StationaryState:
    """Exact state of ``V = -V0 sn^2(x, k)`` with
    ``g1 R^2 = -(1 + V0/k^2)(1 - k^2 sn^2)`` and ``mu = -1 - V0/k^2 + k^2/2``.

    Requires ``-V0 >= k^2``.  Since ``1 - k^2 sn^2 = dn^2`` the amplitude is
    nodeless.
    """
    if not 0.0 < k < 1.0:
        raise DomainError(f"exact sn state needs 0 < k < 1, got k={k!r}")
    if g1 == 0:
        raise DomainError("exact sn state needs g1 != 0")
    if -V0 < k * k:
        raise DomainError(f"exact sn state needs -V0 >= k^2 (V0={V0!r}, k^2={k * k!r})")
    coeff = -(1.0 + V0 / (k * k))
    if coeff != 0.0 and (coeff > 0) != (g1 > 0):
        raise DomainError(f"R^2 = {coeff!r}/g1 * dn^2 is negative for g1={g1!r}")
    potential = EllipticSnSquared(V0, k)
    if grid is None:
        grid = Grid.for_potential(potential, n_points)
    mu = -1.0 - V0 / (k * k) + 0.5 * k * k
    s, _, _ = jacobi_sn_cn_dn(np.mod(grid.points, 2.0 * complete_K(k)), k)
    R2 = coeff * (1.0 - (k * s) ** 2) / g1
    trivial = coeff == 0.0
    if trivial:
        warnings.warn("V0 = -k^2: exact sn state degenerates to the vacuum R = 0", stacklevel=2)
    return StationaryState(np.sqrt(np.maximum(R2, 0.0)), mu, g1, grid, potential,
                           backend=backend, trivial=trivial)


def exact_sn_mu_s(V0: float, k: float) -> float:
    """Closed-form minimum of ``V + g1 R^2`` for the exact sn state."""
    return -1.0 - V0 / (k * k)


# -- Newton solver ----------------------------------------------------------

def _newton(V, mu, g1, guess, grid, backend, tol, max_iter, lap=None, polish=0):
    if lap is None:
        lap = laplacian_operator(grid, backend)
    R = np.array(guess, dtype=float)
    F = -0.5 * (lap @ R) + (V + g1 * R ** 2 - mu) * R
    res = float(np.max(np.abs(F)))
    history = [res]
    it = 0
    while res >= tol:
        if it >= max_iter:
            raise NonConvergenceError(
                f"Newton did not reach tol={tol:g} in {max_iter} iterations (residual {res:.3e})", res, it)
        J = -0.5 * lap + np.diag(V + 3.0 * g1 * R ** 2 - mu)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        # backtracking keeps the iteration from wandering when far from a root
        t = 1.0
        for _ in range(30):
            trial = R + t * step
            Ft = -0.5 * (lap @ trial) + (V + g1 * trial ** 2 - mu) * trial
            rt = float(np.max(np.abs(Ft)))
            if np.isfinite(rt) and (rt < res or t < 1e-3):
                break
            t *= 0.5
        if not np.isfinite(rt):
            raise NonConvergenceError("Newton iteration diverged (non-finite residual)", res, it)
        R, F, res = trial, Ft, rt
        it += 1
        history.append(res)
        if len(history) > 8 and res > 1e6 * history[0]:
            raise NonConvergenceError("Newton iteration diverged", res, it)
    for _ in range(polish):
        # extra quadratic steps push the residual to round-off
        J = -0.5 * lap + np.diag(V + 3.0 * g1 * R ** 2 - mu)
        try:
            trial = R + np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        Ft = -0.5 * (lap @ trial) + (V + g1 * trial ** 2 - mu) * trial
        rt = float(np.max(np.abs(Ft)))
        if not np.isfinite(rt) or rt > max(10.0 * res, tol):
            break
        R, F, res = trial, Ft, rt
    return R, res, it


def solve_newton(potential: PotentialSpec, mu: float, g1: float, guess: np.ndarray, grid: Grid,
                 tol: float = 1e-10, backend: str = "fd", max_iter: int = 50) -> StationaryState:
    """Solve ``L1 R = 0`` at fixed ``mu`` by Newton's method.

    The Jacobian is ``L3 = -1/2 d^2 + V + 3 g1 R^2 - mu``.  A solution that
    collapses onto ``R = 0`` is returned with ``trivial=True`` and a warning.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    guess = np.asarray(guess, dtype=float)
    if guess.shape != (grid.n_points,) or not np.all(np.isfinite(guess)):
        raise ValueError("guess must be a finite array on the grid")
    if not np.any(guess):
        raise ValueError("guess is identically zero")
    V = sample_potential(potential, grid)
    R, res, it = _newton(V, mu, g1, guess, grid, backend, tol, max_iter)
    scale = max(1.0, float(np.max(np.abs(guess))))
    trivial = float(np.max(np.abs(R))) < 1e-8 * scale
    if trivial:
        warnings.warn("Newton converged to the trivial solution R = 0", stacklevel=2)
    return StationaryState(R, mu, g1, grid, potential, backend=backend, converged=True,
                           iterations=it, trivial=trivial)


def _bordered_polish(V, R, mu, g1, N, scale_N, grid, lap, tol, steps=4):
    """Newton on the pair (R, mu) with the norm constraint appended.

    Near the linear limit ``N(mu)`` is too flat for a root search in ``mu``
    alone to resolve ``N``; the bordered system stays well conditioned.
    """
    n = grid.n_points
    h = grid.spacing
    for _ in range(steps):
        F = -0.5 * (lap @ R) + (V + g1 * R ** 2 - mu) * R
        c = scale_N * h * np.dot(R, R) - N
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = -0.5 * lap + np.diag(V + 3.0 * g1 * R ** 2 - mu)
        J[:n, n] = -R
        J[n, :n] = 2.0 * scale_N * h * R
        try:
            delta = np.linalg.solve(J, -np.append(F, c))
        except np.linalg.LinAlgError:
            break
        R_new, mu_new = R + delta[:n], mu + delta[n]
        F_new = -0.5 * (lap @ R_new) + (V + g1 * R_new ** 2 - mu_new) * R_new
        if not np.all(np.isfinite(F_new)) or np.max(np.abs(F_new)) > max(tol, 10 * np.max(np.abs(F))):
            break
        R, mu = R_new, float(mu_new)
    return R, mu


def linear_ground_state(potential: PotentialSpec, grid: Grid, backend: str = "fd") -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``-1/2 d^2 + V`` (the ``N -> 0`` limit)."""
    H = -0.5 * laplacian_operator(grid, backend) + np.diag(sample_potential(potential, grid))
    w, v = np.linalg.eigh(H)
    phi = v[:, 0]
    return float(w[0]), phi * np.sign(phi.sum())


# -- Thomas-Fermi -----------------------------------------------------------

def mean_potential(potential: PotentialSpec, period: float | None = None, n_quad: int = 4096) -> float:
    """Average of V over one period by composite (periodic trapezoid) quadrature."""
    if isinstance(potential, Zero):
        return 0.0
    if isinstance(potential, Tabulated):
        return float(np.mean(potential.samples))
    natural = potential_period(potential)
    if period is None:
        period = natural
    grid = Grid(n_quad, period)
    return grid.integrate(sample_potential(potential, grid)) / period


def mean_sn_squared_potential(V0: float, k: float) -> float:
    """Closed form ``<-V0 sn^2> = -V0 (1 - E/K) / k^2``."""
    if k == 0.0:
        return -0.5 * V0
    return -V0 * (1.0 - complete_E(k) / complete_K(k)) / (k * k)


def mu_TF(N: float, n_lattice: int, g1: float, potential: PotentialSpec, period: float | None = None) -> float:
    """Thomas-Fermi chemical potential ``N g1 / (n L) + <V>`` for a lattice of
    ``n_lattice`` cells of length ``L``.  With ``L = pi`` this is the textbook
    full-support estimate."""
    if g1 <= 0:
        raise DomainError("Thomas-Fermi estimate requires a repulsive interaction (g1 > 0)")
    if n_lattice < 1:
        raise ValueError("n_lattice must be >= 1")
    if period is None:
        period = potential_period(potential)
        if period is None:
            raise ConfigurationError("period must be given for potentials without an intrinsic period")
    return N * g1 / (n_lattice * period) + mean_potential(potential, period)


def thomas_fermi_state(potential: PotentialSpec, mu: float, g1: float, grid: Grid) -> TFState:
    if g1 <= 0:
        raise DomainError("Thomas-Fermi state requires g1 > 0")
    V = sample_potential(potential, grid)
    R2 = np.maximum(0.0, mu - V) / g1
    if not np.any(R2 > 0):
        warnings.warn(f"mu={mu!r} <= min V: Thomas-Fermi condensate is empty", stacklevel=2)
    return TFState(np.sqrt(R2), float(mu), float(g1), grid, potential)


# -- fixed atom number ------------------------------------------------------

def solve_fixed_N(potential: PotentialSpec, N: float, n_lattice: int, g1: float, grid: Grid,
                  tol: float = 1e-10, backend: str = "fd", rtol_N: float = 1e-9,
                  max_expand: int = 60) -> StationaryState:
    """Find the nodeless state carrying ``N`` atoms over ``n_lattice`` cells.

    Brent's method on ``mu`` (secant/inverse-quadratic steps with bisection
    fallback); every evaluation is a warm-started Newton solve.  The bracket
    starts at the linear ground-state energy, where ``N = 0``, and is
    expanded geometrically past the Thomas-Fermi estimate.
    """
    if not N > 0:
        raise ValueError("N must be positive")
    if n_lattice < 1:
        raise ValueError("n_lattice must be >= 1")
    if g1 <= 0:
        raise DomainError("fixed-N solve is only supported for repulsive g1 > 0")
    sign = 1.0
    V = sample_potential(potential, grid)
    lap = laplacian_operator(grid, backend)
    E0, phi0 = linear_ground_state(potential, grid, backend)
    periods = grid.period_length / (potential_period(potential) or grid.period_length)
    scale_N = n_lattice / periods
    phi0 = phi0 / grid.norm(phi0)
    quartic = grid.integrate(phi0 ** 4)
    cache: dict[float, np.ndarray] = {}
    numbers: dict[float, float] = {}

    def small_amplitude_guess(mu):
        return math.sqrt(max((mu - E0) / (g1 * quartic), 0.0)) * phi0

    def number(mu: float) -> float:
        if sign * (mu - E0) <= 0:
            return 0.0
        if mu in numbers:
            return numbers[mu]
        guesses = []
        if cache:
            nearest = min(cache, key=lambda m: abs(m - mu))
            guesses.append(cache[nearest])
        guesses.append(small_amplitude_guess(mu))
        guesses.append(np.sqrt(np.maximum(mu - V, 0.0) / g1) + 1e-3 * small_amplitude_guess(mu))
        last_err = None
        for g in guesses:
            if not np.any(g):
                continue
            try:
                R, _, _ = _newton(V, mu, g1, g, grid, backend, tol, 60, lap, polish=2)
            except NonConvergenceError as err:
                last_err = err
                continue
            nodeless = np.all(R > 0) or np.all(R < 0)
            if nodeless and np.max(np.abs(R)) > 1e-8 * np.max(np.abs(g)):
                R = np.abs(R)
                cache[mu] = R
                numbers[mu] = scale_N * grid.integrate(R ** 2)
                return numbers[mu]
        raise NonConvergenceError(f"no nodeless state found at mu={mu!r}",
                                  getattr(last_err, "last_residual", math.nan))

    period = potential_period(potential) or grid.period_length
    est = N * g1 / (n_lattice * period) + float(np.mean(V))
    width = max(est - E0, 1e-3 * max(1.0, abs(E0)))
    lo_mu, hi_mu = E0, E0 + sign * width
    for _ in range(max_expand):
        try:
            if number(hi_mu) >= N:
                break
        except NonConvergenceError:
            pass
        lo_mu, hi_mu = hi_mu, hi_mu + sign * (hi_mu - E0)
    else:
        raise NonConvergenceError(f"could not bracket mu for N={N!r}")

    def f(mu):
        return number(mu) - N

    a, b = sorted((lo_mu, hi_mu))
    try:
        mu = optimize.brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                             maxiter=200)
    except (ValueError, RuntimeError) as err:
        raise NonConvergenceError(f"outer mu iteration failed: {err}") from err
    number(mu)
    R, mu = _bordered_polish(V, cache[mu], mu, g1, N, scale_N, grid, lap, tol)
    got = scale_N * grid.integrate(R ** 2)
    if abs(got - N) > rtol_N * N:
        raise NonConvergenceError(f"atom number {got!r} misses target {N!r}")
    return StationaryState(R, mu, g1, grid, potential, backend=backend)


# -- serialization ----------------------------------------------------------

def potential_to_dict(spec: PotentialSpec) -> dict:
    if isinstance(spec, Zero):
        return {"variant": "Zero"}
    if isinstance(spec, EllipticSnSquared):
        return {"variant": "EllipticSnSquared", "V0": spec.V0, "k": spec.k}
    if isinstance(spec, CosineLattice):
        return {"variant": "CosineLattice", "V0": spec.V0, "wavenumber": spec.wavenumber}
    if isinstance(spec, Tabulated):
        return {"variant": "Tabulated", "samples": spec.samples.tolist()}
    raise TypeError(spec)


def potential_from_dict(d: dict) -> PotentialSpec:
    variant = d.get("variant")
    if variant == "Zero":
        return Zero()
    if variant == "EllipticSnSquared":
        return EllipticSnSquared(float(d["V0"]), float(d["k"]))
    if variant == "CosineLattice":
        return CosineLattice(float(d["V0"]), float(d["wavenumber"]))
    if variant == "Tabulated":
        return Tabulated(np.asarray(d["samples"], dtype=float))
    raise ConfigurationError(f"unknown potential variant {variant!r}")


def state_to_dict(state: StationaryState) -> dict:
    return {
        "format": STATE_FORMAT,
        "grid": {"n_points": state.grid.n_points, "period_length": state.grid.period_length},
        "potential": potential_to_dict(state.potential),
        "mu": state.mu,
        "g1": state.g1,
        "backend": state.backend,
        "phase": state.phase,
        "converged": state.converged,
        "iterations": state.iterations,
        "trivial": state.trivial,
        "R": state.R.tolist(),
    }


def state_from_dict(d: dict) -> StationaryState:
    if d.get("format") != STATE_FORMAT:
        raise ConfigurationError(f"not a stationary-state record (format={d.get('format')!r})")
    grid = Grid(int(d["grid"]["n_points"]), float(d["grid"]["period_length"]))
    return StationaryState(
        np.asarray(d["R"], dtype=float), float(d["mu"]), float(d["g1"]), grid,
        potential_from_dict(d["potential"]), backend=d.get("backend", "fd"),
        converged=bool(d.get("converged", True)), iterations=int(d.get("iterations", 0)),
        trivial=bool(d.get("trivial", False)), phase=float(d.get("phase", 0.0)),
    )


def save_state(state: StationaryState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state), indent=1))


def load_state(path: str | Path) -> StationaryState:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"{path}: corrupt state file ({err})") from err
    try:
        return state_from_dict(d)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigurationError(f"{path}: corrupt state file ({err})") from err


def with_backend(state: StationaryState, backend: str) -> StationaryState:
    return replace(state, backend=backend)
