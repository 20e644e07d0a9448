"""Time evolution: linearized perturbations, closed-form modal amplitudes and
the full nonlinear GPE (split-step Fourier)."""
from __future__ import annotations

import cmath
import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import Grid, PotentialSpec, sample_potential
from .spectral import build_Ln, spectral_radius
from .stationary import StationaryState


class IntegratorError(RuntimeError):
    pass


class CollapseError(RuntimeError):
    """Non-finite wavefunction during nonlinear evolution."""

    def __init__(self, message: str, last_valid_time: float, trajectory=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class PerturbationField:
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        p1 = np.asarray(self.phi1)
        p2 = np.asarray(self.phi2)
        if np.iscomplexobj(p1) or np.iscomplexobj(p2):
            raise ValueError("perturbation fields are real")
        if p1.shape != p2.shape:
            raise ValueError("phi1 and phi2 must have the same shape")
        object.__setattr__(self, "phi1", np.array(p1, dtype=float))
        object.__setattr__(self, "phi2", np.array(p2, dtype=float))


@dataclass(frozen=True)
class GrowthFit:
    rate: float
    fit_residual: float
    low_confidence: bool


@dataclass(eq=False)
class PerturbationTrajectory:
    times: np.ndarray
    norms_phi1: np.ndarray
    norms_phi2: np.ndarray
    final: PerturbationField
    snapshots: list[PerturbationField] = field(default_factory=list)
    growth_rate_fit: Optional[GrowthFit] = None
    dt: float = math.nan
    scheme: str = "leapfrog"

    @property
    def norms(self) -> np.ndarray:
        return np.hypot(self.norms_phi1, self.norms_phi2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "norm_phi1", "norm_phi2"])
        for t, a, b in zip(self.times, self.norms_phi1, self.norms_phi2):
            w.writerow([f"{t:.12g}", f"{a:.12g}", f"{b:.12g}"])
        return buf.getvalue()


# -- linearized dynamics ----------------------------------------------------

def default_dt(state: StationaryState) -> float:
    return 0.1 / spectral_radius(build_Ln(state, 3))


def evolve_linearized(state: StationaryState, init: PerturbationField, dt: float | None = None,
                      steps: int = 1, scheme: str = "leapfrog", record_every: int = 1,
                      snapshot_every: int | None = None, growth_bound: float | None = None,
                      ) -> PerturbationTrajectory:
    """Integrate ``phi1' = L1 phi2, phi2' = -L3 phi1``.

    ``leapfrog`` is the kick-drift-kick form (second order, time reversible,
    stable while ``dt * sqrt(rho(L1) rho(L3)) < 2``); ``rk4`` is classical
    Runge-Kutta.  Negative ``dt`` integrates backwards.  If ``growth_bound``
    (an exponential rate) is given, norms exceeding ten times
    ``exp(growth_bound t)`` times the initial norm abort the run.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n = state.grid.n_points
    if init.phi1.shape != (n,):
        raise ValueError("perturbation is not conformal with the state grid")
    L1 = build_Ln(state, 1).entries
    L3 = build_Ln(state, 3).entries
    rho1 = spectral_radius(build_Ln(state, 1))
    rho3 = spectral_radius(build_Ln(state, 3))
    if dt is None:
        dt = 0.1 / rho3
    omega_max = math.sqrt(rho1 * rho3)
    limit = {"leapfrog": 2.0, "rk4": 2.8}.get(scheme)
    if limit is None:
        raise ValueError(f"unknown scheme {scheme!r}")
    if abs(dt) * omega_max >= limit:
        raise IntegratorError(
            f"dt={dt:g} exceeds the {scheme} stability limit {limit / omega_max:.3g}; use a smaller dt")

    h = state.grid.spacing
    p1, p2 = init.phi1.copy(), init.phi2.copy()
    t0 = init.time

    def norm(f):
        return math.sqrt(h * float(np.dot(f, f)))

    n_rec = steps // record_every + 1
    times = np.empty(n_rec)
    n1 = np.empty(n_rec)
    n2 = np.empty(n_rec)
    times[0], n1[0], n2[0] = t0, norm(p1), norm(p2)
    initial = max(math.hypot(n1[0], n2[0]), np.finfo(float).tiny)
    snaps = [PerturbationField(p1.copy(), p2.copy(), t0)] if snapshot_every else []
    half = 0.5 * dt
    rec = 1
    for step in range(1, steps + 1):
        if scheme == "leapfrog":
            p2 -= half * (L3 @ p1)
            p1 += dt * (L1 @ p2)
            p2 -= half * (L3 @ p1)
        else:
            k1a, k1b = L1 @ p2, -(L3 @ p1)
            a, b = p1 + half * k1a, p2 + half * k1b
            k2a, k2b = L1 @ b, -(L3 @ a)
            a, b = p1 + half * k2a, p2 + half * k2b
            k3a, k3b = L1 @ b, -(L3 @ a)
            a, b = p1 + dt * k3a, p2 + dt * k3b
            k4a, k4b = L1 @ b, -(L3 @ a)
            p1 = p1 + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
            p2 = p2 + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        t = t0 + step * dt
        if step % record_every == 0:
            a, b = norm(p1), norm(p2)
            if not (math.isfinite(a) and math.isfinite(b)):
                raise IntegratorError(f"non-finite perturbation at t={t:g}; use a smaller dt")
            if growth_bound is not None and math.hypot(a, b) > 10.0 * initial * math.exp(growth_bound * abs(t - t0)):
                raise IntegratorError(
                    f"norm growth at t={t:g} exceeds 10x the exp({growth_bound:g} t) bound; use a smaller dt")
            times[rec], n1[rec], n2[rec] = t, a, b
            rec += 1
        if snapshot_every and step % snapshot_every == 0:
            snaps.append(PerturbationField(p1.copy(), p2.copy(), t))
    return PerturbationTrajectory(times[:rec], n1[:rec], n2[:rec], PerturbationField(p1, p2, t0 + steps * dt),
                                  snaps, dt=dt, scheme=scheme)


def growth_rate(traj: PerturbationTrajectory, window: tuple[float, float] | None = None,
                channel: str = "phi1", threshold: float = 0.05) -> GrowthFit:
    """Least-squares slope of ``log ||phi||`` over ``window``.

    ``fit_residual`` is the RMS deviation of the log-norm from the fitted
    line; above ``threshold`` the fit is flagged low-confidence.
    """
    norms = {"phi1": traj.norms_phi1, "phi2": traj.norms_phi2, "total": traj.norms}[channel]
    t = traj.times
    if window is None:
        window = (t[0], t[-1])
    lo, hi = window
    if lo < t[0] - 1e-12 or hi > t[-1] + 1e-12 or hi <= lo:
        raise ValueError(f"window {window} is not inside the trajectory [{t[0]}, {t[-1]}]")
    mask = (t >= lo) & (t <= hi)
    tt, nn = t[mask], norms[mask]
    if tt.size < 3:
        raise ValueError("growth-rate window holds fewer than three samples")
    y = np.log(np.maximum(nn, np.finfo(float).tiny))
    slope, intercept = np.polyfit(tt, y, 1)
    resid = math.sqrt(float(np.mean((y - (slope * tt + intercept)) ** 2)))
    fit = GrowthFit(float(slope), resid, resid > threshold)
    traj.growth_rate_fit = fit
    return fit


# -- closed-form modal amplitudes --------------------------------------------

@dataclass(frozen=True)
class ModalAmplitudes:
    """Separable amplitudes ``T_i(t) = A_i e^{lam t} + B_i e^{-lam t}``.

    ``lam = sqrt(-lambda1 lambda2)`` is complex in general: imaginary for
    ``lambda1 lambda2 > 0`` (periodic ``T_i``), real for ``< 0``.
    """
    T1_0: float
    T2_0: float
    T1dot_0: float
    T2dot_0: float
    lambda1: float
    lambda2: float

    @classmethod
    def from_initial_data(cls, T1_0, T2_0, T1dot_0, T2dot_0) -> "ModalAmplitudes":
        """Infer ``lambda1 = T1'(0)/T2(0)`` and ``lambda2 = -T2'(0)/T1(0)``."""
        if T1_0 == 0 or T2_0 == 0:
            raise ValueError("initial amplitudes must be nonzero to infer lambda1, lambda2")
        return cls(T1_0, T2_0, T1dot_0, T2dot_0, T1dot_0 / T2_0, -T2dot_0 / T1_0)

    @classmethod
    def from_mode(cls, T1_0, T2_0, lambda1, lambda2) -> "ModalAmplitudes":
        """Initial rates from the coupled equations ``T1' = lambda1 T2, T2' = -lambda2 T1``."""
        return cls(T1_0, T2_0, lambda1 * T2_0, -lambda2 * T1_0, lambda1, lambda2)

    @property
    def lam(self) -> complex:
        return cmath.sqrt(-self.lambda1 * self.lambda2)

    def _coeffs(self, T0, Tdot0):
        lam = self.lam
        if lam == 0:
            return None
        return 0.5 * (T0 + Tdot0 / lam), 0.5 * (T0 - Tdot0 / lam)

    @property
    def A1(self) -> complex:
        return self._coeffs(self.T1_0, self.T1dot_0)[0]

    @property
    def B1(self) -> complex:
        return self._coeffs(self.T1_0, self.T1dot_0)[1]

    @property
    def A2(self) -> complex:
        return self._coeffs(self.T2_0, self.T2dot_0)[0]

    @property
    def B2(self) -> complex:
        return self._coeffs(self.T2_0, self.T2dot_0)[1]


def _modal_complex(amp: ModalAmplitudes, t: float) -> tuple[complex, complex]:
    lam = amp.lam
    if lam == 0:
        return (complex(amp.T1_0 + amp.T1dot_0 * t), complex(amp.T2_0 + amp.T2dot_0 * t))
    ep, em = cmath.exp(lam * t), cmath.exp(-lam * t)
    return (amp.A1 * ep + amp.B1 * em, amp.A2 * ep + amp.B2 * em)


def modal_solution(amp: ModalAmplitudes, t: float) -> tuple[float, float]:
    """``(T1(t), T2(t))``; the ``lam = 0`` case is linear in ``t``."""
    T1, T2 = _modal_complex(amp, t)
    scale = max(1.0, abs(T1), abs(T2))
    if abs(T1.imag) > 1e-12 * scale or abs(T2.imag) > 1e-12 * scale:
        raise ArithmeticError("modal amplitudes lost reality; coefficients are not conjugate-paired")
    return T1.real, T2.real


# -- first-order corrections ------------------------------------------------

@dataclass(frozen=True, eq=False)
class Corrections:
    delta_theta: np.ndarray
    delta_density: np.ndarray
    masked: np.ndarray


def first_corrections(state: StationaryState, pert: PerturbationField, eps: float,
                      floor: float = 1e-8) -> Corrections:
    """Phase and density corrections ``eps phi2 / R`` and ``2 eps phi1 R``.

    ``pert`` carries the full fields ``phi_i = T_i(t) varphi_i(x)``.  Nodes
    with ``|R| < floor`` get ``nan`` phase and are listed in ``masked``.
    """
    R = state.R
    masked = np.abs(R) < floor
    with np.errstate(divide="ignore", invalid="ignore"):
        dtheta = np.where(masked, np.nan, eps * pert.phi2 / np.where(masked, 1.0, R))
    ddens = 2.0 * eps * pert.phi1 * R
    return Corrections(dtheta, ddens, np.flatnonzero(masked))


# -- nonlinear GPE ----------------------------------------------------------

@dataclass(eq=False)
class GPETrajectory:
    times: np.ndarray
    snapshots: np.ndarray  # (records, n) complex
    norms: np.ndarray
    energies: np.ndarray
    psi: np.ndarray  # final field


def gpe_energy(psi: np.ndarray, V: np.ndarray, g1: float, grid: Grid) -> float:
    q = grid.wavenumbers
    psik = np.fft.fft(psi)
    kinetic = 0.5 * grid.period_length * float(np.sum(q ** 2 * np.abs(psik) ** 2)) / grid.n_points ** 2
    rho = np.abs(psi) ** 2
    return kinetic + grid.integrate(V * rho + 0.5 * g1 * rho ** 2)


def evolve_gpe(psi0: np.ndarray, potential: PotentialSpec, g1: float, grid: Grid, dt: float,
               steps: int, record_every: int = 1) -> GPETrajectory:
    """Strang split-step for ``i psi_t = -1/2 psi_xx + (V + g1 |psi|^2) psi``.

    Half kinetic step in Fourier space, full potential + nonlinear step
    (exact, since it leaves ``|psi|`` unchanged), half kinetic step.
    With ``dt * max(q)^2 / 2 > pi`` the kinetic phase wraps and the scheme
    develops resonant instabilities on dense backgrounds; a warning is issued.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    psi = np.array(psi0, dtype=complex)
    if psi.shape != (grid.n_points,) or not np.all(np.isfinite(psi)):
        raise ValueError("psi0 must be a finite array on the grid")
    V = sample_potential(potential, grid)
    half_kin = np.exp(-0.25j * dt * grid.wavenumbers ** 2)
    if 0.5 * dt * float(np.max(grid.wavenumbers ** 2)) > math.pi:
        warnings.warn("dt * max(q)^2 / 2 exceeds pi: split-step may be resonantly unstable", stacklevel=2)
    # overflow is detected below and reported as CollapseError
    with np.errstate(over="ignore", invalid="ignore"):
        times, snaps, norms, energies = [0.0], [psi.copy()], [grid.norm(psi) ** 2], [gpe_energy(psi, V, g1, grid)]
        for step in range(1, steps + 1):
            psi = np.fft.ifft(half_kin * np.fft.fft(psi))
            psi *= np.exp(-1j * dt * (V + g1 * np.abs(psi) ** 2))
            psi = np.fft.ifft(half_kin * np.fft.fft(psi))
            if step % record_every == 0 or step == steps:
                if not np.all(np.isfinite(psi)):
                    partial = GPETrajectory(np.array(times), np.array(snaps), np.array(norms),
                                            np.array(energies), snaps[-1])
                    raise CollapseError(f"wavefunction blew up before t={step * dt:g}", times[-1], partial)
                times.append(step * dt)
                snaps.append(psi.copy())
                norms.append(grid.norm(psi) ** 2)
                energies.append(gpe_energy(psi, V, g1, grid))
    return GPETrajectory(np.array(times), np.array(snaps), np.array(norms), np.array(energies), psi)
