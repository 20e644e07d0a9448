"""Initial-condition control of separable perturbation modes.

A mode with product eigenvalue ``nu = lambda1 lambda2 < 0`` grows like
``exp(lam t)``, ``lam = sqrt(-nu)``, unless its initial data satisfy
``T_i'(0) = -lam T_i(0)``, which removes the growing coefficient.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import (
    GrowthFit,
    ModalAmplitudes,
    PerturbationField,
    PerturbationTrajectory,
    default_dt,
    evolve_linearized,
    growth_rate,
)
from .spectral import ProductMode, product_modes
from .stationary import DomainError, StationaryState


class PreconditionError(ValueError):
    pass


class Criterion(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


class Variant(str, enum.Enum):
    SUPPRESSED = "Suppressed"
    UNSUPPRESSED = "Unsuppressed"
    SIGN_SPLIT = "SignSplit"


@dataclass(frozen=True)
class ControlSignal:
    T1_0: float
    T2_0: float
    T1dot_0: float
    T2dot_0: float

    def __post_init__(self):
        if self.T1_0 == 0 or self.T2_0 == 0:
            raise DomainError("control signal needs nonzero initial amplitudes T1(0), T2(0)")

    @property
    def lambda_squared(self) -> float:
        return self.T1dot_0 * self.T2dot_0 / (self.T1_0 * self.T2_0)

    @property
    def relative_rates(self) -> tuple[float, float]:
        return self.T1dot_0 / self.T1_0, self.T2dot_0 / self.T2_0

    def amplitudes(self, lambda1: float | None = None, lambda2: float | None = None) -> ModalAmplitudes:
        if lambda1 is None or lambda2 is None:
            return ModalAmplitudes.from_initial_data(self.T1_0, self.T2_0, self.T1dot_0, self.T2dot_0)
        return ModalAmplitudes(self.T1_0, self.T2_0, self.T1dot_0, self.T2dot_0, lambda1, lambda2)


def initial_criterion(sig: ControlSignal, atol: float = 0.0) -> Criterion:
    """Sign of ``T1'(0) T2'(0) / (T1(0) T2(0))``: negative means periodic (stable)."""
    if sig.T1_0 == 0 or sig.T2_0 == 0:
        raise DomainError("initial criterion undefined for zero initial amplitude")
    lam2 = sig.lambda_squared
    if abs(lam2) <= atol:
        return Criterion.MARGINAL
    return Criterion.STABLE if lam2 < 0 else Criterion.UNSTABLE


def suppression_signal(lam: float, T1_0: float, T2_0: float) -> ControlSignal:
    if not lam > 0:
        raise ValueError("suppression needs a real growth rate lam > 0")
    return ControlSignal(T1_0, T2_0, -lam * T1_0, -lam * T2_0)


def mode_signal(mode: ProductMode, T1_0: float, T2_0: float) -> ControlSignal:
    """Signal realised by an eigenmode: ``T1' = lambda1 T2``, ``T2' = -lambda2 T1``."""
    return ControlSignal(T1_0, T2_0, mode.lambda1 * T2_0, -mode.lambda2 * T1_0)


def variant_amplitudes(mode: ProductMode, variant: Variant, T1_0: float = 1.0,
                       magnitude: float | None = None) -> tuple[float, float]:
    """``(T1(0), T2(0))`` on ``mode`` realising the variant's relative rates."""
    nu = mode.nu
    if variant in (Variant.SUPPRESSED, Variant.UNSUPPRESSED):
        if not nu < 0:
            raise PreconditionError(f"{variant.value} needs an unstable real mode (nu={nu:g} is not negative)")
        lam = math.sqrt(-nu)
        sign = -1.0 if variant is Variant.SUPPRESSED else 1.0
        # T1'(0)/T1(0) = lambda1 T2/T1 = sign * lam
        return T1_0, sign * lam * T1_0 / mode.lambda1
    if magnitude is None:
        magnitude = math.sqrt(abs(nu)) if nu != 0 else 1.0
    # T1'/T1 = +magnitude; for nu > 0 the mode then forces T2'/T2 = -nu/magnitude
    return T1_0, magnitude * T1_0 / mode.lambda1


@dataclass(eq=False)
class RunReport:
    variant: str
    signal: ControlSignal
    criterion: Criterion
    trajectory: PerturbationTrajectory = field(repr=False)
    fit: GrowthFit
    max_norm_ratio: float
    bounded: bool
    growing_coefficient: float

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "signal": {
                "T1_0": self.signal.T1_0, "T2_0": self.signal.T2_0,
                "T1dot_0": self.signal.T1dot_0, "T2dot_0": self.signal.T2dot_0,
                "lambda_squared": self.signal.lambda_squared,
            },
            "criterion": self.criterion.value,
            "growth_rate": self.fit.rate,
            "growth_fit_residual": self.fit.fit_residual,
            "growth_low_confidence": self.fit.low_confidence,
            "max_norm_ratio": self.max_norm_ratio,
            "bounded": self.bounded,
            "growing_coefficient_A1": self.growing_coefficient,
        }


@dataclass(eq=False)
class ControlReport:
    mode_index: int
    nu: float
    lambda1: float
    lambda2: float
    window: float
    controlled: RunReport
    reference: RunReport

    @property
    def suppression_ratio(self) -> float:
        """Max-norm ratio of the growing run over the controlled one."""
        if self.controlled.variant == Variant.UNSUPPRESSED.value:
            return self.controlled.max_norm_ratio / self.reference.max_norm_ratio
        return self.reference.max_norm_ratio / self.controlled.max_norm_ratio

    def to_json(self) -> str:
        return json.dumps({
            "mode_index": self.mode_index,
            "product_eigenvalue": self.nu,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "window": self.window,
            "controlled": self.controlled.as_dict(),
            "reference": self.reference.as_dict(),
            "suppression_ratio": self.suppression_ratio,
        }, indent=1)


def select_mode(state: StationaryState, mode_index: int) -> ProductMode:
    modes = product_modes(state)
    if not 0 <= mode_index < len(modes):
        raise IndexError(f"mode_index {mode_index} outside 0..{len(modes) - 1}")
    mode = modes[mode_index]
    if mode is None:
        raise PreconditionError(f"product mode {mode_index} is complex or degenerate")
    return mode


def run_mode(state: StationaryState, mode: ProductMode, T1_0: float, T2_0: float, window: float,
             dt: float | None = None, record_every: int = 1, variant: str = "") -> RunReport:
    """Evolve ``(T1_0 phi1, T2_0 phi2)`` for ``window`` time units."""
    if dt is None:
        dt = default_dt(state)
    steps = max(3, math.ceil(window / dt - 1e-9))
    init = PerturbationField(T1_0 * mode.phi1, T2_0 * mode.phi2)
    traj = evolve_linearized(state, init, dt, steps, record_every=record_every)
    norms = traj.norms
    ratio = float(np.max(norms) / norms[0])
    fit = growth_rate(traj, channel="total")
    sig = mode_signal(mode, T1_0, T2_0)
    amp = sig.amplitudes(mode.lambda1, mode.lambda2)
    growing = abs(amp.A1) if amp.lam != 0 else math.nan
    return RunReport(variant, sig, initial_criterion(sig), traj, fit, ratio, ratio <= 2.0, growing)


def control_experiment(state: StationaryState, mode_index: int, variant: Variant | str,
                       window: float | None = None, dt: float | None = None,
                       magnitude: float | None = None, record_every: int = 1) -> ControlReport:
    """Run the controlled variant on one product eigenmode next to a reference run.

    The reference for Suppressed is Unsuppressed and vice versa; SignSplit is
    paired with the uncontrolled ``T2(0) = 0`` perturbation.  ``mode_index``
    indexes the product spectrum sorted by real part (0 = most unstable).
    """
    variant = Variant(variant)
    mode = select_mode(state, mode_index)
    nu = mode.nu
    lam_real = math.sqrt(-nu) if nu < 0 else 0.0
    if variant in (Variant.SUPPRESSED, Variant.UNSUPPRESSED) and not lam_real > 0:
        raise PreconditionError(f"mode {mode_index} has no real growth rate (nu={nu:g})")
    if window is None:
        if variant is Variant.SUPPRESSED:
            window = 5.0 / lam_real
        elif variant is Variant.UNSUPPRESSED:
            window = 4.0 / lam_real
        elif lam_real > 0:
            window = 4.0 / lam_real
        else:
            window = 4.0 * math.pi / math.sqrt(nu) if nu > 0 else 10.0
    T1_0, T2_0 = variant_amplitudes(mode, variant, magnitude=magnitude)
    controlled = run_mode(state, mode, T1_0, T2_0, window, dt, record_every, variant.value)
    if variant is Variant.SUPPRESSED:
        ref_variant, (r1, r2) = Variant.UNSUPPRESSED.value, variant_amplitudes(mode, Variant.UNSUPPRESSED)
    elif variant is Variant.UNSUPPRESSED:
        ref_variant, (r1, r2) = Variant.SUPPRESSED.value, variant_amplitudes(mode, Variant.SUPPRESSED)
    else:
        ref_variant, (r1, r2) = "Uncontrolled", (1.0, 0.0)
    if r2 == 0.0:
        reference = _run_uncontrolled(state, mode, window, dt, record_every)
    else:
        reference = run_mode(state, mode, r1, r2, window, dt, record_every, ref_variant)
    return ControlReport(mode_index, nu, mode.lambda1, mode.lambda2, window, controlled, reference)


def _run_uncontrolled(state, mode, window, dt, record_every) -> RunReport:
    if dt is None:
        dt = default_dt(state)
    steps = max(3, math.ceil(window / dt - 1e-9))
    traj = evolve_linearized(state, PerturbationField(mode.phi1, np.zeros_like(mode.phi1)), dt, steps,
                             record_every=record_every)
    norms = traj.norms
    ratio = float(np.max(norms) / norms[0])
    fit = growth_rate(traj, channel="total")
    # no rate trimming: T2(0) = 0 makes the criterion undefined; report the mode's own sign
    sig = ControlSignal(1.0, 1.0, mode.lambda1, -mode.lambda2)
    amp = ModalAmplitudes(1.0, 0.0, 0.0, -mode.lambda2, mode.lambda1, mode.lambda2)
    growing = abs(amp.A1) if amp.lam != 0 else math.nan
    return RunReport("Uncontrolled", sig, initial_criterion(sig), traj, fit, ratio, ratio <= 2.0, growing)
