"""Linearization operators L1, L3, their spectra and the stability verdict.

For a zero-flow stationary state the perturbation ``psi = (R + e phi1 + i e phi2)
exp(-i mu t)`` obeys ``phi1_t = L1 phi2, phi2_t = -L3 phi1`` with
``Ln = -1/2 d^2 + n g1 R^2 + V - mu``.  Separable modes grow like
``exp(+-sqrt(-nu) t)`` where ``nu`` is an eigenvalue of ``L1 L3``.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from .model import laplacian_operator
from .stationary import StationaryState


class ContractError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray = field(repr=False)
    kind: str  # "L1", "L3" or "product"

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        a = self.entries
        scale = max(1.0, float(np.max(np.abs(a))))
        return bool(np.max(np.abs(a - a.T)) <= rtol * scale)


class Classification(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    UNDETERMINED = "Undetermined"


# evidence route that decided the classification
ROUTE_REPULSIVE_ALPHA_ZERO = "a:g1>0,alpha_g=0"
ROUTE_REPULSIVE_ALPHA_NEG_BETA_POS = "b:g1>0,alpha_g<0<beta_g"
ROUTE_ATTRACTIVE_ALPHA_ZERO = "c:g1<0,alpha_g=0"
ROUTE_PRODUCT = "d:product-spectrum"


@dataclass(frozen=True)
class StabilityVerdict:
    classification: Classification
    route: str
    alpha_g: float
    beta_g: float
    min_product_eigenvalue_real_part: float
    has_complex_product_eigenvalue: bool
    lambda_growth: float
    mu: float
    mu_s: float
    instability_band: Optional[tuple[float, float]]
    eps: float
    g1: float

    def as_record(self) -> dict:
        band = self.instability_band
        return {
            "classification": self.classification.value,
            "route": self.route,
            "g1": self.g1,
            "mu": self.mu,
            "mu_s": self.mu_s,
            "mu_minus_mu_s": self.mu - self.mu_s,
            "band_lower": band[0] if band else math.nan,
            "band_upper": band[1] if band else math.nan,
            "alpha_g": self.alpha_g,
            "beta_g": self.beta_g,
            "min_product_eigenvalue_real_part": self.min_product_eigenvalue_real_part,
            "has_complex_product_eigenvalue": self.has_complex_product_eigenvalue,
            "lambda_growth": self.lambda_growth,
            "eps": self.eps,
        }


VERDICT_FIELDS = tuple(StabilityVerdict(
    Classification.STABLE, "", 0, 0, 0, False, 0, 0, 0, None, 0, 0).as_record())


# -- operators --------------------------------------------------------------

def build_Ln(state: StationaryState, n: int) -> OperatorMatrix:
    """``-1/2 lap + diag(n g1 R^2 + V - mu)`` on the state's grid."""
    if n not in (1, 3):
        raise ValueError("n must be 1 or 3")
    lap = laplacian_operator(state.grid, state.backend)
    diag = n * state.g1 * state.R ** 2 + state.V - state.mu
    return OperatorMatrix(-0.5 * lap + np.diag(diag), f"L{n}")


def build_product(L1: OperatorMatrix, L3: OperatorMatrix) -> OperatorMatrix:
    return OperatorMatrix(L1.entries @ L3.entries, "product")


def symmetric_spectrum(op: OperatorMatrix) -> np.ndarray:
    if not op.is_symmetric():
        raise ContractError(f"{op.kind} matrix is not symmetric")
    return scipy.linalg.eigvalsh(op.entries)


def ground_eigenvalue(op: OperatorMatrix) -> float:
    """Smallest eigenvalue of a symmetric operator (alpha_g for L1, beta_g for L3)."""
    if not op.is_symmetric():
        raise ContractError(f"ground_eigenvalue needs a symmetric operator, got non-symmetric {op.kind}")
    return float(scipy.linalg.eigvalsh(op.entries, subset_by_index=[0, 0])[0])


def spectral_radius(op: OperatorMatrix) -> float:
    if op.is_symmetric():
        n = op.n
        lo = scipy.linalg.eigvalsh(op.entries, subset_by_index=[0, 0])[0]
        hi = scipy.linalg.eigvalsh(op.entries, subset_by_index=[n - 1, n - 1])[0]
        return float(max(abs(lo), abs(hi)))
    return float(np.max(np.abs(np.linalg.eigvals(op.entries))))


def _sort_complex(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]


def product_spectrum(L1: OperatorMatrix, L3: OperatorMatrix) -> np.ndarray:
    """All eigenvalues of ``L1 @ L3`` sorted by real, then imaginary part."""
    if L1.n != L3.n:
        raise ContractError("L1 and L3 come from different grids")
    prod = L1.entries @ L3.entries
    try:
        vals = np.linalg.eigvals(prod)
    except np.linalg.LinAlgError as err:
        cond = np.linalg.cond(prod)
        raise EigenSolverError(f"eigenvalue solve of L1 L3 failed (cond={cond:.3e}): {err}") from err
    return _sort_complex(vals)


def default_eps(L1: OperatorMatrix, L3: OperatorMatrix, rel: float = 1e-6) -> float:
    """Zero-eigenvalue tolerance scaled by the larger spectral radius."""
    return rel * max(spectral_radius(L1), spectral_radius(L3), 1.0)


# -- stability regions ------------------------------------------------------

def mu_stability(state: StationaryState) -> float:
    """Minimum over the period of ``U = V + g1 R^2``."""
    return float(np.min(state.V + state.g1 * state.R ** 2))


def mu_instability_band(state: StationaryState) -> Optional[tuple[float, float]]:
    """Guaranteed-instability chemical potentials.

    For ``g1 > 0`` the open interval ``(min U, min(V + 3 g1 R^2))``; for
    ``g1 < 0`` the single point ``min U`` (returned as a degenerate pair).
    """
    U = state.V + state.g1 * state.R ** 2
    if state.g1 > 0:
        lo, hi = float(np.min(U)), float(np.min(state.V + 3.0 * state.g1 * state.R ** 2))
        return (lo, hi) if lo < hi else None
    if state.g1 < 0:
        p = float(np.min(U))
        return (p, p)
    return None


# -- classification ---------------------------------------------------------

def growth_rates(nu: np.ndarray) -> np.ndarray:
    """Exponential rates ``Re sqrt(-nu)`` for product eigenvalues ``nu``."""
    return np.real(np.sqrt(-np.asarray(nu, dtype=complex)))


def classify(state: StationaryState, eps: float | None = None, max_goldstone: int = 2) -> StabilityVerdict:
    """Stability verdict from the ground eigenvalues and the product spectrum.

    Routes, tried in order: (a) ``g1 > 0`` with ``alpha_g = 0`` is stable
    unless the product spectrum contradicts it; (b) ``g1 > 0`` with
    ``alpha_g < 0 < beta_g`` is unstable; (c) ``g1 < 0`` with
    ``alpha_g = 0`` is unstable; (d) otherwise the deflated product
    spectrum decides.  Up to ``max_goldstone`` eigenvalues within ``eps``
    of zero are treated as symmetry (marginal) modes.
    """
    L1, L3 = build_Ln(state, 1), build_Ln(state, 3)
    if eps is None:
        eps = default_eps(L1, L3)
    if not eps > 0:
        raise ValueError("eps must be positive")
    alpha_g, beta_g = ground_eigenvalue(L1), ground_eigenvalue(L3)
    nu = product_spectrum(L1, L3)
    min_re = float(nu[0].real)
    complex_mask = np.abs(nu.imag) > eps
    negative_mask = nu.real < -eps
    significant = complex_mask | negative_mask
    has_complex = bool(np.any(complex_mask))
    lam = float(np.max(growth_rates(nu[significant]))) if np.any(significant) else 0.0
    product_unstable = bool(np.any(significant))

    near_zero = np.abs(nu) <= eps
    if product_unstable:
        product_verdict = Classification.UNSTABLE
    elif np.count_nonzero(near_zero) > max_goldstone:
        product_verdict = Classification.UNDETERMINED
    else:
        product_verdict = Classification.STABLE

    g1 = state.g1
    if g1 > 0 and abs(alpha_g) <= eps and not product_unstable:
        cls, route = Classification.STABLE, ROUTE_REPULSIVE_ALPHA_ZERO
    elif g1 > 0 and alpha_g < -eps and beta_g > eps:
        cls, route = Classification.UNSTABLE, ROUTE_REPULSIVE_ALPHA_NEG_BETA_POS
    elif g1 < 0 and abs(alpha_g) <= eps:
        cls, route = Classification.UNSTABLE, ROUTE_ATTRACTIVE_ALPHA_ZERO
    else:
        cls, route = product_verdict, ROUTE_PRODUCT
    if cls is Classification.STABLE:
        lam = 0.0
    return StabilityVerdict(
        classification=cls,
        route=route,
        alpha_g=alpha_g,
        beta_g=beta_g,
        min_product_eigenvalue_real_part=min_re,
        has_complex_product_eigenvalue=has_complex,
        lambda_growth=lam,
        mu=state.mu,
        mu_s=mu_stability(state),
        instability_band=mu_instability_band(state),
        eps=float(eps),
        g1=g1,
    )


# -- eigenmodes of the coupled system ---------------------------------------

@dataclass(frozen=True, eq=False)
class ProductMode:
    """Real eigenpair of ``L3 phi1 = lambda2 phi2``, ``L1 phi2 = lambda1 phi1``.

    Normalized so that ``phi1`` and ``phi2`` have equal discrete L2 norm and
    ``lambda2 >= 0``; ``nu = lambda1 * lambda2`` is the product eigenvalue.
    """
    nu: float
    lambda1: float
    lambda2: float
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)


def product_modes(state: StationaryState, eps: float | None = None) -> list[ProductMode | None]:
    """Eigenpairs for every product eigenvalue, sorted like :func:`product_spectrum`.

    Entries are ``None`` where the eigenvalue is complex or the pair cannot be
    formed (``L3 phi1 = 0``).
    """
    L1, L3 = build_Ln(state, 1), build_Ln(state, 3)
    if eps is None:
        eps = default_eps(L1, L3)
    vals, vecs = np.linalg.eig(L1.entries @ L3.entries)
    order = np.lexsort((vals.imag, vals.real))
    h = state.grid.spacing
    out: list[ProductMode | None] = []
    for j in order:
        nu = vals[j]
        if abs(nu.imag) > eps:
            out.append(None)
            continue
        v = vecs[:, j]
        # real eigenvalue of a real matrix: pick the dominant real direction
        v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
        phi1 = v / math.sqrt(h * np.dot(v, v))
        w = L3.entries @ phi1
        lam2 = math.sqrt(h * np.dot(w, w))
        if lam2 <= eps:
            out.append(None)
            continue
        phi2 = w / lam2
        lam1 = float(nu.real) / lam2
        out.append(ProductMode(float(nu.real), lam1, lam2, phi1, phi2))
    return out


# -- serialization ----------------------------------------------------------

def verdicts_to_csv(records: Iterable[dict], fields: tuple[str, ...] = VERDICT_FIELDS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: format_value(rec.get(k)) for k in fields})
    return buf.getvalue()


def verdict_to_json(verdict: StabilityVerdict) -> str:
    rec = verdict.as_record()
    rec = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}
    return json.dumps(rec, indent=1)


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.12g}"
    return str(v)
