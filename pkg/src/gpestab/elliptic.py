"""Jacobi elliptic functions sn, cn, dn and the complete integral K.

Modulus convention: everything here takes the *modulus* ``k`` (so that
``sn(x, k)`` has quarter period ``K(k)``), **not** the parameter ``m = k**2``
used by scipy and Abramowitz & Stegun tables.  ``scipy.special.ellipj(x, m)``
corresponds to ``jacobi_sn_cn_dn(x, sqrt(m))``.
"""
from __future__ import annotations

import math

import numpy as np

_AGM_TOL = 1e-16
_AGM_MAXITER = 64


def _check_modulus(k: float, allow_one: bool = True) -> float:
    k = float(k)
    if not math.isfinite(k) or k < 0.0 or k > 1.0:
        raise ValueError(f"elliptic modulus k must lie in [0, 1], got {k!r}")
    if not allow_one and k == 1.0:
        raise ValueError("complete_K diverges at k = 1")
    return k


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of two positive numbers."""
    for _ in range(_AGM_MAXITER):
        if abs(a - b) <= _AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def complete_K(k: float) -> float:
    """Complete elliptic integral of the first kind, K(k) = pi / (2 agm(1, k'))."""
    k = _check_modulus(k, allow_one=False)
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    return math.pi / (2.0 * agm(1.0, kp))


def complete_E(k: float) -> float:
    """Complete elliptic integral of the second kind via the AGM c-sequence."""
    k = _check_modulus(k, allow_one=True)
    if k == 1.0:
        return 1.0
    a, b, c = 1.0, math.sqrt((1.0 - k) * (1.0 + k)), k
    total = 0.5 * c * c
    power = 0.5
    for _ in range(_AGM_MAXITER):
        if abs(c) <= _AGM_TOL * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        total += power * c * c
    return complete_K(k) * (1.0 - total)


def _landen_sequence(k: float) -> tuple[list[float], list[float]]:
    a, b, c = 1.0, math.sqrt((1.0 - k) * (1.0 + k)), k
    aa, cc = [a], [c]
    for _ in range(_AGM_MAXITER):
        if abs(c) <= _AGM_TOL * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        aa.append(a)
        cc.append(c)
    return aa, cc


def jacobi_sn_cn_dn(x, k: float):
    """Return ``(sn, cn, dn)`` at ``x`` (scalar or array) for modulus ``k``.

    Uses the descending Landen / AGM scheme: the amplitude at the bottom of
    the AGM ladder is ``2**N a_N x`` and is lifted back with
    ``2 phi_{n-1} = phi_n + asin(c_n / a_n sin phi_n)``.
    """
    k = _check_modulus(k)
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise ValueError("jacobi_sn_cn_dn requires finite arguments")
    if k == 1.0:
        sn = np.tanh(x_arr)
        sech = 1.0 / np.cosh(x_arr)
        out = (sn, sech, sech.copy())
    else:
        aa, cc = _landen_sequence(k)
        n = len(aa) - 1
        phi = (2.0 ** n) * aa[n] * x_arr
        for j in range(n, 0, -1):
            phi = 0.5 * (phi + np.arcsin(cc[j] / aa[j] * np.sin(phi)))
        sn = np.sin(phi)
        cn = np.cos(phi)
        # dn^2 = k'^2 + k^2 cn^2 avoids cancellation where dn is small
        dn = np.sqrt((1.0 - k) * (1.0 + k) + (k * cn) ** 2)
        out = (sn, cn, dn)
    if np.ndim(x) == 0:
        return tuple(float(v) for v in out)
    return out


def sn(x, k: float):
    return jacobi_sn_cn_dn(x, k)[0]


def cn(x, k: float):
    return jacobi_sn_cn_dn(x, k)[1]


def dn(x, k: float):
    return jacobi_sn_cn_dn(x, k)[2]
