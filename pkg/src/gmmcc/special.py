"""Standard normal primitives: density, CDF, inverse CDF and second derivative."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
INV_SQRT_2 = 1.0 / math.sqrt(2.0)
# |Phi''| attains this at z = +-1.
PHI_SECOND_MAX = math.exp(-0.5) * INV_SQRT_2PI

CDF_CLAMP = 40.0
INV_CDF_MAX_ITER = 200


def _check_finite(z: float) -> float:
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"argument must be finite, got {z!r}")
    return z


def std_normal_pdf(z: float) -> float:
    z = _check_finite(z)
    return INV_SQRT_2PI * math.exp(-0.5 * z * z)


def std_normal_cdf(z: float) -> float:
    """Phi(z) via the complementary error function.

    erfc keeps full relative accuracy in the lower tail, so Phi(z) and
    1 - Phi(z) = Phi(-z) are both accurate. Arguments beyond +-40 clamp
    to exactly 0 or 1.
    """
    z = _check_finite(z)
    if z <= -CDF_CLAMP:
        return 0.0
    if z >= CDF_CLAMP:
        return 1.0
    return 0.5 * math.erfc(-z * INV_SQRT_2)


def std_normal_sf(z: float) -> float:
    """Upper tail 1 - Phi(z), computed without cancellation."""
    return std_normal_cdf(-_check_finite(z))


def phi_second(z: float) -> float:
    """Second derivative of Phi, equal to -z * phi(z)."""
    z = _check_finite(z)
    return -z * std_normal_pdf(z)


def std_normal_inv_cdf(p: float) -> float:
    """Quantile of the standard normal by bisection on :func:`std_normal_cdf`."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"probability must lie in (0, 1), got {p!r}")
    lo, hi = -CDF_CLAMP, CDF_CLAMP
    for _ in range(INV_CDF_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if std_normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    # pick the side whose CDF is closer to p
    if abs(std_normal_cdf(lo) - p) < abs(std_normal_cdf(hi) - p):
        return lo
    return hi


def tail_endpoint(tail_mass: float, resolution: float = 1e-6) -> float:
    """Smallest z on a `resolution` grid with 1 - Phi(z) <= tail_mass.

    The symmetric left endpoint is the negation of the result.
    """
    tail_mass = float(tail_mass)
    if not (0.0 < tail_mass < 0.5):
        raise DomainError(f"tail mass must lie in (0, 0.5), got {tail_mass!r}")
    lo, hi = 0.0, CDF_CLAMP
    for _ in range(INV_CDF_MAX_ITER):
        if hi - lo < 0.1 * resolution:
            break
        mid = 0.5 * (lo + hi)
        if std_normal_sf(mid) <= tail_mass:
            hi = mid
        else:
            lo = mid
    z = math.ceil(hi / resolution - 1e-9) * resolution
    # walk down while the grid point below still qualifies
    while z - resolution > 0 and std_normal_sf(z - resolution) <= tail_mass:
        z -= resolution
    while std_normal_sf(z) > tail_mass:
        z += resolution
    return z


@dataclass(frozen=True)
class NormalEval:
    z: float
    pdf: float
    cdf: float
    second_deriv: float


def normal_eval(z: float) -> NormalEval:
    pdf = std_normal_pdf(z)
    return NormalEval(z=float(z), pdf=pdf, cdf=std_normal_cdf(z), second_deriv=-float(z) * pdf)


_erfc_ufunc = np.frompyfunc(math.erfc, 1, 1)


def cdf_array(z) -> np.ndarray:
    """Vectorised :func:`std_normal_cdf` with identical values element-wise."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("arguments must be finite")
    out = 0.5 * _erfc_ufunc(-z * INV_SQRT_2).astype(float)
    out[z <= -CDF_CLAMP] = 0.0
    out[z >= CDF_CLAMP] = 1.0
    return out


def pdf_array(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)
