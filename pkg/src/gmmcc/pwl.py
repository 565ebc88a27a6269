"""Breakpoint arrays and tangent/secant piecewise-linear bounds on Phi.

OUTER arrays give an over-estimator (tangents on z >= 0, secants on z < 0);
INNER arrays give an under-estimator (secants on z >= 0, tangents on z < 0).
Both are certified to stay within ``tau`` of Phi on the whole real line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError, DomainError, UsageError
from .special import (
    PHI_SECOND_MAX,
    cdf_array,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_sf,
    tail_endpoint,
)

DEFAULT_Z_LEFT = -6.466
DEFAULT_Z_RIGHT = 6.466
MERGE_TOL = 1e-12
# rounding allowance when checking one-sidedness at knots
ONE_SIDED_SLACK = 1e-15
# relative allowance when re-checking gap conditions on float breakpoints
GAP_RTOL = 1e-12


class Kind(str, enum.Enum):
    OUTER = "outer"
    INNER = "inner"


def default_tau(theta: float) -> float:
    return (1.0 - theta) / 10.0


def curvature_bound(a: float, b: float) -> float:
    """max |Phi''| over [a, b]; |Phi''(z)| = |z| phi(z) peaks at |z| = 1."""
    if a > b:
        a, b = b, a
    if a <= 1.0 <= b or a <= -1.0 <= b:
        return PHI_SECOND_MAX
    return max(abs(a) * std_normal_pdf(a), abs(b) * std_normal_pdf(b))


def max_gap(tau: float, a: float, b: float, doubled: bool) -> float:
    """Largest admissible width of [a, b] under the tau error condition."""
    c = curvature_bound(a, b)
    w = math.sqrt(2.0 * tau / c)
    return 2.0 * w if doubled else w


@dataclass(frozen=True)
class BreakpointArray:
    points: tuple[float, ...]
    tau: float
    kind: Kind

    @property
    def left_count(self) -> int:
        return self.points.index(0.0)

    @property
    def right_count(self) -> int:
        return len(self.points) - 1 - self.left_count

    L = left_count
    R = right_count

    @property
    def z_left(self) -> float:
        return self.points[0]

    @property
    def z_right(self) -> float:
        return self.points[-1]

    def __len__(self) -> int:
        return len(self.points)

    def at(self, i: int) -> float:
        """Breakpoint with signed index i in [-L, R]."""
        return self.points[self.left_count + i]

    def gap_violations(self) -> list[str]:
        """Check every invariant; an empty list means the array is valid."""
        pts = self.points
        out = []
        if 0.0 not in pts:
            return ["array does not contain 0"]
        if any(b <= a for a, b in zip(pts, pts[1:])):
            out.append("points are not strictly increasing")
        if not (pts[0] < 0.0 < pts[-1]):
            out.append("endpoints do not straddle 0")
        # tangent side uses single-width gaps, secant side doubled
        right_doubled = self.kind is Kind.INNER
        for a, b in zip(pts, pts[1:]):
            doubled = right_doubled if a >= 0.0 else not right_doubled
            limit = max_gap(self.tau, a, b, doubled)
            if b - a > limit * (1.0 + GAP_RTOL):
                out.append(f"gap [{a!r}, {b!r}] exceeds {limit!r}")
        tail = max(std_normal_sf(pts[-1]), std_normal_cdf(pts[0]))
        if tail > self.tau:
            out.append(f"tail mass {tail!r} exceeds tau {self.tau!r}")
        return out

    def to_dict(self) -> dict:
        return {
            "schema": "gmmcc-breakpoints-v1",
            "kind": self.kind.value,
            "tau": self.tau,
            "L": self.left_count,
            "R": self.right_count,
            "points": list(self.points),
        }

    @classmethod
    def from_dict(cls, data: dict) -> BreakpointArray:
        bp = cls(tuple(float(p) for p in data["points"]), float(data["tau"]), Kind(data["kind"]))
        if bp.left_count != data.get("L", bp.left_count) or bp.right_count != data.get("R", bp.right_count):
            raise DomainError("L/R counts disagree with the stored points")
        return bp


def _march(tau: float, start: float, stop: float, doubled: bool) -> list[float]:
    """Points from `start` (= +-1) toward `stop`, excluding both ends.

    Each step uses |Phi''| at the current point, which is the largest
    curvature on the next interval because |Phi''| is monotone on each of
    [0, 1] and [1, inf) (and their mirrors).
    """
    direction = 1.0 if stop > start else -1.0
    factor = 2.0 if doubled else 1.0
    out = []
    cur = start
    while True:
        step = factor * math.sqrt(2.0 * tau / (std_normal_pdf(cur) * abs(cur)))
        nxt = cur + direction * step
        if (nxt - stop) * direction >= 0.0:
            return out
        out.append(nxt)
        cur = nxt


def _side(tau: float, endpoint: float, doubled: bool) -> list[float]:
    """One half-line of breakpoints: 0, the inner part, +-1, outer part, endpoint."""
    unit = 1.0 if endpoint > 0 else -1.0
    inner = _march(tau, unit, 0.0, doubled)
    outer = _march(tau, unit, endpoint, doubled)
    return [0.0, *inner, unit, *outer, endpoint]


def _merge(points: list[float]) -> tuple[float, ...]:
    pts = sorted(points)
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > MERGE_TOL:
            merged.append(p)
        elif p == 0.0:
            merged[-1] = 0.0
    return tuple(merged)


def _build(tau: float, z_left: float, z_right: float, kind: Kind) -> BreakpointArray:
    tau = float(tau)
    if not (tau > 0.0) or not math.isfinite(tau):
        raise DomainError(f"tau must be positive, got {tau!r}")
    if z_left > -1.0 or z_right < 1.0:
        raise DomainError("endpoints must satisfy z_left <= -1 and z_right >= 1")
    tail = max(std_normal_sf(z_right), std_normal_cdf(z_left))
    if tail > tau:
        raise DomainError(f"endpoint tail mass {tail!r} exceeds tau {tau!r}")
    right_doubled = kind is Kind.INNER
    pts = _side(tau, z_right, right_doubled) + _side(tau, z_left, not right_doubled)
    return BreakpointArray(_merge(pts), tau, kind)


def outer_breakpoints(tau: float, z_left: float = DEFAULT_Z_LEFT, z_right: float = DEFAULT_Z_RIGHT) -> BreakpointArray:
    """Breakpoints for the tangent (z >= 0) / secant (z < 0) over-estimator."""
    return _build(tau, z_left, z_right, Kind.OUTER)


def inner_breakpoints(tau: float, z_left: float = DEFAULT_Z_LEFT, z_right: float = DEFAULT_Z_RIGHT) -> BreakpointArray:
    """Breakpoints for the secant (z >= 0) / tangent (z < 0) under-estimator."""
    return _build(tau, z_left, z_right, Kind.INNER)


def breakpoints(kind: Kind | str, tau: float, z_left: float = DEFAULT_Z_LEFT, z_right: float = DEFAULT_Z_RIGHT) -> BreakpointArray:
    return _build(tau, z_left, z_right, Kind(kind))


def _tangent(z0: float) -> tuple[float, float]:
    slope = std_normal_pdf(z0)
    return slope, std_normal_cdf(z0) - slope * z0


def _secant(a: float, b: float) -> tuple[float, float]:
    fa, fb = std_normal_cdf(a), std_normal_cdf(b)
    slope = (fb - fa) / (b - a)
    return slope, fa - slope * a


@dataclass(frozen=True)
class PwlApprox:
    """Slope/intercept pairs of the right (g) and left (h) pieces.

    OUTER: right_coeffs[i] is the tangent at z_i for i = 0..R and
    left_coeffs[i-1] the secant over [z_{-i}, z_{-i+1}] for i = 1..L.
    INNER: right_coeffs[i-1] is the secant over [z_{i-1}, z_i] for
    i = 1..R and left_coeffs[i] the tangent at z_{-i} for i = 0..L.
    """

    breakpoints: BreakpointArray
    right_coeffs: tuple[tuple[float, float], ...]
    left_coeffs: tuple[tuple[float, float], ...]
    kind: Kind
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def tau(self) -> float:
        return self.breakpoints.tau

    @property
    def right_cap(self) -> float:
        """Constant cap for z >= 0: 1 (OUTER) or Phi(z_R) (INNER)."""
        return 1.0 if self.kind is Kind.OUTER else std_normal_cdf(self.breakpoints.z_right)

    @property
    def left_floor(self) -> float:
        """Constant floor for z < 0: Phi(z_{-L}) (OUTER) or 0 (INNER)."""
        return std_normal_cdf(self.breakpoints.z_left) if self.kind is Kind.OUTER else 0.0

    def _coeff_arrays(self):
        if not self._arrays:
            self._arrays["g"] = np.array(self.right_coeffs, dtype=float)
            self._arrays["h"] = np.array(self.left_coeffs, dtype=float)
        return self._arrays["g"], self._arrays["h"]

    def evaluate(self, z: float) -> float:
        z = float(z)
        if not math.isfinite(z):
            raise DomainError("z must be finite")
        if z >= 0.0:
            return min(self.right_cap, min(s * z + c for s, c in self.right_coeffs))
        return max(self.left_floor, max(s * z + c for s, c in self.left_coeffs))

    def evaluate_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        g, h = self._coeff_arrays()
        flat = z.ravel()
        right = np.minimum(self.right_cap, (np.outer(flat, g[:, 0]) + g[:, 1]).min(axis=1))
        left = np.maximum(self.left_floor, (np.outer(flat, h[:, 0]) + h[:, 1]).max(axis=1))
        return np.where(flat >= 0.0, right, left).reshape(z.shape)


def build_pwl(bp: BreakpointArray) -> PwlApprox:
    L, R = bp.left_count, bp.right_count
    if bp.kind is Kind.OUTER:
        right = tuple(_tangent(bp.at(i)) for i in range(R + 1))
        left = tuple(_secant(bp.at(-i), bp.at(-i + 1)) for i in range(1, L + 1))
    else:
        right = tuple(_secant(bp.at(i - 1), bp.at(i)) for i in range(1, R + 1))
        left = tuple(_tangent(bp.at(-i)) for i in range(L + 1))
    return PwlApprox(bp, right, left, bp.kind)


def eval_outer(pwl: PwlApprox, z: float) -> float:
    if pwl.kind is not Kind.OUTER:
        raise UsageError("eval_outer needs an OUTER approximation")
    return pwl.evaluate(z)


def eval_inner(pwl: PwlApprox, z: float) -> float:
    if pwl.kind is not Kind.INNER:
        raise UsageError("eval_inner needs an INNER approximation")
    return pwl.evaluate(z)


def certify_error(pwl: PwlApprox, grid_step: float = 1e-3) -> float:
    """Scan [z_{-L} - 2, z_R + 2] and return the largest certified-direction error.

    Raises CertificationError carrying the offending z when the
    approximation crosses Phi or strays more than tau from it.
    """
    if not grid_step > 0.0:
        raise DomainError("grid_step must be positive")
    bp = pwl.breakpoints
    lo, hi = bp.z_left - 2.0, bp.z_right + 2.0
    count = int(math.floor((hi - lo) / grid_step)) + 1
    z = lo + grid_step * np.arange(count)
    z = np.union1d(z, np.array(bp.points))
    approx = pwl.evaluate_array(z)
    exact = cdf_array(z)
    dev = approx - exact if pwl.kind is Kind.OUTER else exact - approx
    worst = int(np.argmin(dev))
    if dev[worst] < -ONE_SIDED_SLACK:
        raise CertificationError(
            f"{pwl.kind.value} approximation crosses Phi at z={z[worst]!r} (deviation {dev[worst]!r})",
            z=float(z[worst]),
        )
    top = int(np.argmax(dev))
    if dev[top] > pwl.tau:
        raise CertificationError(
            f"error {dev[top]!r} exceeds tau {pwl.tau!r} at z={z[top]!r}", z=float(z[top])
        )
    return float(dev[top])


def count_bound(tau: float) -> float:
    return math.sqrt((1.0 / tau) * math.log(1.0 / tau))


def count_scaling_probe(taus, kind: Kind | str = Kind.OUTER) -> list[tuple[float, int]]:
    """Breakpoint count per tau, endpoints placed at the tau tail quantile."""
    kind = Kind(kind)
    out = []
    for tau in taus:
        zr = tail_endpoint(tau)
        bp = breakpoints(kind, tau, -zr, zr)
        out.append((float(tau), len(bp)))
    return out
