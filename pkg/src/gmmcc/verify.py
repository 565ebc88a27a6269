"""Solution checks, comparison metrics, a grid oracle for tiny instances, and audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError, DomainError
from .gmm import GmmInstance, chance_probability, chance_probability_batch, sample, z_values
from .pwl import DEFAULT_Z_LEFT, DEFAULT_Z_RIGHT, build_pwl, inner_breakpoints, outer_breakpoints
from .special import cdf_array

REGION_TOL = 1e-8
# rounding allowance for the one-sided sandwich comparisons
AUDIT_SLACK = 1e-12
GRID_CHUNK = 1 << 20


@dataclass
class VerificationReport:
    objective: float
    theta_check: float
    region_ok: bool
    region_violation: float
    tau_hat: float
    tau_feasible: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify(inst: GmmInstance, x, tau_hat: float = 0.0) -> VerificationReport:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != inst.n:
        raise DomainError(f"solution has {x.size} entries, instance has n = {inst.n}")
    if tau_hat < 0.0:
        raise DomainError("tau_hat must be nonnegative")
    viol = inst.region.max_violation(x)
    region_ok = viol <= REGION_TOL
    theta_check = chance_probability(inst, x)
    feasible = region_ok and theta_check >= inst.theta - tau_hat
    notes = []
    if not region_ok:
        notes.append(f"region rows violated by {viol:.3g}")
    if theta_check < inst.theta - tau_hat:
        notes.append(f"probability {theta_check:.6g} below theta - tau_hat = {inst.theta - tau_hat:.6g}")
    return VerificationReport(float(inst.c @ x), theta_check, region_ok, viol, float(tau_hat), feasible, notes)


@dataclass
class ComparisonMetrics:
    pct_obj: float
    pct_theta: float
    notes: list[str] = field(default_factory=list)


def compare(inst: GmmInstance, x_inner, x_outer) -> ComparisonMetrics:
    """Relative objective gap and probability gap between inner and outer solutions.

    pct_obj = max(c'(xI - xO), 0) / c'xI * 100 and
    pct_theta = (pI - pO) / theta * 100, both exactly as defined; when
    c'xI < 0 the objective gap comes out nonpositive and a note says so.
    """
    xi = np.asarray(x_inner, dtype=float).reshape(-1)
    xo = np.asarray(x_outer, dtype=float).reshape(-1)
    if xi.size != inst.n or xo.size != inst.n:
        raise DomainError("both solutions must have length n")
    obj_i = float(inst.c @ xi)
    if obj_i == 0.0:
        raise DomainError("relative objective gap is undefined when c'x_inner = 0")
    pct_obj = max(float(inst.c @ (xi - xo)), 0.0) / obj_i * 100.0
    pct_theta = (chance_probability(inst, xi) - chance_probability(inst, xo)) / inst.theta * 100.0
    notes = []
    if obj_i < 0.0:
        notes.append("c'x_inner is negative, so pct_obj carries the opposite sign of the gap")
    return ComparisonMetrics(pct_obj, pct_theta, notes)


def _axes(lo: np.ndarray, hi: np.ndarray, resolution: int) -> list[np.ndarray]:
    # resolution intervals per axis, endpoints included, so doubling nests grids
    return [lo[i] + (hi[i] - lo[i]) * np.arange(resolution + 1) / resolution for i in range(lo.size)]


def _feasible_mask(inst: GmmInstance, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    probs = np.empty(X.shape[0])
    for s in range(0, X.shape[0], GRID_CHUNK):
        probs[s : s + GRID_CHUNK] = chance_probability_batch(inst, X[s : s + GRID_CHUNK])
    return inst.region.contains_batch(X, REGION_TOL) & (probs >= inst.theta), probs


def _best(inst: GmmInstance, X: np.ndarray):
    ok, probs = _feasible_mask(inst, X)
    if not ok.any():
        return None
    cand = np.flatnonzero(ok)
    obj = X[cand] @ inst.c
    # minimum objective, ties broken lexicographically on x
    order = np.lexsort(tuple(X[cand][:, j] for j in reversed(range(X.shape[1]))) + (obj,))
    j = cand[order[0]]
    return X[j].copy(), float(obj[order[0]]), float(probs[j])


@dataclass
class DeskSolveResult:
    feasible: bool
    x: np.ndarray | None
    objective: float | None
    theta_check: float | None
    cell_diameter: float


def desk_solve(inst: GmmInstance, resolution: int = 64, refine_rounds: int = 0) -> DeskSolveResult:
    """Brute-force grid minimization for n <= 3, then local grid refinement.

    The box is cut into `resolution` intervals per axis. Each refinement
    round halves the spacing on a 9-point-per-axis patch around the
    incumbent. The result is optimal only up to the final cell diameter.
    """
    if inst.n > 3:
        raise DomainError("desk_solve handles n <= 3 only")
    if resolution < 16:
        raise DomainError("resolution must be at least 16")
    lo, hi = inst.region.box_lo, inst.region.box_hi
    grid = np.stack([g.ravel() for g in np.meshgrid(*_axes(lo, hi, resolution), indexing="ij")], axis=1)
    step = (hi - lo) / resolution
    best = _best(inst, grid)
    if best is None:
        return DeskSolveResult(False, None, None, None, float(np.linalg.norm(step)))
    x, obj, prob = best
    offsets = np.arange(-4, 5)
    for _ in range(refine_rounds):
        step = step / 2.0
        axes = [np.clip(x[i] + step[i] * offsets, lo[i], hi[i]) for i in range(inst.n)]
        patch = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        cand = _best(inst, patch)
        if cand is not None and (cand[1], tuple(cand[0])) < (obj, tuple(x)):
            x, obj, prob = cand
    return DeskSolveResult(True, x, obj, prob, float(np.linalg.norm(step)))


def probability_grid(inst: GmmInstance, resolution: int) -> tuple[list[np.ndarray], np.ndarray]:
    """p(x) on the (resolution + 1)^n box grid, shaped per axis."""
    axes = _axes(inst.region.box_lo, inst.region.box_hi, resolution)
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    probs = np.empty(grid.shape[0])
    for s in range(0, grid.shape[0], GRID_CHUNK):
        probs[s : s + GRID_CHUNK] = chance_probability_batch(inst, grid[s : s + GRID_CHUNK])
    return axes, probs.reshape([a.size for a in axes])


@dataclass
class NonconvexityWitness:
    x_a: np.ndarray
    x_b: np.ndarray
    level: float
    p_a: float
    p_b: float
    p_mid: float


def find_nonconvexity_witness(inst: GmmInstance, resolution: int = 256, min_margin: float = 1e-9):
    """Grid points x_a, x_b whose midpoint (also a grid point) has lower p than both.

    Such a triple shows the superlevel set {p >= level} is not convex for
    level = min(p(x_a), p(x_b)). Returns the largest-margin triple found
    over a ladder of symmetric offsets, or None.
    """
    if inst.n != 2:
        raise DomainError("nonconvexity scan is implemented for n = 2")
    axes, P = probability_grid(inst, resolution)
    size = P.shape[0]
    dirs = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
    best = None
    scale = 1
    while scale <= size // 2:
        for dx, dy in dirs:
            ox, oy = dx * scale, dy * scale
            if abs(ox) >= size // 2 + 1 or abs(oy) >= size // 2 + 1:
                continue
            # midpoints m with m - o and m + o on the grid
            xs = slice(abs(ox), size - abs(ox))
            ys = slice(abs(oy), size - abs(oy))
            mid = P[xs, ys]
            a = P[xs.start - ox : xs.stop - ox, ys.start - oy : ys.stop - oy]
            b = P[xs.start + ox : xs.stop + ox, ys.start + oy : ys.stop + oy]
            margin = np.minimum(a, b) - mid
            flat = int(np.argmax(margin))
            if margin.flat[flat] > min_margin and (best is None or margin.flat[flat] > best[0]):
                i, j = np.unravel_index(flat, margin.shape)
                mi, mj = i + xs.start, j + ys.start
                best = (float(margin.flat[flat]), (mi - ox, mj - oy), (mi + ox, mj + oy), (mi, mj))
        scale *= 2
    if best is None:
        return None
    _, ia, ib, im = best
    xa = np.array([axes[0][ia[0]], axes[1][ia[1]]])
    xb = np.array([axes[0][ib[0]], axes[1][ib[1]]])
    pa, pb, pm = float(P[ia]), float(P[ib]), float(P[im])
    return NonconvexityWitness(xa, xb, min(pa, pb), pa, pb, pm)


@dataclass
class AuditReport:
    samples: int
    skipped: int
    max_outer_gap: float
    max_inner_gap: float
    tau: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sandwich_audit(
    inst: GmmInstance,
    tau: float,
    sample_count: int,
    rng: np.random.Generator,
    z_left: float = DEFAULT_Z_LEFT,
    z_right: float = DEFAULT_Z_RIGHT,
) -> AuditReport:
    """Check inner <= exact <= outer mixture probabilities at random box points.

    Raises CertificationError with the offending x on the first violation
    of ordering (beyond a 1e-12 rounding allowance) or of the tau gap.
    """
    if not tau > 0.0:
        raise DomainError("tau must be positive")
    outer = build_pwl(outer_breakpoints(tau, z_left, z_right))
    inner = build_pwl(inner_breakpoints(tau, z_left, z_right))
    X = rng.uniform(inst.region.box_lo, inst.region.box_hi, size=(sample_count, inst.n))
    zero = ~np.any(X, axis=1)
    X = X[~zero]
    Z = z_values(inst, X)
    w = inst.weights
    exact = cdf_array(np.clip(Z, -50.0, 50.0)) @ w
    upper = outer.evaluate_array(Z) @ w
    lower = inner.evaluate_array(Z) @ w
    checks = (
        (exact - upper, "outer surrogate below exact probability", AUDIT_SLACK),
        (lower - exact, "inner surrogate above exact probability", AUDIT_SLACK),
        (upper - exact, "outer gap exceeds tau", tau),
        (exact - lower, "inner gap exceeds tau", tau),
    )
    for diff, what, limit in checks:
        bad = np.flatnonzero(diff > limit)
        if bad.size:
            j = bad[0]
            raise CertificationError(f"{what} ({diff[j]!r}) at sample {j}", x=X[j].tolist())
    return AuditReport(
        samples=int(X.shape[0]),
        skipped=int(zero.sum()),
        max_outer_gap=float(np.max(upper - exact, initial=0.0)),
        max_inner_gap=float(np.max(exact - lower, initial=0.0)),
        tau=float(tau),
    )


def mc_probability(inst: GmmInstance, x, draws: int, rng: np.random.Generator) -> tuple[float, float]:
    """Empirical P[xi' x <= b] from `draws` mixture samples, with its binomial standard error."""
    if draws < 100:
        raise DomainError("draws must be at least 100")
    x = np.asarray(x, dtype=float).reshape(-1)
    xi = sample(inst, draws, rng)
    est = float(np.mean(xi @ x <= inst.b))
    return est, math.sqrt(est * (1.0 - est) / draws)


__all__ = [
    "AuditReport",
    "ComparisonMetrics",
    "DeskSolveResult",
    "NonconvexityWitness",
    "VerificationReport",
    "compare",
    "desk_solve",
    "find_nonconvexity_witness",
    "mc_probability",
    "probability_grid",
    "sandwich_audit",
    "verify",
]
