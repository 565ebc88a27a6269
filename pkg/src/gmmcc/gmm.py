"""Gaussian-mixture chance-constraint data, exact probability, gradient and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UndefinedGradientError, ValidationError
from .special import cdf_array, std_normal_cdf, std_normal_pdf

INSTANCE_SCHEMA = "gmmcc-instance-v1"
WEIGHT_SUM_TOL = 1e-12
PD_PIVOT_RTOL = 1e-12
# below this norm the gradient is taken as its x -> 0 limit
GRAD_ZERO_RADIUS = 1e-12


def _factor(cov: np.ndarray) -> np.ndarray | None:
    """Lower Cholesky factor, or None when cov is not numerically PD."""
    n = cov.shape[0]
    if not np.all(np.isfinite(cov)) or not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        return None
    tr = float(np.trace(cov))
    if tr <= 0.0:
        return None
    try:
        low = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None
    pivot = PD_PIVOT_RTOL * tr / n
    if np.any(np.diag(low) ** 2 <= pivot):
        return None
    return low


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray
    factor: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        low = _factor(cov)
        if low is not None:
            low.setflags(write=False)
        object.__setattr__(self, "factor", low)

    @property
    def n(self) -> int:
        return self.mean.size

    @property
    def is_pd(self) -> bool:
        return self.factor is not None

    def require_factor(self) -> np.ndarray:
        if self.factor is None:
            raise ValidationError("covariance is not positive definite")
        return self.factor

    def std(self, x: np.ndarray) -> float:
        """sqrt(x' Sigma x) as the norm of factor' x."""
        return float(np.linalg.norm(self.require_factor().T @ x))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """{x : A x >= d, H x = h, box_lo <= x <= box_hi}."""

    A: np.ndarray
    d: np.ndarray
    H: np.ndarray
    h: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.box_lo).size
        for name, rows in (("A", "d"), ("H", "h")):
            mat = np.array(getattr(self, name), dtype=float).reshape(-1, n)
            vec = np.array(getattr(self, rows), dtype=float).reshape(-1)
            if mat.shape[0] != vec.size:
                raise DomainError(f"{name} has {mat.shape[0]} rows but {rows} has {vec.size} entries")
            mat.setflags(write=False)
            vec.setflags(write=False)
            object.__setattr__(self, name, mat)
            object.__setattr__(self, rows, vec)
        for name in ("box_lo", "box_hi"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.box_hi.size != n:
            raise DomainError("box bounds differ in length")

    @classmethod
    def box(cls, lo, hi) -> Polyhedron:
        lo = np.asarray(lo, dtype=float)
        n = lo.size
        return cls(np.zeros((0, n)), np.zeros(0), np.zeros((0, n)), np.zeros(0), lo, hi)

    @property
    def n(self) -> int:
        return self.box_lo.size

    def max_violation(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if self.A.shape[0]:
            parts.append(float(np.max(self.d - self.A @ x)))
        if self.H.shape[0]:
            parts.append(float(np.max(np.abs(self.H @ x - self.h))))
        parts.append(float(np.max(self.box_lo - x)))
        parts.append(float(np.max(x - self.box_hi)))
        return max(parts)

    def contains_batch(self, X: np.ndarray, tol: float = 1e-8) -> np.ndarray:
        X = np.atleast_2d(X)
        ok = np.all(X >= self.box_lo - tol, axis=1) & np.all(X <= self.box_hi + tol, axis=1)
        if self.A.shape[0]:
            ok &= np.all(X @ self.A.T >= self.d - tol, axis=1)
        if self.H.shape[0]:
            ok &= np.all(np.abs(X @ self.H.T - self.h) <= tol, axis=1)
        return ok


@dataclass(frozen=True, eq=False)
class GmmInstance:
    c: np.ndarray
    b: float
    theta: float
    components: tuple[GaussianComponent, ...]
    region: Polyhedron

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([comp.weight for comp in self.components])

    def with_b(self, b: float) -> GmmInstance:
        return GmmInstance(self.c, b, self.theta, self.components, self.region)

    def to_dict(self) -> dict:
        r = self.region
        return {
            "schema": INSTANCE_SCHEMA,
            "n": self.n,
            "K": self.K,
            "theta": self.theta,
            "b": self.b,
            "c": self.c.tolist(),
            "components": [
                {"weight": comp.weight, "mean": comp.mean.tolist(), "covariance": comp.covariance.tolist()}
                for comp in self.components
            ],
            "region": {
                "A": r.A.tolist(),
                "d": r.d.tolist(),
                "H": r.H.tolist(),
                "h": r.h.tolist(),
                "box_lo": r.box_lo.tolist(),
                "box_hi": r.box_hi.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> GmmInstance:
        if data.get("schema") != INSTANCE_SCHEMA:
            raise ValidationError(f"expected schema {INSTANCE_SCHEMA!r}, got {data.get('schema')!r}")
        try:
            n = int(data["n"])
            comps = [
                GaussianComponent(cd["weight"], cd["mean"], np.array(cd["covariance"], dtype=float).reshape(n, n))
                for cd in data["components"]
            ]
            reg = data["region"]
            region = Polyhedron(
                np.array(reg["A"], dtype=float).reshape(-1, n),
                reg["d"],
                np.array(reg["H"], dtype=float).reshape(-1, n),
                reg["h"],
                reg["box_lo"],
                reg["box_hi"],
            )
            inst = cls(data["c"], data["b"], data["theta"], comps, region)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed instance document: {exc}") from exc
        if inst.n != n or inst.K != int(data["K"]):
            raise ValidationError("n/K header disagrees with the data")
        return inst


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n:
        raise DomainError(f"x has length {x.size}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    return x


def component_probability(comp: GaussianComponent, x, b: float) -> float:
    """P[xi' x <= b] for one Gaussian component."""
    x = _as_vector(x, comp.n)
    if not np.any(x):
        return 1.0 if b >= 0.0 else 0.0
    s = comp.std(x)
    if not s > 0.0:
        raise ValidationError("x' Sigma x vanished for nonzero x; covariance is not positive definite")
    return std_normal_cdf((b - float(comp.mean @ x)) / s)


def chance_probability(inst: GmmInstance, x) -> float:
    x = _as_vector(x, inst.n)
    total = math.fsum(comp.weight * component_probability(comp, x, inst.b) for comp in inst.components)
    return min(1.0, max(0.0, total))


def z_values(inst: GmmInstance, X) -> np.ndarray:
    """Standardized margins z_k(x) = (b - mu_k' x)/sqrt(x' Sigma_k x), one row per x.

    Rows for x = 0 are +inf when b >= 0 and -inf otherwise, matching the
    indicator convention of the exact probability.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((X.shape[0], inst.K))
    zero = ~np.any(X, axis=1)
    for k, comp in enumerate(inst.components):
        s = np.linalg.norm(X @ comp.require_factor(), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, k] = (inst.b - X @ comp.mean) / s
    out[zero] = math.inf if inst.b >= 0.0 else -math.inf
    return out


def chance_probability_batch(inst: GmmInstance, X) -> np.ndarray:
    z = z_values(inst, X)
    clipped = np.clip(z, -50.0, 50.0)
    return np.clip(cdf_array(clipped) @ inst.weights, 0.0, 1.0)


def chance_gradient(inst: GmmInstance, x) -> np.ndarray:
    """Gradient of p(x); zero near x = 0 when b > 0."""
    x = _as_vector(x, inst.n)
    if np.linalg.norm(x) < GRAD_ZERO_RADIUS:
        if inst.b > 0.0:
            return np.zeros(inst.n)
        raise UndefinedGradientError("gradient of p is undefined at x = 0 when b <= 0")
    grad = np.zeros(inst.n)
    for comp in inst.components:
        sx = comp.covariance @ x
        s = comp.std(x)
        margin = inst.b - float(comp.mean @ x)
        g = margin / s
        dg = -comp.mean / s - margin * sx / s**3
        grad += comp.weight * std_normal_pdf(g) * dg
    return grad


def sample(inst: GmmInstance, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` mixture samples.

    Draw order: component labels (one choice call), then a count x n block
    of standard normals; row i becomes mu_k + L_k g_i for its label k.
    """
    if count < 1:
        raise DomainError("count must be at least 1")
    labels = rng.choice(inst.K, size=count, p=inst.weights / inst.weights.sum())
    g = rng.standard_normal((count, inst.n))
    out = np.empty_like(g)
    for k, comp in enumerate(inst.components):
        idx = labels == k
        out[idx] = comp.mean + g[idx] @ comp.require_factor().T
    return out


def validate_instance(inst: GmmInstance) -> list[str]:
    diags = []
    w = inst.weights
    if inst.K < 1:
        diags.append("instance has no mixture components")
    if inst.n < 1:
        diags.append("dimension n must be at least 1")
    if not np.all(np.isfinite(w)):
        diags.append("weights are not finite")
    else:
        if np.any(w < 0.0):
            diags.append(f"negative weights at indices {np.flatnonzero(w < 0).tolist()}")
        if abs(math.fsum(w) - 1.0) > WEIGHT_SUM_TOL:
            diags.append(f"weights sum to {math.fsum(w)!r}, not 1")
    if not 0.0 < inst.theta < 1.0:
        diags.append(f"theta {inst.theta!r} is outside (0, 1)")
    if not (math.isfinite(inst.b) and np.all(np.isfinite(inst.c))):
        diags.append("objective or rhs b is not finite")
    for k, comp in enumerate(inst.components):
        if comp.n != inst.n:
            diags.append(f"component {k}: mean has length {comp.n}, expected {inst.n}")
            continue
        if not np.all(np.isfinite(comp.mean)) or not np.all(np.isfinite(comp.covariance)):
            diags.append(f"component {k}: non-finite mean or covariance")
        elif not comp.is_pd:
            diags.append(f"component {k}: covariance is not symmetric positive definite")
    r = inst.region
    if r.n != inst.n:
        diags.append(f"region dimension {r.n} differs from n = {inst.n}")
    else:
        arrays = (r.A, r.d, r.H, r.h, r.box_lo, r.box_hi)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            diags.append("region data is not finite")
        elif np.any(r.box_lo >= r.box_hi):
            diags.append("box_lo must be strictly below box_hi in every coordinate")
    return diags


def require_valid(inst: GmmInstance) -> None:
    diags = validate_instance(inst)
    if diags:
        raise ValidationError("invalid instance: " + "; ".join(diags), diags)
