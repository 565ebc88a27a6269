"""Synthetic instance generator: Givens-rotation covariances, QMC eigenvalue scales,
random means, a random covering polyhedron and a sample-averaged rhs.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64). Draw order
inside :func:`generate_instance` is fixed: means, covariances (component by
component), polyhedron, objective, rhs samples.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .gmm import GaussianComponent, GmmInstance, Polyhedron, require_valid

UNEQUAL_WEIGHTS = {
    5: (0.05, 0.1, 0.2, 0.3, 0.35),
    10: (0.001, 0.009, 0.02, 0.05, 0.08, 0.09, 0.1, 0.15, 0.2, 0.3),
    15: (0.001, 0.005, 0.009, 0.01, 0.01, 0.015, 0.02, 0.05, 0.08, 0.09, 0.1, 0.12, 0.13, 0.17, 0.19),
}
EIGEN_FLOOR = 1e-6


class WeightMode(str, enum.Enum):
    EQUAL = "equal"
    PAPER_UNEQUAL = "paper"


def default_ineq_rows(n: int) -> int:
    return n // 10 if n <= 500 else n // 20


@dataclass(frozen=True)
class GenConfig:
    n: int
    K: int
    theta: float
    varrho: float = 2.0
    varsigma: float = 2.0
    weight_mode: WeightMode = WeightMode.EQUAL
    seed: int = 0
    box_half_width: float = 20.0
    ineq_rows: int | None = None
    b_samples: int = 1000
    b_stddev_multiplier: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        if self.n < 1 or self.K < 1:
            raise DomainError("n and K must be positive")
        if not 0.0 < self.theta < 1.0:
            raise DomainError("theta must lie in (0, 1)")
        if min(self.varrho, self.varsigma, self.box_half_width, self.b_samples, self.b_stddev_multiplier) <= 0:
            raise DomainError("varrho, varsigma, box_half_width, b_samples and the multiplier must be positive")
        if self.ineq_rows is not None and self.ineq_rows < 0:
            raise DomainError("ineq_rows must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def rows(self) -> int:
        return default_ineq_rows(self.n) if self.ineq_rows is None else self.ineq_rows

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weight_mode"] = self.weight_mode.value
        d["ineq_rows"] = self.rows
        return d


def van_der_corput(index: int) -> float:
    """Base-2 radical inverse of index (index >= 1)."""
    if index < 1:
        raise DomainError("van der Corput index must be >= 1")
    out, denom = 0.0, 1.0
    while index:
        index, digit = divmod(index, 2)
        denom *= 2.0
        out += digit / denom
    return out


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Product of 2n Givens rotations at random distinct index pairs."""
    if n < 2:
        raise DomainError("random_orthogonal needs n >= 2")
    Q = np.eye(n)
    for _ in range(2 * n):
        i, j = rng.choice(n, size=2, replace=False)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(angle), math.sin(angle)
        qi, qj = Q[i].copy(), Q[j].copy()
        Q[i] = c * qi - s * qj
        Q[j] = s * qi + c * qj
    return Q


def random_covariance(n: int, varsigma: float, ell_k: float, rng: np.random.Generator):
    """Sigma = Q' D Q with eigenvalues uniform on (1e-6 varsigma, varsigma ell_k]."""
    if not 0.0 < ell_k <= 1.0 or varsigma <= 0.0:
        raise DomainError("need ell_k in (0, 1] and varsigma > 0")
    lo, hi = EIGEN_FLOOR * varsigma, varsigma * ell_k
    # numpy's uniform samples [lo, hi); reflect to get (lo, hi]
    eig = hi - rng.uniform(0.0, hi - lo, size=n)
    if n == 1:
        Q = np.ones((1, 1))
    else:
        Q = random_orthogonal(n, rng)
    sigma = Q.T @ (eig[:, None] * Q)
    sigma = 0.5 * (sigma + sigma.T)
    return sigma, eig, Q


def random_means(n: int, K: int, varrho: float, rng: np.random.Generator) -> list[np.ndarray]:
    """Per coordinate: two sorted draws on [0, varrho sqrt(n) log n] bound the mean."""
    top = varrho * math.sqrt(n) * math.log(n) if n > 1 else varrho
    means = []
    for _ in range(K):
        ends = np.sort(rng.uniform(0.0, top, size=(2, n)), axis=0)
        means.append(rng.uniform(ends[0], ends[1]))
    return means


def random_polyhedron(n: int, rows: int, rng: np.random.Generator, box_half_width: float = 20.0) -> Polyhedron:
    A = rng.uniform(0.0, 1.0, size=(rows, n))
    d = rng.uniform(n / 4.0, 3.0 * n / 4.0, size=rows)
    lo = np.full(n, -float(box_half_width))
    return Polyhedron(A, d, np.zeros((0, n)), np.zeros(0), lo, -lo)


def compute_rhs(components, region: Polyhedron, b_samples: int, multiplier: float, rng: np.random.Generator) -> float:
    """Mean over box samples and components of x'mu_k + multiplier sqrt(x' Sigma_k x)."""
    if b_samples < 1:
        raise DomainError("b_samples must be at least 1")
    X = rng.uniform(region.box_lo, region.box_hi, size=(b_samples, region.n))
    total = 0.0
    for comp in components:
        std = np.linalg.norm(X @ comp.require_factor(), axis=1)
        total += float(np.sum(X @ comp.mean + multiplier * std))
    return total / (b_samples * len(components))


def mixture_weights(K: int, mode: WeightMode) -> tuple[float, ...]:
    mode = WeightMode(mode)
    if mode is WeightMode.EQUAL:
        return tuple([1.0 / K] * K)
    if K not in UNEQUAL_WEIGHTS:
        raise ValidationError(f"published unequal weights exist only for K in {sorted(UNEQUAL_WEIGHTS)}, got K = {K}")
    return UNEQUAL_WEIGHTS[K]


def generate_instance(cfg: GenConfig) -> GmmInstance:
    weights = mixture_weights(cfg.K, cfg.weight_mode)
    rng = np.random.default_rng(cfg.seed)
    means = random_means(cfg.n, cfg.K, cfg.varrho, rng)
    comps = []
    for k in range(cfg.K):
        sigma, _, _ = random_covariance(cfg.n, cfg.varsigma, van_der_corput(k + 1), rng)
        comps.append(GaussianComponent(weights[k], means[k], sigma))
    region = random_polyhedron(cfg.n, cfg.rows, rng, cfg.box_half_width)
    c = rng.uniform(-1.0, 1.0, size=cfg.n)
    b = compute_rhs(comps, region, cfg.b_samples, cfg.b_stddev_multiplier, rng)
    inst = GmmInstance(c, b, cfg.theta, comps, region)
    require_valid(inst)
    return inst


def intro_example(b: float = 6.7, half_width: float = 15.0, theta: float = 0.9, c=(1.0, 1.0)) -> GmmInstance:
    """Two-component planar instance with equal weights and a shared mean.

    Q_k holds eigenvector columns, so Sigma_k = Q_k D_k Q_k'. The Q_k
    given here are only approximately orthogonal and are used as is;
    Sigma_k stays PD regardless. The objective c and theta are not part of
    the instance data and default to (1, 1) and 0.9.
    """
    mean = np.array([0.875, 1.784])
    Q1 = np.array([[1.0, -0.08], [0.08, 1.0]])
    Q2 = np.array([[1.0, -0.02], [0.02, 1.0]])
    D1 = np.diag([1.15, 0.65])
    D2 = np.diag([1.47, 0.33])
    comps = [GaussianComponent(0.5, mean, Q1 @ D1 @ Q1.T), GaussianComponent(0.5, mean, Q2 @ D2 @ Q2.T)]
    region = Polyhedron.box(np.full(2, -half_width), np.full(2, half_width))
    return GmmInstance(np.asarray(c, dtype=float), b, theta, comps, region)
