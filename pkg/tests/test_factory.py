import json
import math

import numpy as np
import pytest

from gmmcc.errors import DomainError, ValidationError
from gmmcc.factory import (
    UNEQUAL_WEIGHTS,
    GenConfig,
    WeightMode,
    compute_rhs,
    default_ineq_rows,
    generate_instance,
    intro_example,
    mixture_weights,
    random_covariance,
    random_means,
    random_orthogonal,
    random_polyhedron,
    van_der_corput,
)
from gmmcc.gmm import GaussianComponent, Polyhedron, validate_instance
from gmmcc.jsonio import dumps17


def test_van_der_corput_values():
    assert [van_der_corput(i) for i in (1, 2, 3, 4, 5, 6, 7)] == [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875]
    first = [van_der_corput(i) for i in range(1, 17)]
    assert len(set(first)) == 16
    assert sorted(first[:15]) == [k / 16 for k in range(1, 16)]
    with pytest.raises(DomainError):
        van_der_corput(0)


def test_van_der_corput_equidistribution():
    # the first 16 values land one per bin of width 1/16
    vals = np.array([van_der_corput(i) for i in range(1, 17)])
    counts = np.histogram(vals, bins=16, range=(0, 1))[0]
    assert np.all(counts == 1)


@pytest.mark.parametrize("n", [2, 10, 100])
def test_random_orthogonal(n):
    Q = random_orthogonal(n, np.random.default_rng(n))
    assert np.linalg.norm(Q.T @ Q - np.eye(n)) <= 1e-10
    assert np.linalg.det(Q) == pytest.approx(1.0, abs=1e-10)
    v = np.random.default_rng(0).normal(size=n)
    assert np.linalg.norm(Q @ v) == pytest.approx(np.linalg.norm(v), rel=1e-12)


def test_random_covariance_spectrum():
    rng = np.random.default_rng(3)
    sigma, eig, Q = random_covariance(12, 2.0, 0.25, rng)
    assert np.all(eig <= 0.5) and np.all(eig > 2e-6)
    assert np.allclose(sigma, sigma.T)
    assert np.linalg.norm(Q.T @ np.diag(eig) @ Q - sigma) <= 1e-8 * np.linalg.norm(sigma)
    assert np.trace(sigma) == pytest.approx(eig.sum(), rel=1e-8)
    assert np.min(np.linalg.eigvalsh(sigma)) > 0
    with pytest.raises(DomainError):
        random_covariance(3, 2.0, 0.0, rng)


def test_random_means_containment_and_scaling():
    n = 30
    top = 2 * math.sqrt(n) * math.log(n)
    means = random_means(n, 4, 2.0, np.random.default_rng(1))
    assert all(np.all((m >= 0) & (m <= top)) for m in means)
    assert min(np.linalg.norm(a - b) for i, a in enumerate(means) for b in means[i + 1:]) > 0
    big = random_means(n, 4, 20.0, np.random.default_rng(1))
    assert np.allclose(big[0], 10 * means[0])


def test_polyhedron_rows_and_ranges():
    assert default_ineq_rows(100) == 10
    assert default_ineq_rows(500) == 50
    assert default_ineq_rows(1000) == 50
    r = random_polyhedron(40, 4, np.random.default_rng(2))
    assert r.A.shape == (4, 40) and r.H.shape == (0, 40)
    assert np.all((r.A >= 0) & (r.A <= 1))
    assert np.all((r.d >= 10) & (r.d <= 30))
    assert np.all(r.box_lo == -20) and np.all(r.box_hi == 20)


def test_compute_rhs_single_sample():
    comp = GaussianComponent(1.0, np.zeros(3), np.eye(3))
    box = Polyhedron.box(np.full(3, 1.0 - 1e-12), np.full(3, 1.0))
    b = compute_rhs([comp], box, 1, 1.0, np.random.default_rng(0))
    assert b == pytest.approx(math.sqrt(3), rel=1e-10)


def test_weights():
    assert mixture_weights(10, WeightMode.PAPER_UNEQUAL) == UNEQUAL_WEIGHTS[10]
    assert mixture_weights(4, "equal") == (0.25,) * 4
    for K, w in UNEQUAL_WEIGHTS.items():
        assert len(w) == K and math.fsum(w) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        mixture_weights(7, WeightMode.PAPER_UNEQUAL)


def test_generation_is_deterministic():
    cfg = GenConfig(n=12, K=5, theta=0.99, seed=4, weight_mode="paper")
    a = dumps17(generate_instance(cfg).to_dict())
    b = dumps17(generate_instance(cfg).to_dict())
    assert a == b
    other = dumps17(generate_instance(GenConfig(n=12, K=5, theta=0.99, seed=5, weight_mode="paper")).to_dict())
    assert a != other


def test_generated_instance_shape():
    inst = generate_instance(GenConfig(n=100, K=5, theta=0.95, seed=0, weight_mode="paper"))
    assert validate_instance(inst) == []
    assert inst.region.A.shape == (10, 100)
    assert tuple(inst.weights) == UNEQUAL_WEIGHTS[5]
    assert np.all(np.abs(inst.c) <= 1)


def test_rhs_mostly_nonnegative_over_seeds():
    # on a symmetric box x'mu averages to zero, so b is positive only in expectation
    bs = [generate_instance(GenConfig(n=20, K=5, theta=0.95, seed=seed)).b for seed in range(100)]
    assert sum(b >= 0 for b in bs) >= 90
    assert np.mean(bs) > 0


def test_rhs_nonnegative_on_nonnegative_box():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        comps = [GaussianComponent(0.5, m, np.eye(4)) for m in random_means(4, 2, 2.0, rng)]
        b = compute_rhs(comps, Polyhedron.box(np.zeros(4), np.full(4, 20.0)), 50, 1.0, rng)
        assert b >= 0


def test_config_errors():
    with pytest.raises(DomainError):
        GenConfig(n=0, K=1, theta=0.9)
    with pytest.raises(DomainError):
        GenConfig(n=2, K=1, theta=1.0)
    with pytest.raises(ValidationError):
        generate_instance(GenConfig(n=5, K=7, theta=0.9, weight_mode="paper"))
    assert json.loads(json.dumps(GenConfig(n=3, K=2, theta=0.9).to_dict()))["n"] == 3


def test_intro_example_data():
    inst = intro_example()
    assert inst.n == 2 and inst.K == 2 and inst.b == 6.7
    assert tuple(inst.weights) == (0.5, 0.5)
    assert np.all(inst.region.box_hi == 15)
    assert validate_instance(inst) == []
