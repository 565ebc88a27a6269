import numpy as np
import pytest

from gmmcc.errors import UsageError
from gmmcc.pwl import build_pwl, eval_inner, eval_outer, inner_breakpoints, outer_breakpoints
from gmmcc.special import std_normal_cdf
from gmmcc.witness import WITNESS_TOL, witness_inner, witness_outer


@pytest.fixture(scope="module")
def outer():
    return build_pwl(outer_breakpoints(0.005))


@pytest.fixture(scope="module")
def inner():
    return build_pwl(inner_breakpoints(0.005))


def test_outer_positive_z(outer):
    w = witness_outer(0.5, 0.5, outer)
    assert w.case == "t3"
    assert w.assignment["t_1_3"] == 1.0 and w.assignment["y_1_3"] == 0.5
    assert w.max_violation <= WITNESS_TOL


def test_outer_negative_z_interpolates(outer):
    bp = outer.breakpoints
    z = 0.5 * (bp.at(-2) + bp.at(-3))
    w = witness_outer(z, eval_outer(outer, z) - 1e-6, outer)
    assert w.case == "t2"
    alpha = np.array([w.assignment[f"alpha_1_{i}"] for i in range(bp.left_count + 1)])
    nz = np.flatnonzero(alpha)
    assert nz.tolist() == [2, 3]
    assert alpha.sum() == pytest.approx(1.0)
    assert sum(alpha[i] * bp.at(-i) for i in range(bp.left_count + 1)) == pytest.approx(z)


def test_outer_far_left(outer):
    floor = std_normal_cdf(outer.breakpoints.z_left)
    assert witness_outer(-8.0, floor + 1e-6, outer) is None
    assert witness_outer(-8.0, floor, outer).case == "t1"


def test_inner_far_right(inner):
    cap = std_normal_cdf(inner.breakpoints.z_right)
    w = witness_inner(7.0, cap, inner)
    assert w.case == "t4" and w.assignment["t_1_4"] == 1.0
    assert witness_inner(1.0, cap + 1e-9, inner) is None


def test_inner_left_selects_single_tangent(inner):
    z = -1.3
    w = witness_inner(z, eval_inner(inner, z), inner)
    assert w.case == "t2"
    L = inner.breakpoints.left_count
    ones = [i for i in range(L) if w.assignment[f"alpha_1_{i}"] == 1.0]
    assert len(ones) == 1
    assert w.assignment[f"frakz_1_{ones[0]}"] == z


def test_wrong_kind(outer, inner):
    with pytest.raises(UsageError):
        witness_outer(0.0, 0.1, inner)
    with pytest.raises(UsageError):
        witness_inner(0.0, 0.1, outer)


@pytest.mark.parametrize("kind", ["outer", "inner"])
def test_equivalence_near_threshold(kind, outer, inner):
    # zeta just above and below the surrogate value, including at breakpoints
    pwl, witness, evaluate = (outer, witness_outer, eval_outer) if kind == "outer" else (inner, witness_inner, eval_inner)
    zs = list(pwl.breakpoints.points) + list(np.linspace(-9, 9, 301))
    for z in zs:
        v = evaluate(pwl, z)
        for zeta in (v - 1e-7, v + 1e-7):
            if not 0.0 < zeta <= 1.0:
                continue
            assert (witness(z, zeta, pwl) is not None) == (v >= zeta), (z, zeta)


def test_equivalence_random_pairs(outer, inner):
    rng = np.random.default_rng(21)
    for pwl, witness, evaluate in ((outer, witness_outer, eval_outer), (inner, witness_inner, eval_inner)):
        for z, zeta in zip(rng.uniform(-10, 10, 2000), rng.uniform(1e-9, 1, 2000)):
            w = witness(float(z), float(zeta), pwl)
            assert (w is not None) == (evaluate(pwl, float(z)) >= zeta)
