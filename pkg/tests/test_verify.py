import sys

import numpy as np
import pytest

from conftest import small_instance
from gmmcc.errors import CertificationError, DomainError
from gmmcc.factory import intro_example
from gmmcc.gmm import GaussianComponent, GmmInstance, Polyhedron, chance_probability
from gmmcc.pwl import outer_breakpoints
from gmmcc.special import std_normal_cdf
from gmmcc.verify import (
    compare,
    desk_solve,
    find_nonconvexity_witness,
    mc_probability,
    sandwich_audit,
    verify,
)


def _planar(b=3.0, theta=0.8, c=(1.0, 1.0)):
    comps = [
        GaussianComponent(0.4, [1.0, 0.5], [[1.0, 0.3], [0.3, 0.8]]),
        GaussianComponent(0.6, [-0.5, 1.5], [[0.6, -0.1], [-0.1, 1.2]]),
    ]
    return GmmInstance(c, b, theta, comps, Polyhedron.box([-4.0, -4.0], [4.0, 4.0]))


def test_origin_is_feasible_for_any_tau_hat():
    inst = small_instance()
    for tau_hat in (0.0, 0.01, 0.5):
        rep = verify(inst, np.zeros(3), tau_hat)
        assert rep.theta_check == 1.0 and rep.tau_feasible and rep.region_ok


def test_probability_two_tau_below_theta_is_infeasible():
    inst = small_instance()
    x = np.array([1.0, -2.0, 0.5])
    p = chance_probability(inst, x)
    tau_hat = 0.01
    shifted = GmmInstance(inst.c, inst.b, p + 2 * tau_hat, inst.components, inst.region)
    rep = verify(shifted, x, tau_hat)
    assert rep.region_ok and not rep.tau_feasible
    assert rep.notes
    assert verify(shifted, x, 2 * tau_hat).tau_feasible


def test_region_violation_reported():
    inst = small_instance()
    rep = verify(inst, np.array([6.0, 0.0, 0.0]))
    assert not rep.region_ok and rep.region_violation == pytest.approx(1.0)
    with pytest.raises(DomainError):
        verify(inst, np.zeros(2))
    with pytest.raises(DomainError):
        verify(inst, np.zeros(3), -1.0)


def test_compare_identity_and_literal_formulas():
    inst = _planar(theta=0.95, c=(-1.0, -1.0))
    x = np.array([1.0, 0.5])
    m = compare(inst, x, x)
    assert (m.pct_obj, m.pct_theta) == (0.0, 0.0)
    xo = np.array([1.5, 0.5])
    m = compare(inst, x, xo)
    # c'xI = -1.5, c'(xI - xO) = 0.5, so the literal ratio is negative
    assert m.pct_obj == pytest.approx(0.5 / -1.5 * 100)
    assert m.notes
    assert m.pct_theta == pytest.approx((chance_probability(inst, x) - chance_probability(inst, xo)) / 0.95 * 100)


def test_compare_probability_gap_of_one_thousandth():
    inst = _planar(theta=0.95)
    xi = np.array([1.0, 1.0])
    target = chance_probability(inst, xi) - 0.001
    lo, hi = 1.0, 4.0
    # p decreases along this ray; bisect for a point 0.001 below
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chance_probability(inst, np.array([mid, 1.0])) > target:
            lo = mid
        else:
            hi = mid
    m = compare(inst, xi, np.array([lo, 1.0]))
    assert m.pct_theta == pytest.approx(0.105263, abs=1e-5)
    assert f"{m.pct_theta:.3f}" == "0.105"


def test_compare_zero_objective():
    inst = _planar(c=(1.0, -1.0))
    with pytest.raises(DomainError):
        compare(inst, [1.0, 1.0], [0.0, 0.0])


def test_desk_solve_trivial_box_corner():
    inst = _planar(b=1e9)
    res = desk_solve(inst, 16)
    assert res.feasible and np.array_equal(res.x, [-4.0, -4.0])
    assert res.objective == -8.0


def test_desk_solve_refines_monotonically():
    inst = _planar()
    objs = [desk_solve(inst, r).objective for r in (64, 128, 256)]
    assert objs[0] >= objs[1] >= objs[2]
    refined = desk_solve(inst, 64, refine_rounds=3)
    assert refined.objective <= objs[0]
    assert refined.cell_diameter == pytest.approx(desk_solve(inst, 64).cell_diameter / 8)


def test_desk_solve_optimum_verifies_and_bounds_feasible_points():
    inst = _planar()
    res = desk_solve(inst, 128)
    assert verify(inst, res.x, 0.0).tau_feasible
    slack = np.abs(inst.c) @ np.full(2, 8.0 / 128)
    rng = np.random.default_rng(0)
    for x in rng.uniform(-4, 4, (2000, 2)):
        if verify(inst, x, 0.0).tau_feasible:
            assert inst.c @ x >= res.objective - slack


def test_desk_solve_infeasible_and_domain():
    inst = _planar(b=-50.0, theta=0.99)
    assert not desk_solve(inst, 16).feasible
    with pytest.raises(DomainError):
        desk_solve(small_instance(n=4), 16)
    with pytest.raises(DomainError):
        desk_solve(inst, 8)


def test_intro_example_desk_solve():
    res = desk_solve(intro_example(), 64)
    assert res.feasible and res.objective == -30.0


def test_theta_check_invariant_under_joint_rescaling():
    inst = small_instance(n=3, K=2, seed=4)
    x = np.array([0.5, -1.0, 0.25])
    s = 3.7
    scaled = GmmInstance(
        inst.c, s * inst.b, inst.theta,
        [GaussianComponent(c.weight, s * c.mean, s * s * c.covariance) for c in inst.components], inst.region,
    )
    assert verify(scaled, x).theta_check == pytest.approx(verify(inst, x).theta_check, abs=1e-14)


def test_nonconvexity_witness_on_intro_example():
    inst = intro_example()
    w = find_nonconvexity_witness(inst, 128)
    assert w is not None and w.p_mid < w.level <= min(w.p_a, w.p_b)


def test_no_witness_for_single_gaussian_above_half():
    # for one component and b > 0, {p >= t} is convex when t >= 1/2
    comp = GaussianComponent(1.0, [0.5, 0.2], np.eye(2))
    inst = GmmInstance([1.0, 1.0], 2.0, 0.9, [comp], Polyhedron.box([-5, -5], [5, 5]))
    w = find_nonconvexity_witness(inst, 64)
    assert w is None or w.level < 0.5


def test_audit_on_intro_example_and_shrinking_gaps():
    inst = intro_example()
    a = sandwich_audit(inst, 0.005, 10_000, np.random.default_rng(1))
    b = sandwich_audit(inst, 0.0025, 10_000, np.random.default_rng(1))
    assert a.samples == 10_000 and a.skipped == 0
    assert a.max_outer_gap <= 0.005 and a.max_inner_gap <= 0.005
    assert b.max_outer_gap < a.max_outer_gap and b.max_inner_gap < a.max_inner_gap
    with pytest.raises(DomainError):
        sandwich_audit(inst, 0.0, 10, np.random.default_rng(1))


def test_audit_reports_offending_point(monkeypatch):
    # feed the outer approximation in place of the inner one
    monkeypatch.setattr(sys.modules["gmmcc.verify"], "inner_breakpoints", outer_breakpoints)
    with pytest.raises(CertificationError) as err:
        sandwich_audit(intro_example(), 0.005, 1000, np.random.default_rng(2))
    assert err.value.x is not None and len(err.value.x) == 2


def test_mc_probability():
    comp = GaussianComponent(1.0, [0.0], [[1.0]])
    inst = GmmInstance([1.0], 0.3, 0.9, [comp], Polyhedron.box([-1.0], [1.0]))
    est, se = mc_probability(inst, [1.0], 200_000, np.random.default_rng(3))
    assert abs(est - std_normal_cdf(0.3)) <= 3 * se
    assert mc_probability(inst.with_b(1e12), [1.0], 1000, np.random.default_rng(3)) == (1.0, 0.0)
    assert mc_probability(inst, [1.0], 500, np.random.default_rng(9)) == mc_probability(inst, [1.0], 500, np.random.default_rng(9))
    with pytest.raises(DomainError):
        mc_probability(inst, [1.0], 50, np.random.default_rng(3))
