import json

import numpy as np
import pytest

from conftest import small_instance
from gmmcc.builders import (
    BuildOptions,
    ModelBounds,
    attach_inner_block,
    attach_outer_block,
    build_pwl_inner,
    build_pwl_outer,
    build_saa,
    build_skeleton,
    default_sample_count,
    expected_counts,
    saa_budget,
)
from gmmcc.errors import DomainError, UsageError, ValidationError
from gmmcc.factory import GenConfig, generate_instance
from gmmcc.gmm import GmmInstance
from gmmcc.ir import BINARY, MiqpModel
from gmmcc.jsonio import dumps17
from gmmcc.pwl import build_pwl, inner_breakpoints, outer_breakpoints


def _tally(model):
    c = model.counts()
    return {"variables": c.variables, "binaries": c.binaries, "linear_rows": c.linear_rows, "quadratic_rows": c.quadratic_rows}


def _mp(inst):
    return inst.region.A.shape[0], inst.region.H.shape[0]


def test_skeleton_tally(generated):
    m, p = _mp(generated)
    model = build_skeleton(generated)
    assert _tally(model) == expected_counts("skeleton", generated.n, generated.K, m, p)


@pytest.mark.parametrize("tau", [0.005, 0.001])
def test_pwl_tallies(generated, tau):
    m, p = _mp(generated)
    o = outer_breakpoints(tau)
    i = inner_breakpoints(tau)
    mo = build_pwl_outer(generated, tau)
    mi = build_pwl_inner(generated, tau)
    assert _tally(mo) == expected_counts("pwl-o", generated.n, generated.K, m, p, o.left_count, o.right_count)
    assert _tally(mi) == expected_counts("pwl-i", generated.n, generated.K, m, p, i.left_count, i.right_count)
    assert mo.counts().sos2_groups == generated.K
    assert all(len(g.members) == o.left_count + 1 for g in mo.sos2_groups)
    assert mi.counts().sos2_groups == 0


def test_mixing_row_and_quadratic_rows(generated):
    model = build_skeleton(generated)
    mix = next(c for c in model.constraints if c.name == "mix")
    assert mix.sense == ">=" and mix.rhs == generated.theta
    assert list(mix.vals) == [comp.weight for comp in generated.components]
    assert [model.names[i] for i in mix.idx] == [f"zeta_{k}" for k in range(1, generated.K + 1)]
    qeq = next(c for c in model.constraints if c.name == "qeq_1")
    # x' Sigma x - lam^2 evaluated at a point equals the direct computation
    rng = np.random.default_rng(0)
    v = np.zeros(len(model.variables))
    x = rng.normal(size=generated.n)
    v[: generated.n] = x
    lam = model.var("lam_1")
    v[lam] = 0.7
    cov = generated.components[0].covariance
    assert qeq.activity(v) == pytest.approx(x @ cov @ x - 0.49, rel=1e-12)


def test_bilinear_row_holds_at_consistent_point():
    inst = small_instance(n=3, K=2, seed=1)
    model = build_skeleton(inst)
    x = np.array([0.3, -0.2, 0.5])
    v = {f"x_{i + 1}": x[i] for i in range(3)}
    for k, comp in enumerate(inst.components, start=1):
        lam = comp.std(x)
        v[f"lam_{k}"] = lam
        v[f"z_{k}"] = (inst.b - comp.mean @ x) / lam
        v[f"zeta_{k}"] = 1.0
    assert model.max_violation(v) <= 1e-9


def test_bounds_precondition():
    inst = small_instance()
    with pytest.raises(DomainError):
        build_pwl_outer(inst, 0.005, bounds=ModelBounds(-5.0, 1e4))
    with pytest.raises(DomainError):
        build_pwl_inner(inst, 0.005, bounds=ModelBounds(-1e4, 6.0))


def test_kind_mismatch_on_attach():
    model = MiqpModel()
    model.add_var("z_1", -1e4, 1e4)
    model.add_var("zeta_1", 0, 1)
    with pytest.raises(UsageError):
        attach_outer_block(model, 0, build_pwl(inner_breakpoints(0.01)), ModelBounds())
    with pytest.raises(UsageError):
        attach_inner_block(model, 0, build_pwl(outer_breakpoints(0.01)), ModelBounds())


def test_split_equality_doubles_quadratic_rows(generated):
    plain = build_pwl_outer(generated)
    split = build_pwl_outer(generated, options=BuildOptions(split_equality=True))
    # bilinear rows stay, each equality becomes two inequalities
    assert split.counts().quadratic_rows == plain.counts().quadratic_rows + generated.K
    senses = {c.name: c.sense for c in split.quadratic_constraints}
    assert senses["qeq_1_le"] == "<=" and senses["qeq_1_ge"] == ">="


def test_sos2_as_binary(generated):
    bp = outer_breakpoints(0.005)
    L = bp.left_count
    model = build_pwl_outer(generated, options=BuildOptions(sos2_as_binary=True))
    base = build_pwl_outer(generated)
    K = generated.K
    assert model.counts().sos2_groups == 0
    assert model.counts().binaries == base.counts().binaries + K * L
    assert model.counts().linear_rows == base.counts().linear_rows + K * (L + 2)


def test_saa_defaults_and_rows():
    assert default_sample_count(0.95) == 2000
    assert default_sample_count(0.99) == 10000
    assert default_sample_count(0.999) == 20000
    assert saa_budget(0.95, 2000) == 100
    inst = generate_instance(GenConfig(n=4, K=2, theta=0.9, seed=2))
    model = build_saa(inst, 50, big_m=1e3, rng=np.random.default_rng(1))
    m, p = _mp(inst)
    assert _tally(model) == expected_counts("saa", 4, 2, m, p, S=50)
    card = next(c for c in model.constraints if c.name == "saa_card")
    assert card.rhs == 5
    row = next(c for c in model.constraints if c.name == "saa_3")
    assert row.vals[-1] == -1e3 and row.rhs == inst.b
    with pytest.raises(DomainError):
        build_saa(inst, 0)


def test_saa_is_seeded():
    inst = generate_instance(GenConfig(n=3, K=2, theta=0.9, seed=2))
    a = build_saa(inst, 30, rng=np.random.default_rng(5))
    b = build_saa(inst, 30, rng=np.random.default_rng(5))
    assert a.same_as(b)


def test_invalid_instance_rejected():
    good = small_instance()
    bad = GmmInstance(good.c, good.b, 1.2, good.components, good.region)
    with pytest.raises(ValidationError):
        build_skeleton(bad)


def test_metadata(generated):
    model = build_pwl_inner(generated)
    md = model.metadata
    assert md["model_kind"] == "pwl-i" and md["K"] == generated.K
    assert md["tau"] == pytest.approx(0.005)
    assert md["suggested_mip_gap"] == pytest.approx(0.005)
    assert (md["L"], md["R"]) == (14, 9)


def test_ir_validates_and_round_trips(generated):
    for model in (build_pwl_outer(generated), build_pwl_inner(generated)):
        assert model.validate() == []
        back = MiqpModel.from_dict(json.loads(dumps17(model.to_dict())))
        assert back.same_as(model)
        assert dumps17(back.to_dict()) == dumps17(model.to_dict())


def test_ir_validation_catches_problems():
    m = MiqpModel()
    m.add_var("a", 0, 1, kind=BINARY)
    m.add_var("b", 2.0, 1.0)
    m.add_sos2("s", ["a"])
    issues = m.validate()
    assert issues
    with pytest.raises((DomainError, ValidationError)):
        m.add_var("a")
    with pytest.raises(ValidationError):
        m.require_valid()


def test_expected_counts_unknown_kind():
    with pytest.raises(DomainError):
        expected_counts("foo", 1, 1, 0, 0)
