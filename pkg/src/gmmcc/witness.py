"""Constructive feasibility witnesses for the outer (H) and inner (G) blocks.

Each witness follows one case of the set-equivalence argument, builds an
explicit assignment, and is accepted only if it satisfies every emitted
row of a one-component model to 1e-9. Equivalence tests then compare
witness existence against the scalar test Phi_approx(z) >= zeta.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .builders import ModelBounds, attach_inner_block, attach_outer_block
from .errors import UsageError
from .ir import BINARY, MiqpModel
from .pwl import Kind, PwlApprox

WITNESS_TOL = 1e-9


@dataclass(frozen=True)
class Witness:
    case: str
    assignment: dict[str, float]
    max_violation: float


class _BlockModel:
    """One-component model (z_1, zeta_1 plus a block) in dense form."""

    def __init__(self, pwl: PwlApprox, bounds: ModelBounds):
        m = MiqpModel()
        m.add_var("z_1", bounds.z_lo, bounds.z_hi)
        m.add_var("zeta_1", 0.0, 1.0)
        if pwl.kind is Kind.OUTER:
            attach_outer_block(m, 0, pwl, bounds)
        else:
            attach_inner_block(m, 0, pwl, bounds)
        self.model = m
        nv = len(m.variables)
        self.names = m.names
        self.index = dict(m._index)
        self.A = np.zeros((len(m.constraints), nv))
        self.rhs = np.array([c.rhs for c in m.constraints])
        self.sense = np.array([c.sense for c in m.constraints])
        for r, c in enumerate(m.constraints):
            self.A[r, c.idx] = c.vals
        self.lo = np.array([v.lower for v in m.variables])
        self.hi = np.array([v.upper for v in m.variables])
        self.binary = np.array([v.kind == BINARY for v in m.variables])
        self.sos = [np.array(g.members) for g in m.sos2_groups]

    def violation(self, v: np.ndarray) -> float:
        act = self.A @ v
        gap = np.where(self.sense == "<=", act - self.rhs, np.where(self.sense == ">=", self.rhs - act, np.abs(act - self.rhs)))
        worst = max(0.0, float(gap.max(initial=0.0)))
        worst = max(worst, float(np.max(self.lo - v)), float(np.max(v - self.hi)))
        if self.binary.any():
            worst = max(worst, float(np.max(np.abs(v[self.binary] - np.round(v[self.binary])))))
        for members in self.sos:
            nz = np.flatnonzero(v[members] != 0.0)
            if nz.size > 2 or (nz.size == 2 and nz[1] - nz[0] != 1):
                return float("inf")
        return worst

    def assemble(self, values: dict[str, float]) -> np.ndarray:
        v = np.zeros(len(self.names))
        for name, val in values.items():
            v[self.index[name]] = val
        return v


@functools.lru_cache(maxsize=32)
def _block(pwl: PwlApprox, bounds: ModelBounds) -> _BlockModel:
    return _BlockModel(pwl, bounds)


def _first_feasible(block: _BlockModel, candidates) -> Witness | None:
    for case, values in candidates:
        v = block.assemble(values)
        viol = block.violation(v)
        if viol <= WITNESS_TOL:
            return Witness(case, dict(zip(block.names, v.tolist())), viol)
    return None


def witness_outer(z: float, zeta: float, pwl: PwlApprox, bounds: ModelBounds | None = None) -> Witness | None:
    """Feasible point of the outer block for fixed (z, zeta), or None."""
    if pwl.kind is not Kind.OUTER:
        raise UsageError("witness_outer needs an OUTER approximation")
    bounds = bounds or ModelBounds()
    block = _block(pwl, bounds)
    bp = pwl.breakpoints
    L = bp.left_count
    base = {"z_1": z, "zeta_1": zeta}
    cands = []
    if z >= 0.0:
        cands.append(("t3", {**base, "t_1_3": 1.0, "y_1_3": z}))
    if bp.z_left <= z <= 0.0:
        vals = {**base, "t_1_2": 1.0, "y_1_2": z}
        # interval [z_{-i}, z_{-i+1}] holding z; weights interpolate z
        i = next(i for i in range(1, L + 1) if bp.at(-i) <= z) if z < 0.0 else 0
        if i == 0:
            vals["alpha_1_0"] = 1.0
        else:
            lo, hi = bp.at(-i), bp.at(-i + 1)
            w = (hi - z) / (hi - lo)
            vals[f"alpha_1_{i}"] = w
            vals[f"alpha_1_{i - 1}"] = 1.0 - w
        cands.append(("t2", vals))
    if z <= bp.z_left:
        cands.append(("t1", {**base, "t_1_1": 1.0, "y_1_1": z}))
    return _first_feasible(block, cands)


def witness_inner(z: float, zeta: float, pwl: PwlApprox, bounds: ModelBounds | None = None) -> Witness | None:
    """Feasible point of the inner block for fixed (z, zeta), or None."""
    if pwl.kind is not Kind.INNER:
        raise UsageError("witness_inner needs an INNER approximation")
    bounds = bounds or ModelBounds()
    block = _block(pwl, bounds)
    bp = pwl.breakpoints
    L = bp.left_count
    base = {"z_1": z, "zeta_1": zeta}
    cands = []
    if z >= bp.z_right:
        cands.append(("t4", {**base, "t_1_4": 1.0, "y_1_4": z}))
    if 0.0 <= z <= bp.z_right:
        cands.append(("t3", {**base, "t_1_3": 1.0, "y_1_3": z}))
    if bp.z_left <= z <= 0.0:
        # tangent i may be selected when z lies in [z_{-i-1}, 0]
        admissible = [i for i in range(L) if bp.at(-i - 1) <= z]
        best = max(admissible, key=lambda i: pwl.left_coeffs[i][0] * z + pwl.left_coeffs[i][1])
        cands.append(("t2", {**base, "t_1_2": 1.0, "y_1_2": z, f"alpha_1_{best}": 1.0, f"frakz_1_{best}": z}))
    if z <= bp.at(-L + 1):
        cands.append(("t1", {**base, "t_1_1": 1.0, "y_1_1": z}))
    return _first_feasible(block, cands)
