"""Model builders: exact skeleton, PWL outer/inner blocks, and the SAA baseline.

Variable names are 1-based for x, components and scenarios; alpha and
frakz keep their breakpoint index (alpha_{k}_0 .. alpha_{k}_L).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .gmm import GmmInstance, require_valid, sample
from .ir import BINARY, MiqpModel, QuadTerms
from .pwl import DEFAULT_Z_LEFT, DEFAULT_Z_RIGHT, Kind, PwlApprox, build_pwl, default_tau, breakpoints
from .special import std_normal_cdf

DEFAULT_BIG_M = 1e6
SAA_HIGH_THETA = 0.999


@dataclass(frozen=True)
class ModelBounds:
    """Bounds on the auxiliary z_k variables; they gate the linking rows."""

    z_lo: float = -1e4
    z_hi: float = 1e4

    def check(self, pwl: PwlApprox) -> None:
        bp = pwl.breakpoints
        if not (self.z_lo <= bp.z_left < bp.z_right <= self.z_hi):
            raise DomainError(
                f"bounds [{self.z_lo}, {self.z_hi}] must contain the breakpoint range [{bp.z_left}, {bp.z_right}]"
            )


@dataclass(frozen=True)
class BuildOptions:
    split_equality: bool = False
    sos2_as_binary: bool = False


def _sigma_quad(cov: np.ndarray, x_idx: np.ndarray, lam: int) -> QuadTerms:
    """x' Sigma x - lam^2 over the upper triangle (off-diagonals doubled)."""
    n = x_idx.size
    iu, ju = np.triu_indices(n)
    vals = np.where(iu == ju, cov[iu, ju], cov[iu, ju] + cov[ju, iu])
    return QuadTerms(
        np.append(x_idx[iu], lam),
        np.append(x_idx[ju], lam),
        np.append(vals, -1.0),
    )


def add_region_rows(model: MiqpModel, inst: GmmInstance, x_idx: np.ndarray) -> None:
    r = inst.region
    for j in range(r.A.shape[0]):
        model.add_row_arrays(f"reg_{j + 1}", x_idx, r.A[j], ">=", r.d[j])
    for j in range(r.H.shape[0]):
        model.add_row_arrays(f"eq_{j + 1}", x_idx, r.H[j], "=", r.h[j])


def _add_x(model: MiqpModel, inst: GmmInstance) -> np.ndarray:
    r = inst.region
    return np.array([model.add_var(f"x_{i + 1}", r.box_lo[i], r.box_hi[i]) for i in range(inst.n)], dtype=np.int64)


def build_skeleton(
    inst: GmmInstance, bounds: ModelBounds | None = None, options: BuildOptions | None = None
) -> MiqpModel:
    """Exact reformulation without the Phi(z_k) >= zeta_k rows.

    Callers attach an outer or inner block per component to close the
    model; the CDF constraint itself is not MIQP-representable.
    """
    require_valid(inst)
    bounds = bounds or ModelBounds()
    options = options or BuildOptions()
    model = MiqpModel()
    x_idx = _add_x(model, inst)
    for k in range(1, inst.K + 1):
        model.add_var(f"z_{k}", bounds.z_lo, bounds.z_hi)
        model.add_var(f"zeta_{k}", 0.0, 1.0)
        model.add_var(f"lam_{k}", 0.0, math.inf)
    model.add_row("mix", [(f"zeta_{k}", comp.weight) for k, comp in enumerate(inst.components, start=1)], ">=", inst.theta)
    add_region_rows(model, inst, x_idx)
    for k, comp in enumerate(inst.components, start=1):
        z, lam = model.var(f"z_{k}"), model.var(f"lam_{k}")
        model.add_row_arrays(f"bil_{k}", x_idx, comp.mean, "<=", inst.b, QuadTerms([z], [lam], [1.0]))
        quad = _sigma_quad(comp.covariance, x_idx, lam)
        empty = np.zeros(0, dtype=np.int64)
        if options.split_equality:
            model.add_row_arrays(f"qeq_{k}_le", empty, [], "<=", 0.0, quad)
            model.add_row_arrays(f"qeq_{k}_ge", empty, [], ">=", 0.0, quad)
        else:
            model.add_row_arrays(f"qeq_{k}", empty, [], "=", 0.0, quad)
    model.set_objective(x_idx, inst.c)
    model.metadata = {
        "model_kind": "skeleton",
        "n": inst.n,
        "K": inst.K,
        "theta": inst.theta,
        "tau": None,
        "suggested_mip_gap": default_tau(inst.theta),
    }
    return model


def _sos2_binarized(model: MiqpModel, prefix: str, k: int, alphas: list[str]) -> None:
    """Segment binaries: alpha_i <= u_i + u_{i+1}, at most one segment active."""
    seg_names = [f"sosb_{k}_{j}" for j in range(1, len(alphas))]
    for name in seg_names:
        model.add_var(name, kind=BINARY)
    last = len(alphas) - 1
    for i, a in enumerate(alphas):
        terms = [(a, 1.0)]
        if i >= 1:
            terms.append((seg_names[i - 1], -1.0))
        if i < last:
            terms.append((seg_names[i], -1.0))
        model.add_row(f"{prefix}_sosb_{i}", terms, "<=", 0.0)
    model.add_row(f"{prefix}_sosb_sum", [(s, 1.0) for s in seg_names], "<=", 1.0)


def attach_outer_block(
    model: MiqpModel, k: int, pwl: PwlApprox, bounds: ModelBounds, sos2_as_binary: bool = False
) -> None:
    """Rows encoding Phi_outer(z_k) >= zeta_k for component index k (0-based)."""
    if pwl.kind is not Kind.OUTER:
        raise UsageError("attach_outer_block needs an OUTER approximation")
    bounds.check(pwl)
    bp = pwl.breakpoints
    L, R = bp.left_count, bp.right_count
    kk = k + 1
    z, zeta = f"z_{kk}", f"zeta_{kk}"
    for name in (z, zeta):
        model.var(name)
    alpha = [f"alpha_{kk}_{i}" for i in range(L + 1)]
    t = [f"t_{kk}_{j}" for j in (1, 2, 3)]
    y = [f"y_{kk}_{j}" for j in (1, 2, 3)]
    for a in alpha:
        model.add_var(a, 0.0, math.inf)
    for name in t:
        model.add_var(name, kind=BINARY)
    for name in y:
        model.add_var(name, -math.inf, math.inf)

    p = f"H_{kk}"
    floor = std_normal_cdf(bp.z_left)
    for i, (g, g0) in enumerate(pwl.right_coeffs):
        model.add_row(f"{p}_tan_{i}", [(t[0], floor), (t[1], 1.0), (y[2], g), (t[2], g0), (zeta, -1.0)], ">=", 0.0)
    sec = [(t[0], floor)] + [(alpha[i], std_normal_cdf(bp.at(-i))) for i in range(L + 1)]
    model.add_row(f"{p}_sec", sec + [(t[2], 1.0), (zeta, -1.0)], ">=", 0.0)
    model.add_row(f"{p}_tsum", [(name, 1.0) for name in t], "=", 1.0)
    model.add_row(f"{p}_zlink", [(z, 1.0)] + [(name, -1.0) for name in y], "=", 0.0)
    model.add_row(f"{p}_y1lo", [(y[0], 1.0), (t[0], -bounds.z_lo)], ">=", 0.0)
    model.add_row(f"{p}_y1hi", [(y[0], 1.0), (t[0], -bp.z_left)], "<=", 0.0)
    model.add_row(f"{p}_y3lo", [(y[2], 1.0)], ">=", 0.0)
    model.add_row(f"{p}_y3hi", [(y[2], 1.0), (t[2], -bounds.z_hi)], "<=", 0.0)
    model.add_row(f"{p}_y2def", [(y[1], 1.0)] + [(alpha[i], -bp.at(-i)) for i in range(L + 1)], "=", 0.0)
    model.add_row(f"{p}_t2def", [(t[1], 1.0)] + [(a, -1.0) for a in alpha], "=", 0.0)
    if sos2_as_binary:
        _sos2_binarized(model, p, kk, alpha)
    else:
        model.add_sos2(f"sos2_{kk}", alpha)


def attach_inner_block(model: MiqpModel, k: int, pwl: PwlApprox, bounds: ModelBounds) -> None:
    """Rows encoding Phi_inner(z_k) >= zeta_k for component index k (0-based).

    The y_1 upper link uses z_{-L+1} rather than z_{-L}, so the last
    tangent stays reachable on (z_{-L}, z_{-L+1}) where it beats the
    others; with z_{-L} the block would miss a sliver of that interval.
    """
    if pwl.kind is not Kind.INNER:
        raise UsageError("attach_inner_block needs an INNER approximation")
    bounds.check(pwl)
    bp = pwl.breakpoints
    L, R = bp.left_count, bp.right_count
    kk = k + 1
    z, zeta = f"z_{kk}", f"zeta_{kk}"
    for name in (z, zeta):
        model.var(name)
    alpha = [f"alpha_{kk}_{i}" for i in range(L)]
    t = [f"t_{kk}_{j}" for j in (1, 2, 3, 4)]
    y = [f"y_{kk}_{j}" for j in (1, 2, 3, 4)]
    fz = [f"frakz_{kk}_{i}" for i in range(L)]
    for a in alpha:
        model.add_var(a, kind=BINARY)
    for name in t:
        model.add_var(name, kind=BINARY)
    for name in y:
        model.add_var(name, -math.inf, math.inf)
    for name in fz:
        model.add_var(name, -math.inf, math.inf)

    p = f"G_{kk}"
    cap = std_normal_cdf(bp.z_right)
    for i, (g, g0) in enumerate(pwl.right_coeffs, start=1):
        model.add_row(
            f"{p}_sec_{i}",
            [(t[0], 1.0), (t[1], 1.0), (y[2], g), (t[2], g0), (t[3], cap), (zeta, -1.0)],
            ">=",
            0.0,
        )
    hL, hL0 = pwl.left_coeffs[L]
    tan = [(y[0], hL), (t[0], hL0)]
    for i in range(L):
        h, h0 = pwl.left_coeffs[i]
        tan += [(fz[i], h), (alpha[i], h0)]
    model.add_row(f"{p}_tan", tan + [(t[2], 1.0), (t[3], cap), (zeta, -1.0)], ">=", 0.0)
    model.add_row(f"{p}_tLnn", [(y[0], hL), (t[0], hL0)], ">=", 0.0)
    model.add_row(f"{p}_tsum", [(name, 1.0) for name in t], "=", 1.0)
    model.add_row(f"{p}_zlink", [(z, 1.0)] + [(name, -1.0) for name in y], "=", 0.0)
    model.add_row(f"{p}_y1lo", [(y[0], 1.0), (t[0], -bounds.z_lo)], ">=", 0.0)
    model.add_row(f"{p}_y1hi", [(y[0], 1.0), (t[0], -bp.at(-L + 1))], "<=", 0.0)
    model.add_row(f"{p}_t2def", [(t[1], 1.0)] + [(a, -1.0) for a in alpha], "=", 0.0)
    for i in range(L):
        model.add_row(f"{p}_fzlo_{i}", [(fz[i], 1.0), (alpha[i], -bp.at(-i - 1))], ">=", 0.0)
        model.add_row(f"{p}_fzhi_{i}", [(fz[i], 1.0)], "<=", 0.0)
    model.add_row(f"{p}_y2def", [(y[1], 1.0)] + [(name, -1.0) for name in fz], "=", 0.0)
    model.add_row(f"{p}_y3lo", [(y[2], 1.0)], ">=", 0.0)
    model.add_row(f"{p}_y3hi", [(y[2], 1.0), (t[2], -bp.z_right)], "<=", 0.0)
    model.add_row(f"{p}_y4lo", [(y[3], 1.0), (t[3], -bp.z_right)], ">=", 0.0)
    model.add_row(f"{p}_y4hi", [(y[3], 1.0), (t[3], -bounds.z_hi)], "<=", 0.0)


def _build_pwl_model(
    inst: GmmInstance,
    kind: Kind,
    tau: float | None,
    bounds: ModelBounds | None,
    options: BuildOptions | None,
    z_left: float,
    z_right: float,
) -> MiqpModel:
    tau = default_tau(inst.theta) if tau is None else float(tau)
    bounds = bounds or ModelBounds()
    options = options or BuildOptions()
    pwl = build_pwl(breakpoints(kind, tau, z_left, z_right))
    model = build_skeleton(inst, bounds, options)
    for k in range(inst.K):
        if kind is Kind.OUTER:
            attach_outer_block(model, k, pwl, bounds, options.sos2_as_binary)
        else:
            attach_inner_block(model, k, pwl, bounds)
    bp = pwl.breakpoints
    model.metadata.update(
        {
            "model_kind": "pwl-o" if kind is Kind.OUTER else "pwl-i",
            "tau": tau,
            "L": bp.left_count,
            "R": bp.right_count,
            "z_left": bp.z_left,
            "z_right": bp.z_right,
            "z_lo": bounds.z_lo,
            "z_hi": bounds.z_hi,
        }
    )
    return model


def build_pwl_outer(
    inst: GmmInstance,
    tau: float | None = None,
    bounds: ModelBounds | None = None,
    options: BuildOptions | None = None,
    z_left: float = DEFAULT_Z_LEFT,
    z_right: float = DEFAULT_Z_RIGHT,
) -> MiqpModel:
    """Relaxation: skeleton plus one outer block per component (tau defaults to (1 - theta)/10)."""
    return _build_pwl_model(inst, Kind.OUTER, tau, bounds, options, z_left, z_right)


def build_pwl_inner(
    inst: GmmInstance,
    tau: float | None = None,
    bounds: ModelBounds | None = None,
    options: BuildOptions | None = None,
    z_left: float = DEFAULT_Z_LEFT,
    z_right: float = DEFAULT_Z_RIGHT,
) -> MiqpModel:
    """Restriction: skeleton plus one inner block per component."""
    return _build_pwl_model(inst, Kind.INNER, tau, bounds, options, z_left, z_right)


def default_sample_count(theta: float) -> int:
    scale = 20.0 if theta >= SAA_HIGH_THETA - 1e-12 else 100.0
    return int(round(scale / (1.0 - theta)))


def saa_budget(theta: float, sample_count: int) -> int:
    """Largest number of violated scenarios allowed, floor((1 - theta) S)."""
    return int(math.floor((1.0 - theta) * sample_count + 1e-9))


def build_saa(
    inst: GmmInstance,
    sample_count: int | None = None,
    big_m: float = DEFAULT_BIG_M,
    rng: np.random.Generator | None = None,
) -> MiqpModel:
    """Big-M scenario model over mixture samples; y_s = 1 drops scenario s."""
    require_valid(inst)
    S = default_sample_count(inst.theta) if sample_count is None else int(sample_count)
    if S < 1:
        raise DomainError("sample_count must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    xi = sample(inst, S, rng)
    model = MiqpModel()
    x_idx = _add_x(model, inst)
    y_idx = np.array([model.add_var(f"saa_y_{s}", kind=BINARY) for s in range(1, S + 1)], dtype=np.int64)
    idx_all = [np.append(x_idx, y_idx[s]) for s in range(S)]
    for s in range(S):
        model.add_row_arrays(f"saa_{s + 1}", idx_all[s], np.append(xi[s], -big_m), "<=", inst.b)
    model.add_row_arrays("saa_card", y_idx, np.ones(S), "<=", float(saa_budget(inst.theta, S)))
    add_region_rows(model, inst, x_idx)
    model.set_objective(x_idx, inst.c)
    model.metadata = {
        "model_kind": "saa",
        "n": inst.n,
        "K": inst.K,
        "theta": inst.theta,
        "tau": None,
        "sample_count": S,
        "big_m": float(big_m),
        "suggested_mip_gap": default_tau(inst.theta),
    }
    return model


def expected_counts(kind: str, n: int, K: int, m: int, p: int, L: int = 0, R: int = 0, S: int = 0) -> dict:
    """Closed-form model sizes (variables, binaries, linear and quadratic rows)."""
    if kind == "skeleton":
        return {"variables": n + 3 * K, "binaries": 0, "linear_rows": 1 + m + p, "quadratic_rows": 2 * K}
    if kind == "pwl-o":
        return {
            "variables": n + K * (L + 10),
            "binaries": 3 * K,
            "linear_rows": 1 + m + p + K * (R + 10),
            "quadratic_rows": 2 * K,
        }
    if kind == "pwl-i":
        return {
            "variables": n + K * (2 * L + 11),
            "binaries": K * (L + 4),
            "linear_rows": 1 + m + p + K * (R + 2 * L + 12),
            "quadratic_rows": 2 * K,
        }
    if kind == "saa":
        return {"variables": n + S, "binaries": S, "linear_rows": S + 1 + m + p, "quadratic_rows": 0}
    raise DomainError(f"unknown model kind {kind!r}")
