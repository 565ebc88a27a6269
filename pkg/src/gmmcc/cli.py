"""Command-line entry point ``gmmcc``.

Exit codes: 0 success, 2 usage, 3 validation failure, 4 certification or
audit failure (including a solution that fails verification), 5 no
feasible point at the requested grid resolution.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .builders import BuildOptions, ModelBounds, build_pwl_inner, build_pwl_outer, build_saa, default_sample_count
from .errors import CertificationError, DomainError, GmmccError, UsageError, ValidationError
from .factory import GenConfig, generate_instance
from .gmm import GmmInstance
from .jsonio import atomic_write, dumps17, load_json, sha256_bytes, sha256_file
from .lpformat import write_lp
from .pwl import DEFAULT_Z_LEFT, DEFAULT_Z_RIGHT, breakpoints, count_bound, count_scaling_probe, default_tau
from .verify import desk_solve, sandwich_audit, verify

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_CERTIFICATION = 4
EXIT_INFEASIBLE = 5
SOLUTION_SCHEMA = "gmmcc-solution-v1"
DEFAULT_PROBE_TAUS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


class _Run:
    """Collects hashes and timing for the run manifest."""

    def __init__(self, args: argparse.Namespace, argv: list[str]):
        self.args = args
        self.argv = argv
        self.start = time.perf_counter()
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def read_input(self, path: str) -> None:
        self.inputs[Path(path).name] = sha256_file(path)

    def write(self, path: Path, data: str) -> None:
        atomic_write(path, data)
        self.outputs[path.name] = sha256_bytes(data.encode("utf-8"))

    def manifest(self, status: int) -> str:
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        return dumps17(
            {
                "schema": "gmmcc-manifest-v1",
                "command": ["gmmcc", *self.argv],
                "config": config,
                "seed": getattr(self.args, "seed", None),
                "version": __version__,
                "inputs": self.inputs,
                "outputs": self.outputs,
                "exit_status": status,
                "wall_time_s": round(time.perf_counter() - self.start, 6),
            }
        )

    def emit_manifest(self, status: int, path: Path | None) -> None:
        text = self.manifest(status)
        if path is None:
            sys.stderr.write(text)
        else:
            atomic_write(path, text)


def _load_instance(run: _Run, path: str) -> GmmInstance:
    try:
        data = load_json(path)
    except FileNotFoundError:
        raise UsageError(f"instance file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"instance file is not valid JSON: {exc}") from None
    run.read_input(path)
    return GmmInstance.from_dict(data)


def _load_solution(run: _Run, path: str, n: int) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"solution file not found: {path}") from None
    run.read_input(path)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if data.get("schema") != SOLUTION_SCHEMA:
            raise ValidationError(f"solution schema must be {SOLUTION_SCHEMA!r}")
        x = np.asarray(data["x"], dtype=float)
        if x.shape != (n,):
            raise ValidationError(f"solution has {x.size} entries, expected {n}")
        return x
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 2:
            raise ValidationError(f"solution line {lineno}: expected 'name value'")
        values[parts[0]] = float(parts[1])
    missing = [f"x_{i}" for i in range(1, n + 1) if f"x_{i}" not in values]
    if missing:
        raise ValidationError(f"solution is missing {missing[:3]}{'...' if len(missing) > 3 else ''}")
    return np.array([values[f"x_{i}"] for i in range(1, n + 1)])


def _instance_with_theta(inst: GmmInstance, theta: float | None) -> GmmInstance:
    if theta is None:
        return inst
    return GmmInstance(inst.c, inst.b, theta, inst.components, inst.region)


# commands


def cmd_generate(args, run: _Run) -> int:
    cfg = GenConfig(
        n=args.n,
        K=args.k,
        theta=args.theta,
        varrho=args.varrho,
        varsigma=args.varsigma,
        weight_mode=args.weights,
        seed=args.seed,
        box_half_width=args.box_half_width,
        ineq_rows=args.ineq_rows,
        b_samples=args.b_samples,
        b_stddev_multiplier=args.b_multiplier,
    )
    inst = generate_instance(cfg)
    out = Path(args.out)
    run.write(out, dumps17(inst.to_dict()))
    print(f"wrote {out} (n={inst.n}, K={inst.K}, b={inst.b:.6g})")
    run.emit_manifest(EXIT_OK, out.with_name(out.name + ".manifest.json"))
    return EXIT_OK


def cmd_breakpoints(args, run: _Run) -> int:
    tau = args.tau if args.tau is not None else default_tau(args.theta)
    bp = breakpoints(args.kind, tau, args.z_left, args.z_right)
    doc = bp.to_dict()
    doc["count"] = len(bp)
    text = dumps17(doc)
    if args.out:
        out = Path(args.out)
        run.write(out, text)
        run.emit_manifest(EXIT_OK, out.with_name(out.name + ".manifest.json"))
    else:
        sys.stdout.write(text)
        run.outputs["stdout"] = sha256_bytes(text.encode())
        run.emit_manifest(EXIT_OK, None)
    print(f"kind={bp.kind.value} tau={tau!r} L={bp.left_count} R={bp.right_count} count={len(bp)} "
          f"z_left={bp.z_left!r} z_right={bp.z_right!r}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_build(args, run: _Run) -> int:
    inst = _instance_with_theta(_load_instance(run, args.instance), args.theta)
    out_dir = Path(args.out_dir)
    if args.kind == "saa":
        S = args.samples if args.samples is not None else default_sample_count(inst.theta)
        model = build_saa(inst, S, args.big_m, np.random.default_rng(args.seed))
    else:
        bounds = ModelBounds(args.z_lo, args.z_hi)
        options = BuildOptions(split_equality=args.split_equality, sos2_as_binary=args.sos2_as_binary)
        builder = build_pwl_outer if args.kind == "pwl-o" else build_pwl_inner
        model = builder(inst, args.tau, bounds, options, args.z_left, args.z_right)
    model.require_valid()
    run.write(out_dir / "model.lp", write_lp(model))
    run.write(out_dir / "model.ir.json", dumps17(model.to_dict(), indent=None))
    counts = model.counts()
    print(
        f"wrote {out_dir}/model.lp: {counts.variables} variables, {counts.binaries} binaries, "
        f"{counts.linear_rows} linear rows, {counts.quadratic_rows} quadratic rows"
    )
    run.emit_manifest(EXIT_OK, out_dir / "manifest.json")
    return EXIT_OK


def _report_out(run: _Run, args, doc: dict, status: int) -> int:
    text = dumps17(doc)
    if args.out:
        out = Path(args.out)
        run.write(out, text)
        run.emit_manifest(status, out.with_name(out.name + ".manifest.json"))
    else:
        sys.stdout.write(text)
        run.outputs["stdout"] = sha256_bytes(text.encode())
        run.emit_manifest(status, None)
    return status


def cmd_verify(args, run: _Run) -> int:
    inst = _load_instance(run, args.instance)
    x = _load_solution(run, args.solution, inst.n)
    rep = verify(inst, x, args.tau_hat)
    status = EXIT_OK if rep.tau_feasible else EXIT_CERTIFICATION
    return _report_out(run, args, rep.to_dict(), status)


def cmd_desk_solve(args, run: _Run) -> int:
    inst = _load_instance(run, args.instance)
    res = desk_solve(inst, args.resolution, args.refine)
    doc = {
        "feasible": res.feasible,
        "x": None if res.x is None else res.x.tolist(),
        "objective": res.objective,
        "theta_check": res.theta_check,
        "cell_diameter": res.cell_diameter,
    }
    return _report_out(run, args, doc, EXIT_OK if res.feasible else EXIT_INFEASIBLE)


def cmd_audit(args, run: _Run) -> int:
    inst = _load_instance(run, args.instance)
    tau = args.tau if args.tau is not None else default_tau(inst.theta)
    rep = sandwich_audit(inst, tau, args.samples, np.random.default_rng(args.seed), args.z_left, args.z_right)
    return _report_out(run, args, rep.to_dict(), EXIT_OK)


def cmd_probe(args, run: _Run) -> int:
    taus = args.taus or list(DEFAULT_PROBE_TAUS)
    rows = count_scaling_probe(taus, args.kind)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", "count", "bound_ratio"])
    for tau, count in rows:
        writer.writerow(["%.17g" % tau, count, "%.17g" % (count / count_bound(tau))])
    text = buf.getvalue()
    if args.out:
        out = Path(args.out)
        run.write(out, text)
        run.emit_manifest(EXIT_OK, out.with_name(out.name + ".manifest.json"))
    else:
        sys.stdout.write(text)
        run.outputs["stdout"] = sha256_bytes(text.encode())
        run.emit_manifest(EXIT_OK, None)
    return EXIT_OK


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0.0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmmcc", description="Gaussian-mixture chance-constraint model tools.")
    p.add_argument("--version", action="version", version=f"gmmcc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def zrange(sp):
        sp.add_argument("--z-left", type=float, default=DEFAULT_Z_LEFT)
        sp.add_argument("--z-right", type=float, default=DEFAULT_Z_RIGHT)

    g = sub.add_parser("generate", help="generate a synthetic instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--theta", type=_probability, required=True)
    g.add_argument("--varrho", type=_positive_float, default=2.0)
    g.add_argument("--varsigma", type=_positive_float, default=2.0)
    g.add_argument("--weights", choices=["equal", "paper"], default="equal")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--box-half-width", type=_positive_float, default=20.0)
    g.add_argument("--ineq-rows", type=int, default=None)
    g.add_argument("--b-samples", type=int, default=1000)
    g.add_argument("--b-multiplier", type=_positive_float, default=1.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("breakpoints", help="print a certified breakpoint array")
    grp = b.add_mutually_exclusive_group(required=True)
    grp.add_argument("--theta", type=_probability)
    grp.add_argument("--tau", type=_positive_float)
    b.add_argument("--kind", choices=["outer", "inner"], default="outer")
    zrange(b)
    b.add_argument("--out")
    b.set_defaults(func=cmd_breakpoints)

    m = sub.add_parser("build", help="build a PWL-O, PWL-I or SAA model and export it")
    m.add_argument("--instance", required=True)
    m.add_argument("--kind", choices=["pwl-o", "pwl-i", "saa"], required=True)
    m.add_argument("--out-dir", default=".")
    m.add_argument("--theta", type=_probability, default=None, help="override the instance threshold")
    m.add_argument("--tau", type=_positive_float, default=None)
    m.add_argument("--samples", type=int, default=None)
    m.add_argument("--big-m", type=_positive_float, default=1e6)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--z-lo", type=float, default=-1e4)
    m.add_argument("--z-hi", type=float, default=1e4)
    m.add_argument("--split-equality", action="store_true")
    m.add_argument("--sos2-as-binary", action="store_true")
    zrange(m)
    m.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="check a solution against the exact chance constraint")
    v.add_argument("--instance", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--tau-hat", type=float, default=0.0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("desk-solve", help="grid-search a tiny (n <= 3) instance")
    d.add_argument("--instance", required=True)
    d.add_argument("--resolution", type=int, default=64)
    d.add_argument("--refine", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_desk_solve)

    a = sub.add_parser("audit", help="sandwich audit of inner/exact/outer probabilities")
    a.add_argument("--instance", required=True)
    a.add_argument("--tau", type=_positive_float, default=None)
    a.add_argument("--samples", type=int, default=10000)
    a.add_argument("--seed", type=int, default=0)
    zrange(a)
    a.add_argument("--out")
    a.set_defaults(func=cmd_audit)

    r = sub.add_parser("probe", help="breakpoint count scaling sweep as CSV")
    r.add_argument("--taus", type=_positive_float, nargs="*")
    r.add_argument("--kind", choices=["outer", "inner"], default="outer")
    r.add_argument("--out")
    r.set_defaults(func=cmd_probe)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    env_seed = os.environ.get("GMMCC_SEED")
    if env_seed is not None and hasattr(args, "seed"):
        try:
            args.seed = int(env_seed)
        except ValueError:
            parser.error(f"GMMCC_SEED must be an integer, got {env_seed!r}")
    run = _Run(args, argv)
    try:
        return args.func(args, run)
    except ValidationError as exc:
        print(f"gmmcc: validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CertificationError as exc:
        print(f"gmmcc: certification failed: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (UsageError, DomainError) as exc:
        print(f"gmmcc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GmmccError as exc:
        print(f"gmmcc: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
