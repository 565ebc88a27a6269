"""CPLEX-LP dialect writer and parser for :class:`MiqpModel`.

The writer is canonical: variables in declaration order, rows in emission
order, every number printed with 17 significant digits and an explicit
sign. The parser reads back exactly what the writer produces, so
``write_lp(parse_lp(write_lp(m))) == write_lp(m)``.

Large quadratic blocks (x' Sigma x) dominate both directions, so their
formatted and parsed forms are memoized by content.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import OrderedDict

import numpy as np

from .errors import DomainError, ValidationError
from .ir import BINARY, CONTINUOUS, Constraint, MiqpModel, QuadTerms, Sos2Group
from .jsonio import dumps17, fmt_float

META_PREFIX = "\\ gmmcc-meta "
TERMS_PER_LINE = 4
NAMES_PER_LINE = 8
CONT = "\n   "
_QUAD_TERM = re.compile(r"([+-]) (\S+) (\S+) (?:\^2|\* (\S+))")
_CACHE_SIZE = 32


class _Lru(OrderedDict):
    def __init__(self, size: int):
        super().__init__()
        self.size = size

    def get_or(self, key, make):
        if key in self:
            self.move_to_end(key)
            return self[key]
        val = make()
        self[key] = val
        if len(self) > self.size:
            self.popitem(last=False)
        return val


_format_cache = _Lru(_CACHE_SIZE)
_parse_cache = _Lru(_CACHE_SIZE)


def clear_caches() -> None:
    _format_cache.clear()
    _parse_cache.clear()


def _num(v: float) -> str:
    return fmt_float(v)


def _signed(v: float) -> tuple[str, str]:
    return ("-" if v < 0 else "+"), fmt_float(abs(v))


def _wrap(chunks: list[str], per_line: int) -> str:
    if len(chunks) <= per_line:
        return " ".join(chunks)
    return CONT.join(" ".join(chunks[i : i + per_line]) for i in range(0, len(chunks), per_line))


def _linear_chunks(idx: np.ndarray, vals: np.ndarray, names: list[str]) -> list[str]:
    out = []
    for i, v in zip(idx.tolist(), vals.tolist()):
        s, a = _signed(v)
        out.append(f"{s} {a} {names[i]}")
    return out


def _format_quad(q: QuadTerms, names: list[str]) -> str:
    used = np.unique(np.concatenate([q.rows, q.cols]))
    h = hashlib.blake2b(digest_size=20)
    h.update(q.rows.tobytes())
    h.update(q.cols.tobytes())
    h.update(q.vals.tobytes())
    h.update("\0".join(names[i] for i in used.tolist()).encode())
    key = h.digest()

    def make():
        chunks = []
        for r, c, v in zip(q.rows.tolist(), q.cols.tolist(), q.vals.tolist()):
            s, a = _signed(v)
            if r == c:
                chunks.append(f"{s} {a} {names[r]} ^2")
            else:
                chunks.append(f"{s} {a} {names[r]} * {names[c]}")
        return "[ " + _wrap(chunks, TERMS_PER_LINE) + " ]"

    return _format_cache.get_or(key, make)


def _bound_line(name: str, lo: float, hi: float) -> str:
    if math.isinf(lo) and math.isinf(hi):
        return f" {name} free"
    if math.isinf(hi):
        return f" {name} >= {_num(lo)}"
    lo_s = "-inf" if math.isinf(lo) else _num(lo)
    return f" {lo_s} <= {name} <= {_num(hi)}"


def write_lp(model: MiqpModel) -> str:
    names = model.names
    parts = [META_PREFIX + dumps17(model.metadata, indent=None).strip(), "Minimize"]
    obj = _linear_chunks(model.objective_idx, model.objective_vals, names)
    parts.append(" obj:" + (" " + _wrap(obj, TERMS_PER_LINE) if obj else ""))
    parts.append("Subject To")
    for c in model.constraints:
        chunks = _linear_chunks(c.idx, c.vals, names)
        if c.quad is not None:
            chunks.append(_format_quad(c.quad, names))
        if not chunks:
            raise DomainError(f"row {c.name} has no terms")
        parts.append(f" {c.name}: {_wrap(chunks, TERMS_PER_LINE)} {c.sense} {_num(c.rhs)}")
    parts.append("Bounds")
    for v in model.variables:
        parts.append(_bound_line(v.name, v.lower, v.upper))
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        parts.append("Binaries")
        parts.append(" " + _wrap(binaries, NAMES_PER_LINE))
    if model.sos2_groups:
        parts.append("SOS")
        for g in model.sos2_groups:
            entries = [f"{names[m]}:{pos}" for pos, m in enumerate(g.members, start=1)]
            parts.append(f" {g.name}: S2:: {_wrap(entries, NAMES_PER_LINE)}")
    parts.append("End")
    return "\n".join(parts) + "\n"


# parsing


def _statements(lines: list[str]) -> list[str]:
    return [line.strip() for line in lines if line.strip()]


def _parse_linear(tokens: list[str], index: dict[str, int], where: str) -> tuple[list[int], list[float]]:
    if len(tokens) % 3:
        raise ValidationError(f"{where}: malformed linear expression")
    idx, vals = [], []
    for j in range(0, len(tokens), 3):
        sign, coef, name = tokens[j : j + 3]
        if sign not in "+-" or name not in index:
            raise ValidationError(f"{where}: bad term {' '.join(tokens[j:j + 3])!r}")
        v = float(coef)
        idx.append(index[name])
        vals.append(-v if sign == "-" else v)
    return idx, vals


def _parse_quad_text(text: str):
    def make():
        found = _QUAD_TERM.findall(text)
        codes: dict[str, int] = {}
        ri = np.fromiter((codes.setdefault(t[2], len(codes)) for t in found), dtype=np.int64, count=len(found))
        ci = np.fromiter(
            (codes.setdefault(t[3] or t[2], len(codes)) for t in found), dtype=np.int64, count=len(found)
        )
        vals = np.array([t[1] for t in found], dtype=float)
        neg = np.fromiter((t[0] == "-" for t in found), dtype=bool, count=len(found))
        vals[neg] = -vals[neg]
        return tuple(codes), ri, ci, vals

    key = hashlib.blake2b(text.encode(), digest_size=20).digest()
    return _parse_cache.get_or(key, make)


def _quad_from_text(text: str, index: dict[str, int], where: str) -> QuadTerms:
    uniq, ri, ci, vals = _parse_quad_text(text)
    try:
        lookup = np.array([index[u] for u in uniq], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"{where}: undeclared variable {exc.args[0]!r}") from None
    if not uniq:
        lookup = np.zeros(0, dtype=np.int64)
    return QuadTerms(lookup[ri], lookup[ci], vals.copy())


def parse_lp(text: str) -> MiqpModel:
    # fold continuation lines back onto their statement
    lines = text.replace(CONT, " ").split("\n")
    if not lines or not lines[0].startswith(META_PREFIX):
        raise ValidationError("missing gmmcc-meta header line")
    metadata = json.loads(lines[0][len(META_PREFIX) :])
    sections: dict[str, list[str]] = {}
    current = None
    for line in lines[1:]:
        key = line.strip().lower()
        if not line.startswith(" ") and key in ("minimize", "subject to", "bounds", "binaries", "sos", "end"):
            current = key
            sections.setdefault(current, [])
            continue
        if current is None:
            if line.strip():
                raise ValidationError(f"text outside any section: {line[:40]!r}")
            continue
        sections[current].append(line)
    for required in ("minimize", "subject to", "bounds", "end"):
        if required not in sections:
            raise ValidationError(f"missing {required!r} section")

    model = MiqpModel(metadata=metadata)
    binaries = set()
    for stmt in _statements(sections.get("binaries", [])):
        binaries.update(stmt.split())
    for stmt in _statements(sections["bounds"]):
        tok = stmt.split()
        if len(tok) == 2 and tok[1] == "free":
            name, lo, hi = tok[0], -math.inf, math.inf
        elif len(tok) == 3 and tok[1] == ">=":
            name, lo, hi = tok[0], float(tok[2]), math.inf
        elif len(tok) == 5 and tok[1] == tok[3] == "<=":
            name, lo, hi = tok[2], float(tok[0]), float(tok[4])
        else:
            raise ValidationError(f"unrecognized bound line {stmt!r}")
        model.add_var(name, lo, hi, BINARY if name in binaries else CONTINUOUS)
    if binaries - set(model._index):
        raise ValidationError("Binaries section names an undeclared variable")
    index = model._index

    obj = _statements(sections["minimize"])
    if len(obj) != 1 or not obj[0].startswith("obj:"):
        raise ValidationError("objective must be a single 'obj:' statement")
    oi, ov = _parse_linear(obj[0].split()[1:], index, "objective")
    model.set_objective(oi, ov)

    for stmt in _statements(sections["subject to"]):
        name, _, body = stmt.partition(": ")
        quad = None
        lb = body.find("[")
        if lb >= 0:
            rb = body.rindex("]")
            quad = _quad_from_text(body[lb + 1 : rb], index, name)
            body = body[:lb] + body[rb + 1 :]
        tok = body.split()
        if len(tok) < 2 or tok[-2] not in ("<=", ">=", "="):
            raise ValidationError(f"row {name}: missing sense/rhs")
        idx, vals = _parse_linear(tok[:-2], index, name)
        model.constraints.append(Constraint(name, idx, vals, tok[-2], float(tok[-1]), quad))

    for stmt in _statements(sections.get("sos", [])):
        name, _, body = stmt.partition(": S2:: ")
        members = []
        for pos, entry in enumerate(body.split(), start=1):
            vname, _, weight = entry.rpartition(":")
            if int(weight) != pos or vname not in index:
                raise ValidationError(f"SOS group {name}: bad entry {entry!r}")
            members.append(index[vname])
        model.sos2_groups.append(Sos2Group(name, tuple(members)))
    return model
