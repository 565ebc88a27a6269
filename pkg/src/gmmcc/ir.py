"""Solver-agnostic MIQP intermediate representation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, ValidationError

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", ">=", "=")
IR_SCHEMA = "gmmcc-ir-v1"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass(eq=False)
class QuadTerms:
    """Sparse quadratic form sum vals[t] * v[rows[t]] * v[cols[t]]."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        self.cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        self.vals = np.asarray(self.vals, dtype=float).reshape(-1)
        if not (self.rows.size == self.cols.size == self.vals.size):
            raise DomainError("quadratic term arrays differ in length")

    def __len__(self) -> int:
        return self.vals.size

    def value(self, v: np.ndarray) -> float:
        return float(np.sum(self.vals * v[self.rows] * v[self.cols]))

    def same_as(self, other: QuadTerms) -> bool:
        return (
            np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )


@dataclass(eq=False)
class Constraint:
    """Linear row, or quadratic row when `quad` is set."""

    name: str
    idx: np.ndarray
    vals: np.ndarray
    sense: str
    rhs: float
    quad: QuadTerms | None = None

    def __post_init__(self):
        self.idx = np.asarray(self.idx, dtype=np.int64).reshape(-1)
        self.vals = np.asarray(self.vals, dtype=float).reshape(-1)
        self.rhs = float(self.rhs)
        if self.idx.size != self.vals.size:
            raise DomainError(f"row {self.name}: index/value length mismatch")
        if self.sense not in SENSES:
            raise DomainError(f"row {self.name}: unknown sense {self.sense!r}")

    @property
    def is_quadratic(self) -> bool:
        return self.quad is not None

    def activity(self, v: np.ndarray) -> float:
        act = float(self.vals @ v[self.idx]) if self.idx.size else 0.0
        if self.quad is not None:
            act += self.quad.value(v)
        return act

    def violation(self, v: np.ndarray) -> float:
        act = self.activity(v)
        if self.sense == "<=":
            return max(0.0, act - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)

    def same_as(self, other: Constraint) -> bool:
        if (self.name, self.sense, self.rhs) != (other.name, other.sense, other.rhs):
            return False
        if not (np.array_equal(self.idx, other.idx) and np.array_equal(self.vals, other.vals)):
            return False
        if (self.quad is None) != (other.quad is None):
            return False
        return self.quad is None or self.quad.same_as(other.quad)


@dataclass(frozen=True)
class Sos2Group:
    name: str
    members: tuple[int, ...]


@dataclass
class ModelCounts:
    variables: int
    binaries: int
    linear_rows: int
    quadratic_rows: int
    sos2_groups: int


@dataclass(eq=False)
class MiqpModel:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    sos2_groups: list[Sos2Group] = field(default_factory=list)
    objective_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    objective_vals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    metadata: dict = field(default_factory=dict)
    _index: dict = field(default_factory=dict, repr=False)

    # construction

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf, kind: str = CONTINUOUS) -> int:
        if name in self._index:
            raise DomainError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        elif kind != CONTINUOUS:
            raise DomainError(f"unknown variable kind {kind!r}")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        return self._index[name]

    def var(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DomainError(f"unknown variable {name!r}") from None

    def add_row(self, name: str, terms: Mapping[str, float] | Iterable[tuple[str, float]], sense: str, rhs: float) -> Constraint:
        items = terms.items() if isinstance(terms, Mapping) else terms
        idx, vals = [], []
        for vname, coef in items:
            idx.append(self.var(vname))
            vals.append(coef)
        row = Constraint(name, np.array(idx, dtype=np.int64), np.array(vals, dtype=float), sense, rhs)
        self.constraints.append(row)
        return row

    def add_row_arrays(self, name: str, idx, vals, sense: str, rhs: float, quad: QuadTerms | None = None) -> Constraint:
        row = Constraint(name, idx, vals, sense, rhs, quad)
        self.constraints.append(row)
        return row

    def add_sos2(self, name: str, names: Iterable[str]) -> None:
        self.sos2_groups.append(Sos2Group(name, tuple(self.var(v) for v in names)))

    def set_objective(self, idx, vals) -> None:
        self.objective_idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        self.objective_vals = np.asarray(vals, dtype=float).reshape(-1)

    # inspection

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def linear_constraints(self) -> list[Constraint]:
        return [c for c in self.constraints if c.quad is None]

    @property
    def quadratic_constraints(self) -> list[Constraint]:
        return [c for c in self.constraints if c.quad is not None]

    def counts(self) -> ModelCounts:
        quad = sum(1 for c in self.constraints if c.quad is not None)
        return ModelCounts(
            variables=len(self.variables),
            binaries=sum(1 for v in self.variables if v.kind == BINARY),
            linear_rows=len(self.constraints) - quad,
            quadratic_rows=quad,
            sos2_groups=len(self.sos2_groups),
        )

    def validate(self) -> list[str]:
        """Structural diagnostics; an empty list means the IR is well formed."""
        diags = []
        nvar = len(self.variables)
        seen = set()
        for v in self.variables:
            if v.name in seen:
                diags.append(f"duplicate variable {v.name}")
            seen.add(v.name)
            if v.kind == BINARY and (v.lower, v.upper) != (0.0, 1.0):
                diags.append(f"binary {v.name} has bounds [{v.lower}, {v.upper}]")
            if math.isnan(v.lower) or math.isnan(v.upper) or v.lower > v.upper:
                diags.append(f"variable {v.name} has invalid bounds [{v.lower}, {v.upper}]")
        rows = set()
        for c in self.constraints:
            if c.name in rows:
                diags.append(f"duplicate row name {c.name}")
            rows.add(c.name)
            refs = [c.idx] if c.quad is None else [c.idx, c.quad.rows, c.quad.cols]
            if any(r.size and (r.min() < 0 or r.max() >= nvar) for r in refs):
                diags.append(f"row {c.name} references an undeclared variable")
            if not (np.all(np.isfinite(c.vals)) and math.isfinite(c.rhs)):
                diags.append(f"row {c.name} has non-finite data")
            if c.quad is not None and not np.all(np.isfinite(c.quad.vals)):
                diags.append(f"row {c.name} has non-finite quadratic data")
        for g in self.sos2_groups:
            if len(set(g.members)) != len(g.members):
                diags.append(f"SOS2 group {g.name} repeats a member")
            for m in g.members:
                if not 0 <= m < nvar:
                    diags.append(f"SOS2 group {g.name} references an undeclared variable")
                    break
                v = self.variables[m]
                if v.kind != CONTINUOUS or v.lower < 0.0:
                    diags.append(f"SOS2 member {v.name} must be continuous and nonnegative")
        if self.objective_idx.size and (self.objective_idx.min() < 0 or self.objective_idx.max() >= nvar):
            diags.append("objective references an undeclared variable")
        return diags

    def require_valid(self) -> None:
        diags = self.validate()
        if diags:
            raise ValidationError("invalid model: " + "; ".join(diags[:5]), diags)

    def vector(self, assignment: Mapping[str, float]) -> np.ndarray:
        """Dense value vector from a name -> value mapping; missing names are an error."""
        v = np.empty(len(self.variables))
        for i, var in enumerate(self.variables):
            try:
                v[i] = assignment[var.name]
            except KeyError:
                raise DomainError(f"assignment is missing {var.name!r}") from None
        return v

    def max_violation(self, assignment: Mapping[str, float] | np.ndarray) -> float:
        """Largest violation over bounds, integrality, rows and SOS2 adjacency."""
        v = assignment if isinstance(assignment, np.ndarray) else self.vector(assignment)
        worst = 0.0
        for i, var in enumerate(self.variables):
            worst = max(worst, var.lower - v[i], v[i] - var.upper)
            if var.kind == BINARY:
                worst = max(worst, abs(v[i] - round(v[i])))
        for c in self.constraints:
            worst = max(worst, c.violation(v))
        for g in self.sos2_groups:
            vals = np.abs(v[list(g.members)])
            nz = np.flatnonzero(vals > 0.0)
            if nz.size > 2 or (nz.size == 2 and nz[1] - nz[0] != 1):
                # mass outside the best adjacent pair
                pair = max(vals[j] + vals[j + 1] for j in range(vals.size - 1)) if vals.size > 1 else vals.sum()
                worst = max(worst, float(vals.sum() - pair))
        return worst

    def objective_value(self, v: np.ndarray) -> float:
        return float(self.objective_vals @ v[self.objective_idx]) if self.objective_idx.size else 0.0

    def same_as(self, other: MiqpModel) -> bool:
        """Structural equality (names, bounds, rows, SOS2, objective, metadata)."""
        return (
            self.variables == other.variables
            and len(self.constraints) == len(other.constraints)
            and all(a.same_as(b) for a, b in zip(self.constraints, other.constraints))
            and self.sos2_groups == other.sos2_groups
            and np.array_equal(self.objective_idx, other.objective_idx)
            and np.array_equal(self.objective_vals, other.objective_vals)
            and self.metadata == other.metadata
        )

    # serialization

    def to_dict(self) -> dict:
        def bound(x):
            return None if math.isinf(x) else x

        rows = []
        for c in self.constraints:
            row = {"name": c.name, "idx": c.idx.tolist(), "vals": c.vals.tolist(), "sense": c.sense, "rhs": c.rhs}
            if c.quad is not None:
                row["quad"] = {"rows": c.quad.rows.tolist(), "cols": c.quad.cols.tolist(), "vals": c.quad.vals.tolist()}
            rows.append(row)
        return {
            "schema": IR_SCHEMA,
            "metadata": self.metadata,
            "variables": [
                {"name": v.name, "kind": v.kind, "lower": bound(v.lower), "upper": bound(v.upper)} for v in self.variables
            ],
            "objective": {"sense": "minimize", "idx": self.objective_idx.tolist(), "vals": self.objective_vals.tolist()},
            "constraints": rows,
            "sos2": [{"name": g.name, "members": list(g.members)} for g in self.sos2_groups],
        }

    @classmethod
    def from_dict(cls, data: dict) -> MiqpModel:
        if data.get("schema") != IR_SCHEMA:
            raise ValidationError(f"expected schema {IR_SCHEMA!r}")
        m = cls(metadata=dict(data.get("metadata", {})))
        for v in data["variables"]:
            lo = -math.inf if v["lower"] is None else v["lower"]
            hi = math.inf if v["upper"] is None else v["upper"]
            m.add_var(v["name"], lo, hi, v["kind"])
        for r in data["constraints"]:
            q = r.get("quad")
            quad = QuadTerms(q["rows"], q["cols"], q["vals"]) if q is not None else None
            m.add_row_arrays(r["name"], r["idx"], r["vals"], r["sense"], r["rhs"], quad)
        for g in data["sos2"]:
            m.sos2_groups.append(Sos2Group(g["name"], tuple(g["members"])))
        m.set_objective(data["objective"]["idx"], data["objective"]["vals"])
        return m
