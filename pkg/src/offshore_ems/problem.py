"""Mixed-integer linear problem container, solver backend and LP/MPS export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

INF = math.inf


class AssemblyError(ValueError):
    """The problem cannot be built from the given state."""


class LinExpr:
    """Sparse affine expression ``sum(coef * x[i]) + const`` over variable indices."""

    __slots__ = ("terms", "const")
    __hash__ = None  # type: ignore[assignment]

    def __init__(self, terms: dict[int, float] | None = None, const: float = 0.0):
        self.terms = terms if terms is not None else {}
        self.const = float(const)

    def copy(self) -> "LinExpr":
        return LinExpr(dict(self.terms), self.const)

    def iadd(self, other, scale: float = 1.0) -> "LinExpr":
        if isinstance(other, LinExpr):
            terms = self.terms
            for i, c in other.terms.items():
                terms[i] = terms.get(i, 0.0) + scale * c
            self.const += scale * other.const
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other):
        return (-self).iadd(other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, k):
        if isinstance(k, LinExpr):
            raise TypeError("products of expressions are not linear")
        k = float(k)
        return LinExpr({i: c * k for i, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def __le__(self, other):
        return Constraint.from_relation(self - other, "<=")

    def __ge__(self, other):
        return Constraint.from_relation(self - other, ">=")

    def __eq__(self, other):  # type: ignore[override]
        return Constraint.from_relation(self - other, "==")

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[i] for i, c in self.terms.items())

    def __repr__(self):
        return f"LinExpr({self.terms}, {self.const})"


def as_expr(v) -> LinExpr:
    return v if isinstance(v, LinExpr) else LinExpr(const=float(v))


def quicksum(items: Iterable) -> LinExpr:
    total = LinExpr()
    for item in items:
        total.iadd(item)
    return total


@dataclass
class Constraint:
    """``lo <= expr.terms <= hi`` (the expression constant is folded into the bounds)."""

    terms: dict[int, float]
    lo: float
    hi: float
    name: str = ""

    @classmethod
    def from_relation(cls, diff: LinExpr, sense: str) -> "Constraint":
        rhs = -diff.const
        terms = {i: c for i, c in diff.terms.items() if c != 0.0}
        if sense == "<=":
            return cls(terms, -INF, rhs)
        if sense == ">=":
            return cls(terms, rhs, INF)
        return cls(terms, rhs, rhs)

    def named(self, name: str) -> "Constraint":
        self.name = name
        return self

    def activity(self, x: np.ndarray) -> float:
        return sum(c * x[i] for i, c in self.terms.items())

    def violation(self, x: np.ndarray) -> float:
        a = self.activity(x)
        return max(self.lo - a, a - self.hi, 0.0)

    @property
    def is_equality(self) -> bool:
        return self.lo == self.hi


@dataclass
class PlanningProblem:
    """One optimisation window: variable registry, constraints and objective."""

    t0: int = 0
    horizon: int = 1
    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: LinExpr = field(default_factory=LinExpr)
    boundary: object = None
    handles: object = None
    _index: dict[str, int] = field(default_factory=dict, repr=False)
    _row_names: set[str] = field(default_factory=set, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> LinExpr:
        if name in self._index:
            raise AssemblyError(f"variable {name!r} registered twice")
        i = len(self.names)
        self._index[name] = i
        self.names.append(name)
        self.lb.append(0.0 if binary else float(lb))
        self.ub.append(1.0 if binary else float(ub))
        self.binary.append(binary)
        return LinExpr({i: 1.0})

    def var(self, name: str) -> LinExpr:
        return LinExpr({self._index[name]: 1.0})

    def has_var(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def get_or_add_var(self, name: str, lb: float = 0.0, ub: float = INF) -> LinExpr:
        if name in self._index:
            return self.var(name)
        return self.add_var(name, lb, ub)

    def add(self, constraint: Constraint, name: str | None = None) -> Constraint:
        if name is not None:
            constraint.name = name
        if not constraint.name:
            constraint.name = f"c{len(self.constraints)}"
        if constraint.name in self._row_names:
            raise AssemblyError(f"constraint {constraint.name!r} added twice")
        self._row_names.add(constraint.name)
        self.constraints.append(constraint)
        return constraint

    def add_all(self, constraints: Iterable[Constraint]):
        for c in constraints:
            self.add(c)

    def check(self, x: np.ndarray) -> dict[str, float]:
        """Violation of every constraint and bound at ``x`` by direct substitution."""
        out = {c.name: c.violation(x) for c in self.constraints}
        for i, name in enumerate(self.names):
            v = x[i]
            viol = max(self.lb[i] - v, v - self.ub[i], 0.0)
            if self.binary[i]:
                viol = max(viol, abs(v - round(v)))
            out[f"bound:{name}"] = viol
        return out

    def max_violation(self, x: np.ndarray) -> float:
        return max(self.check(x).values(), default=0.0)

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for r, c in enumerate(self.constraints):
            for i, v in c.terms.items():
                rows.append(r)
                cols.append(i)
                vals.append(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), self.n_vars))

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for i, v in self.objective.terms.items():
            c[i] += v
        return c


@dataclass
class Solution:
    status: str  # optimal | feasible | infeasible | unbounded | timeout | error
    objective: float | None
    x: np.ndarray | None
    t0: int = 0
    message: str = ""
    problem: PlanningProblem | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")

    def value(self, item) -> float:
        if isinstance(item, str):
            return float(self.x[self.problem.index(item)])
        if isinstance(item, LinExpr):
            return item.value(self.x)
        return float(item)


class SolverError(RuntimeError):
    def __init__(self, solution: Solution, window: int | None = None):
        where = f"window {window} (t0={solution.t0})" if window is not None else f"t0={solution.t0}"
        super().__init__(f"solver returned {solution.status} at {where}: {solution.message}")
        self.solution = solution
        self.window = window


class SolverBackend(Protocol):
    supports_binaries: bool

    def solve(self, problem: PlanningProblem) -> Solution: ...


@dataclass
class HighsBackend:
    """Branch-and-cut in HiGHS through its own Python bindings, fed an in-memory column matrix."""

    mip_gap: float = 1e-6
    time_limit: float | None = None
    supports_binaries: bool = True

    def solve(self, problem: PlanningProblem) -> Solution:
        import highspy

        const = problem.objective.const
        if problem.n_vars == 0:
            return _solve_empty(problem)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", self.mip_gap)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("threads", 1)
        if self.time_limit is not None:
            h.setOptionValue("time_limit", float(self.time_limit))
        lp = highspy.HighsLp()
        lp.num_col_ = problem.n_vars
        lp.num_row_ = len(problem.constraints)
        lp.col_cost_ = problem.objective_vector()
        lp.col_lower_ = np.array(problem.lb)
        lp.col_upper_ = np.array(problem.ub)
        lp.row_lower_ = np.array([c.lo for c in problem.constraints])
        lp.row_upper_ = np.array([c.hi for c in problem.constraints])
        a = problem.matrix().tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = a.indptr
        lp.a_matrix_.index_ = a.indices
        lp.a_matrix_.value_ = a.data
        if any(problem.binary):
            lp.integrality_ = [
                highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous
                for b in problem.binary
            ]
        h.passModel(lp)
        h.run()
        status = h.getModelStatus()
        message = h.modelStatusToString(status)
        info = h.getInfo()
        has_x = info.primal_solution_status == 2  # feasible point available
        S = highspy.HighsModelStatus
        if status == S.kOptimal:
            name = "optimal"
        elif status in (S.kTimeLimit, S.kIterationLimit, S.kSolutionLimit, S.kInterrupt):
            name = "feasible" if has_x else "timeout"
        elif status == S.kInfeasible:
            name = "infeasible"
        elif status in (S.kUnbounded, S.kUnboundedOrInfeasible):
            name = "unbounded"
        else:
            name = "error"
        if name not in ("optimal", "feasible"):
            return Solution(name, None, None, problem.t0, message, problem)
        x = np.array(h.getSolution().col_value, dtype=float)
        _round_binaries(problem, x)
        return Solution(name, float(problem.objective_vector() @ x) + const, x, problem.t0, message, problem)


@dataclass
class ScipyHighsBackend:
    """scipy.optimize.milp with the HiGHS build bundled in scipy."""

    mip_gap: float = 1e-6
    time_limit: float | None = None
    presolve: bool = True
    supports_binaries: bool = True

    def solve(self, problem: PlanningProblem) -> Solution:
        const = problem.objective.const
        if problem.n_vars == 0:
            return _solve_empty(problem)
        options = {"mip_rel_gap": self.mip_gap, "disp": False, "presolve": self.presolve}
        if self.time_limit is not None:
            options["time_limit"] = self.time_limit
        kwargs = {}
        if problem.constraints:
            kwargs["constraints"] = LinearConstraint(
                problem.matrix(),
                np.array([c.lo for c in problem.constraints]),
                np.array([c.hi for c in problem.constraints]),
            )
        res = milp(
            problem.objective_vector(),
            integrality=np.array(problem.binary, dtype=int),
            bounds=Bounds(np.array(problem.lb), np.array(problem.ub)),
            options=options,
            **kwargs,
        )
        if res.x is not None and res.status in (0, 1):
            x = np.asarray(res.x, dtype=float)
            _round_binaries(problem, x)
            status = "optimal" if res.status == 0 else "feasible"
            return Solution(status, float(res.fun) + const, x, problem.t0, res.message, problem)
        status = {1: "timeout", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
        return Solution(status, None, None, problem.t0, res.message, problem)


def _solve_empty(problem: PlanningProblem) -> Solution:
    bad = [c for c in problem.constraints if c.lo > 1e-9 or c.hi < -1e-9]
    if bad:
        return Solution("infeasible", None, None, problem.t0, "empty problem", problem)
    return Solution("optimal", problem.objective.const, np.zeros(0), problem.t0, "", problem)


def _round_binaries(problem: PlanningProblem, x: np.ndarray):
    binaries = np.array(problem.binary)
    x[binaries] = np.round(x[binaries])


def solve(problem: PlanningProblem, backend: SolverBackend | None = None) -> Solution:
    return (backend or HighsBackend()).solve(problem)


# ---------------------------------------------------------------- export


def _num(v: float) -> str:
    if v == 0:
        return "0"
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def _split_rows(problem: PlanningProblem):
    """Rows as (name, terms, sense, rhs); ranged rows become two rows."""
    for c in problem.constraints:
        terms = sorted(c.terms.items())
        if not terms:
            if c.lo > 1e-9 or c.hi < -1e-9:
                terms = [(0, 0.0)]
            else:
                continue
        if c.lo == c.hi:
            yield c.name, terms, "=", c.lo
            continue
        if c.lo > -INF and c.hi < INF:
            yield c.name + "_lo", terms, ">=", c.lo
            yield c.name + "_hi", terms, "<=", c.hi
        elif c.lo > -INF:
            yield c.name, terms, ">=", c.lo
        elif c.hi < INF:
            yield c.name, terms, "<=", c.hi


def to_lp_text(problem: PlanningProblem) -> str:
    names = problem.names
    lines = [f"\\ planning window t0={problem.t0} horizon={problem.horizon}", "Minimize"]

    def linear(terms) -> str:
        parts = []
        for i, v in terms:
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {_num(abs(v))} {names[i]}")
        if parts and parts[0].startswith("+ "):
            parts[0] = parts[0][2:]
        # keep rows readable and well below the line limits of LP readers
        return "\n   ".join(" ".join(parts[j:j + 6]) for j in range(0, len(parts), 6))

    obj_terms = sorted((i, v) for i, v in problem.objective.terms.items() if v != 0.0)
    obj = linear(obj_terms) if obj_terms else ""
    const = problem.objective.const
    if const != 0.0 or not obj:
        obj = f"{obj} {'-' if const < 0 else '+'} {_num(abs(const))}".strip()
        obj = obj[2:] if obj.startswith("+ ") else obj
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for name, terms, sense, rhs in _split_rows(problem):
        lines.append(f" {name}: {linear(terms)} {sense} {_num(rhs)}")
    lines.append("Bounds")
    for i, name in enumerate(names):
        if problem.binary[i]:
            continue
        lo, hi = problem.lb[i], problem.ub[i]
        if lo == -INF and hi == INF:
            lines.append(f" {name} free")
        elif hi == INF:
            lines.append(f" {name} >= {_num(lo)}")
        elif lo == -INF:
            lines.append(f" -inf <= {name} <= {_num(hi)}")
        else:
            lines.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    binaries = [n for n, b in zip(names, problem.binary) if b]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def to_mps_text(problem: PlanningProblem) -> str:
    """Free-format MPS; the objective constant is written as -RHS of the objective row."""
    rows = list(_split_rows(problem))
    lines = [f"NAME window_t{problem.t0}", "ROWS", " N obj"]
    kind = {"=": "E", ">=": "G", "<=": "L"}
    for name, _, sense, _ in rows:
        lines.append(f" {kind[sense]} {name}")
    columns: dict[int, list[tuple[str, float]]] = {i: [] for i in range(problem.n_vars)}
    for i, v in sorted(problem.objective.terms.items()):
        if v != 0.0:
            columns[i].append(("obj", v))
    for name, terms, _, _ in rows:
        for i, v in terms:
            columns[i].append((name, v))
    lines.append("COLUMNS")
    in_int = False
    for i, name in enumerate(problem.names):
        if problem.binary[i] and not in_int:
            lines.append(" MARKER 'MARKER' 'INTORG'")
            in_int = True
        elif not problem.binary[i] and in_int:
            lines.append(" MARKER 'MARKER' 'INTEND'")
            in_int = False
        entries = columns[i] or [("obj", 0.0)]
        for row, v in entries:
            lines.append(f" {name} {row} {_num(v)}")
    if in_int:
        lines.append(" MARKER 'MARKER' 'INTEND'")
    lines.append("RHS")
    if problem.objective.const != 0.0:
        lines.append(f" rhs obj {_num(-problem.objective.const)}")
    for name, _, _, rhs in rows:
        if rhs != 0.0:
            lines.append(f" rhs {name} {_num(rhs)}")
    lines.append("BOUNDS")
    for i, name in enumerate(problem.names):
        lo, hi = problem.lb[i], problem.ub[i]
        if problem.binary[i]:
            lines.append(f" BV bnd {name}")
        elif lo == -INF and hi == INF:
            lines.append(f" FR bnd {name}")
        else:
            if lo == -INF:
                lines.append(f" MI bnd {name}")
            elif lo != 0.0:
                lines.append(f" LO bnd {name} {_num(lo)}")
            if hi < INF:
                lines.append(f" UP bnd {name} {_num(hi)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def export_problem(problem: PlanningProblem, path: str | Path, format: str = "lp") -> Path:
    path = Path(path)
    if format in ("lp", "lp-text"):
        text = to_lp_text(problem)
    elif format in ("mps", "mps-text"):
        text = to_mps_text(problem)
    else:
        raise ValueError(f"unknown export format {format!r}")
    path.write_text(text)
    return path
