"""Solver-agnostic MILP model and the big-M gadgets used by the encoder.

Every gadget derives its big-M constants from the current variable bounds
(interval arithmetic over :class:`LinExpr`), so each constant is the smallest
one that keeps the gadget exact. ``model.big_m`` is the ceiling: a gadget
that would need more raises :class:`BigMTooSmall` instead of silently
cutting off feasible points.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import BigMTooSmall, ModelError

BINARY, CONTINUOUS = "B", "C"
LE, GE, EQ = "<=", ">=", "=="
SENSES = (LE, GE, EQ)

OPTIMAL, FEASIBLE, INFEASIBLE, TIMED_OUT = "Optimal", "Feasible", "Infeasible", "TimedOut"


@dataclass(frozen=True, eq=False)
class VarRef:
    id: int
    kind: str
    name: str
    lo: float
    hi: float

    def __hash__(self):
        return hash(self.id)

    def __eq__(self, other):
        return isinstance(other, VarRef) and other.id == self.id

    @property
    def is_binary(self):
        return self.kind == BINARY

    def expr(self) -> "LinExpr":
        return LinExpr({self.id: 1.0})

    def __add__(self, other):
        return self.expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.expr() - other

    def __rsub__(self, other):
        return -self.expr() + other

    def __mul__(self, k):
        return self.expr() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self.expr() * -1.0

    def __repr__(self):
        return f"VarRef({self.id}, {self.kind}, {self.name!r}, [{self.lo}, {self.hi}])"


class LinExpr:
    """Sparse affine expression ``sum(coef * var) + const`` keyed by variable id."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Optional[Mapping[int, float]] = None, const: float = 0.0):
        self.terms = {k: float(v) for k, v in (terms or {}).items() if v != 0}
        self.const = float(const)

    @staticmethod
    def of(x) -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, VarRef):
            return x.expr()
        return LinExpr(const=float(x))

    def copy(self):
        e = LinExpr.__new__(LinExpr)
        e.terms = dict(self.terms)
        e.const = self.const
        return e

    def _iadd(self, other, sign):
        other = LinExpr.of(other)
        t = self.terms
        for k, v in other.terms.items():
            nv = t.get(k, 0.0) + sign * v
            if nv == 0:
                t.pop(k, None)
            else:
                t[k] = nv
        self.const += sign * other.const
        return self

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        return (self * -1.0)._iadd(other, 1.0)

    def __mul__(self, k):
        k = float(k)
        if k == 0:
            return LinExpr()
        return LinExpr({i: v * k for i, v in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x) -> float:
        return self.const + sum(v * x[i] for i, v in self.terms.items())

    def __repr__(self):
        body = " + ".join(f"{v:g}*x{i}" for i, v in sorted(self.terms.items()))
        return f"LinExpr({body or '0'} + {self.const:g})"


ExprLike = Union[LinExpr, VarRef, float, int]


@dataclass
class Constraint:
    """``expr (sense) rhs``; constant terms are folded into ``rhs``."""

    expr: LinExpr
    sense: str
    rhs: float
    tag: str

    def activity(self, x) -> float:
        return sum(v * x[i] for i, v in self.expr.terms.items())

    def violation(self, x) -> float:
        lhs = self.activity(x)
        if self.sense == LE:
            return max(0.0, lhs - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


def sum_expr(items: Iterable[ExprLike]) -> LinExpr:
    acc = LinExpr()
    for it in items:
        acc._iadd(it, 1.0)
    return acc


class MilpModel:
    """Maximization MILP: variables with bounds, tagged linear constraints, objective."""

    def __init__(self, big_m: float = 1e4, m_eps: float = 1e-6, eps_t: float = 1e-3, name: str = "trstl"):
        if not big_m > 0 or not m_eps > 0 or eps_t < 0:
            raise ModelError("need big_m > 0, m_eps > 0, eps_t >= 0")
        self.name = name
        self.big_m = float(big_m)
        self.m_eps = float(m_eps)
        self.eps_t = float(eps_t)
        self.vars: list[VarRef] = []
        self.constraints: list[Constraint] = []
        self.objective = LinExpr()
        self.sense = "maximize"
        self._names: dict[str, int] = {}

    # -- variables -------------------------------------------------------
    def add_var(self, name: str, kind: str = CONTINUOUS, lo: float = -math.inf, hi: float = math.inf) -> VarRef:
        if kind == BINARY:
            lo, hi = max(0.0, lo), min(1.0, hi)
        if lo > hi:
            raise ModelError(f"variable {name}: empty bounds [{lo}, {hi}]")
        if name in self._names:
            base, n = name, 2
            while f"{base}__{n}" in self._names:
                n += 1
            name = f"{base}__{n}"
        v = VarRef(len(self.vars), kind, name, float(lo), float(hi))
        self.vars.append(v)
        self._names[name] = v.id
        return v

    def add_binary(self, name: str) -> VarRef:
        return self.add_var(name, BINARY, 0.0, 1.0)

    def add_continuous(self, name: str, lo: float = -math.inf, hi: float = math.inf) -> VarRef:
        return self.add_var(name, CONTINUOUS, lo, hi)

    def var(self, ref: Union[VarRef, int, str]) -> VarRef:
        """Current record with up-to-date bounds; ``ref`` may also be an id or a name."""
        if isinstance(ref, str):
            return self.vars[self._names[ref]]
        return self.vars[ref.id if isinstance(ref, VarRef) else ref]

    def has_name(self, name: str) -> bool:
        return name in self._names

    def set_bounds(self, ref, lo=None, hi=None) -> VarRef:
        v = self.var(ref)
        nv = replace(v, lo=v.lo if lo is None else float(lo), hi=v.hi if hi is None else float(hi))
        if nv.lo > nv.hi:
            raise ModelError(f"variable {v.name}: empty bounds [{nv.lo}, {nv.hi}]")
        self.vars[v.id] = nv
        return nv

    def fix(self, ref, value: float) -> VarRef:
        return self.set_bounds(ref, value, value)

    @property
    def num_vars(self):
        return len(self.vars)

    @property
    def num_binary(self):
        return sum(v.kind == BINARY for v in self.vars)

    @property
    def num_continuous(self):
        return sum(v.kind == CONTINUOUS for v in self.vars)

    @property
    def num_constraints(self):
        return len(self.constraints)

    # -- constraints -------------------------------------------------------
    def add_constraint(self, lhs: ExprLike, sense: str, rhs: ExprLike, tag: str) -> Constraint:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if not tag:
            raise ModelError("every constraint needs a provenance tag")
        e = LinExpr.of(lhs) - LinExpr.of(rhs)
        r = -e.const
        e.const = 0.0
        if not math.isfinite(r) or any(not math.isfinite(c) for c in e.terms.values()):
            raise ModelError(f"non-finite coefficient in constraint {tag}")
        for i in e.terms:
            if not 0 <= i < len(self.vars):
                raise ModelError(f"constraint {tag} references unregistered variable {i}")
        c = Constraint(e, sense, r, tag)
        self.constraints.append(c)
        return c

    def set_objective(self, expr: ExprLike):
        self.objective = LinExpr.of(expr).copy()

    # -- analysis ----------------------------------------------------------
    def bounds(self, expr: ExprLike) -> tuple[float, float]:
        """Interval enclosure of ``expr`` over the variable box."""
        e = LinExpr.of(expr)
        lo = hi = e.const
        for i, c in e.terms.items():
            v = self.vars[i]
            if c > 0:
                lo += c * v.lo
                hi += c * v.hi
            else:
                lo += c * v.hi
                hi += c * v.lo
        return lo, hi

    def need_m(self, value: float, what: str) -> float:
        if not value <= self.big_m:
            raise BigMTooSmall(f"{what}: needs M >= {value:.6g}, model M is {self.big_m:.6g}")
        return max(value, 0.0)

    def validate(self):
        n = len(self.vars)
        for c in self.constraints:
            if not c.tag:
                raise ModelError("untagged constraint")
            for i in c.expr.terms:
                if not 0 <= i < n:
                    raise ModelError(f"constraint {c.tag} references unregistered variable {i}")
        for i in self.objective.terms:
            if not 0 <= i < n:
                raise ModelError(f"objective references unregistered variable {i}")

    def violations(self, x, tol: float = 1e-7) -> list[str]:
        """Independent feasibility check of a full assignment."""
        x = np.asarray(x, dtype=float)
        bad = []
        for v in self.vars:
            val = x[v.id]
            if val < v.lo - tol or val > v.hi + tol:
                bad.append(f"bound {v.name}={val:.9g} not in [{v.lo}, {v.hi}]")
            if v.kind == BINARY and min(abs(val), abs(val - 1)) > tol:
                bad.append(f"binary {v.name}={val:.9g}")
        for c in self.constraints:
            viol = c.violation(x)
            scale = 1.0 + abs(c.rhs)
            if viol > tol * scale:
                bad.append(f"{c.tag}: violated by {viol:.3g}")
        return bad

    def objective_value(self, x) -> float:
        return self.objective.value(x)

    def tag_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            key = c.tag.split("[", 1)[0]
            out[key] = out.get(key, 0) + 1
        return out

    def copy(self) -> "MilpModel":
        return copy.deepcopy(self)

    def stats(self) -> dict:
        return {"num_binary": self.num_binary, "num_continuous": self.num_continuous,
                "num_constraints": self.num_constraints}


@dataclass
class MilpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective_value: float = math.nan
    best_bound: float = math.nan
    nodes: int = 0
    warnings: list = field(default_factory=list)

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def value(self, ref: ExprLike) -> float:
        if self.x is None:
            raise ValueError(f"no assignment available (status {self.status})")
        if isinstance(ref, VarRef):
            return float(self.x[ref.id])
        return float(LinExpr.of(ref).value(self.x))

    def assignment(self, model: MilpModel) -> dict:
        return {v: float(self.x[v.id]) for v in model.vars}


# --------------------------------------------------------------------------
# gadgets

def _binary_expr(model, b, complement=False):
    e = LinExpr.of(b)
    return (1.0 - e) if complement else e


def enc_linear_predicate(model: MilpModel, mu: ExprLike, name: str = "b_mu",
                         tag: str = "eq:milp_lin_pred") -> VarRef:
    """Binary ``b`` with ``b = 1  <=>  mu >= 0`` (``b = 0`` forces ``mu <= -m_eps``)."""
    mu = LinExpr.of(mu)
    lo, hi = model.bounds(mu)
    m_lo = model.need_m(-lo, f"{tag} lower")
    m_hi = model.need_m(hi + model.m_eps, f"{tag} upper")
    b = model.add_binary(name)
    # -M(1-b) <= mu <= M b - m_eps
    model.add_constraint(mu - m_lo * b, GE, -m_lo, tag)
    model.add_constraint(mu - m_hi * b, LE, -model.m_eps, tag)
    return b


def enc_and(model: MilpModel, bs: Sequence[ExprLike], name: str = "b_and", tag: str = "eq:and") -> VarRef:
    """``b = AND(bs)``: ``b <= b_i`` and ``b >= sum(b_i) - (m - 1)``."""
    if len(bs) < 1:
        raise ValueError("enc_and needs at least one operand")
    b = model.add_binary(name)
    for bi in bs:
        model.add_constraint(b - bi, LE, 0.0, tag)
    model.add_constraint(b - sum_expr(bs), GE, -(len(bs) - 1), tag)
    return b


def enc_or(model: MilpModel, bs: Sequence[ExprLike], name: str = "b_or", tag: str = "eq:or") -> VarRef:
    """``b = OR(bs)``: ``b >= b_i`` and ``b <= sum(b_i)``."""
    if len(bs) < 1:
        raise ValueError("enc_or needs at least one operand")
    b = model.add_binary(name)
    for bi in bs:
        model.add_constraint(b - bi, GE, 0.0, tag)
    model.add_constraint(b - sum_expr(bs), LE, 0.0, tag)
    return b


def _extremum(model, thetas, name, tag, take_min, selectors=None):
    thetas = [LinExpr.of(t) for t in thetas]
    if not thetas:
        raise ValueError("need at least one operand")
    bnds = [model.bounds(t) for t in thetas]
    if take_min:
        lo, hi = min(b[0] for b in bnds), min(b[1] for b in bnds)
    else:
        lo, hi = max(b[0] for b in bnds), max(b[1] for b in bnds)
    theta = model.add_continuous(name, lo, hi)
    if len(thetas) == 1:
        model.add_constraint(theta - thetas[0], EQ, 0.0, tag)
        return theta, []
    sel = []
    for k, (t, (tlo, thi)) in enumerate(zip(thetas, bnds)):
        b = model.add_binary(f"{name}_sel{k}")
        sel.append(b)
        if take_min:
            # theta_k - (1 - b_k) M <= theta <= theta_k
            m = model.need_m(thi - lo, tag)
            model.add_constraint(theta - t, LE, 0.0, tag)
            model.add_constraint(theta - t - m * b, GE, -m, tag)
        else:
            # theta_k <= theta <= theta_k + (1 - b_k) M
            m = model.need_m(hi - tlo, tag)
            model.add_constraint(theta - t, GE, 0.0, tag)
            model.add_constraint(theta - t + m * b, LE, m, tag)
    model.add_constraint(sum_expr(sel), EQ, 1.0, tag)
    return theta, sel


def enc_min(model: MilpModel, thetas: Sequence[ExprLike], name: str = "th_min",
            tag: str = "eq:inf_sup") -> VarRef:
    """Continuous ``theta = min(thetas)`` with one selector binary per operand."""
    return _extremum(model, thetas, name, tag, True)[0]


def enc_max(model: MilpModel, thetas: Sequence[ExprLike], name: str = "th_max",
            tag: str = "eq:inf_sup") -> VarRef:
    """Continuous ``theta = max(thetas)`` with one selector binary per operand."""
    return _extremum(model, thetas, name, tag, False)[0]


def enc_product(model: MilpModel, x: ExprLike, b: ExprLike, name: str = "y_prod",
                tag: str = "eq:multi_xb", complement: bool = False,
                x_bounds: Optional[tuple] = None, upper_only: bool = False) -> VarRef:
    """Continuous ``y = x * b`` for bounded ``x`` and binary ``b`` (or ``1 - b``).

    Four inequalities: ``-M b <= y <= M b`` and ``x - M(1-b) <= y <= x + M(1-b)``,
    with the positive and negative sides of ``M`` taken from the bounds of ``x``.
    ``x_bounds`` lets the caller supply a range of ``x`` that holds on every
    feasible point but is tighter than interval arithmetic can show. With
    ``upper_only`` just the two rows bounding ``y`` from above are added, so
    ``y <= x * b`` with equality attainable.
    """
    x = LinExpr.of(x)
    bb = _binary_expr(model, b, complement)
    lo, hi = model.bounds(x)
    if x_bounds is not None:
        lo, hi = max(lo, x_bounds[0]), min(hi, x_bounds[1])
    m_pos = model.need_m(max(hi, 0.0), tag)
    m_neg = model.need_m(max(-lo, 0.0), tag)
    y = model.add_continuous(name, min(lo, 0.0), max(hi, 0.0))
    model.add_constraint(y - m_pos * bb, LE, 0.0, tag)
    if not upper_only:
        model.add_constraint(y + m_neg * bb, GE, 0.0, tag)
    # y >= x - M+(1-b),  y <= x + M-(1-b)
    if not upper_only:
        model.add_constraint(y - x - m_pos * bb, GE, -m_pos, tag)
    model.add_constraint(y - x + m_neg * bb, LE, m_neg, tag)
    return y


def enc_not(model: MilpModel, b: VarRef, name: str = "b_not", tag: str = "eq:not") -> VarRef:
    nb = model.add_binary(name)
    model.add_constraint(nb + b, EQ, 1.0, tag)
    return nb
