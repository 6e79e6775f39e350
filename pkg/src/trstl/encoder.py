"""MILP encoding of time-robust synthesis over PWL trajectories.

Layout of the generated model:

* trajectory variables ``t_i`` and ``p_{i,d}`` with the dynamics rows;
* per region, waypoint and edge a point-predicate binary, combined into
  segment labels ``z_i`` (inside: AND over edges and both endpoints; outside:
  OR over edges of the AND of both endpoints);
* for every literal the counting recursion for the time robustness of its
  label sequence;
* for every temporal node and every segment where its value is needed, window
  indicators, selector binaries and the sup/inf bounding rows;
* the objective ``-J + lambda * theta_0`` and the requirement
  ``theta_0 >= theta_star``.

Window conditions are linear in the timestamps. Those whose sign is fixed for
every admissible timing (given ``t_0 = 0``, ``t_{K-1} = T`` and monotone
timestamps) are resolved statically, which both removes binaries and makes
exact touching agree with the closed-interval monitor. The others get a
predicate binary with an ``eps_t`` margin: shrunk windows for sup-type
candidates, bloated windows for inf-type candidates. Either way the encoded
value never exceeds the monitored one.

Empty windows: by default each sup (inf) gets an extra candidate pinned at
``-theta_inf`` (``+theta_inf``) with ``theta_inf = T + 1``; every finite
robustness value lies strictly inside ``(-theta_inf, theta_inf)``, so the
encoded values equal the monitored ones clamped to that range. With
``allow_empty=False`` an empty window instead makes the model infeasible.

``encoding="monotone"`` (robust mode only) keeps just the rows that bound
each robustness value from above, plus the rows that force geometry from a
chosen label or selector. Robustness is nondecreasing in labels and child
values and the objective rewards ``theta_0``, so for a fixed trajectory the
largest feasible ``theta_0`` is still the monitored value; optima coincide
with the exact layout while roughly a third of the binaries remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import milp_ir as ir
from .errors import InfeasibleEndpoints, MissionError, UnboundAtom
from .geometry import ConvexRegion, PwlTrajectory, Workspace
from .milp_ir import EQ, GE, LE, LinExpr, MilpModel, VarRef
from .monitor import LEFT, RIGHT
from .stl_ast import (Always, And, Atom, Eventually, Formula, Interval, NegAtom, Or, Until,
                      analyze, require_resolved, resolve_horizon)

L1_PATH, MAKESPAN_ONLY = "l1_path", "none"
ROBUST, QUALITATIVE = "robust", "qualitative"
EXACT, MONOTONE = "exact", "monotone"
SHRINK, BLOAT = 1.0, -1.0


@dataclass
class SynthesisProblem:
    formula: Formula
    regions: Mapping[str, ConvexRegion]
    K: int
    workspace: Workspace
    v_b: float
    theta_star: float
    lam: float = 1.0
    objective: str = L1_PATH
    start: Optional[Sequence[float]] = None
    goal: Optional[Sequence[float]] = None
    side: str = RIGHT
    mode: str = ROBUST
    eps_t: float = 1e-3
    m_eps: float = 1e-6
    eps_s: float = 1e-5
    big_m: Optional[float] = None
    allow_empty: bool = True
    reduced: bool = True
    encoding: str = EXACT

    def __post_init__(self):
        if self.K < 2:
            raise MissionError("K must be at least 2")
        if not self.v_b > 0:
            raise MissionError("v_b must be positive")
        if self.mode == ROBUST and not self.theta_star > 0:
            raise MissionError("theta_star must be positive")
        if not self.lam > 0:
            raise MissionError("lambda must be positive")
        if self.objective not in (L1_PATH, MAKESPAN_ONLY):
            raise MissionError(f"unknown objective {self.objective!r}")
        if self.side not in (RIGHT, LEFT):
            raise MissionError(f"unknown side {self.side!r}")
        if self.mode not in (ROBUST, QUALITATIVE):
            raise MissionError(f"unknown mode {self.mode!r}")
        if self.encoding not in (EXACT, MONOTONE):
            raise MissionError(f"unknown encoding {self.encoding!r}")
        self.formula = resolve_horizon(self.formula, self.workspace.horizon)
        require_resolved(self.formula)
        for n in _literals(self.formula):
            if n.name not in self.regions:
                raise UnboundAtom(n.name)

    @property
    def T(self) -> float:
        return float(self.workspace.horizon)

    @property
    def theta_inf(self) -> float:
        return self.T + 1.0


@dataclass
class EncodingArtifacts:
    t: list
    p: list
    labels: dict = field(default_factory=dict)        # literal -> {segment: expr}
    point_preds: dict = field(default_factory=dict)   # (region, kind, waypoint, edge) -> VarRef
    d1: dict = field(default_factory=dict)            # literal -> {index: expr}
    d0: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)         # node -> {segment: expr}
    sat: dict = field(default_factory=dict)           # node -> {segment: expr} (qualitative)
    b_cap: dict = field(default_factory=dict)         # (node, i, j) -> expr
    selectors: dict = field(default_factory=dict)     # (node, i) -> [VarRef]
    needed: dict = field(default_factory=dict)        # node -> sorted segment list
    theta0: Optional[LinExpr] = None
    z0: Optional[LinExpr] = None
    path_aux: list = field(default_factory=list)
    num_binary: int = 0
    num_continuous: int = 0
    num_constraints: int = 0

    def counts(self) -> dict:
        return {"num_binary": self.num_binary, "num_continuous": self.num_continuous,
                "num_constraints": self.num_constraints}


def _literals(f):
    from .stl_ast import walk
    return [n for n in walk(f) if isinstance(n, (Atom, NegAtom))]


def _const(x) -> LinExpr:
    return LinExpr(const=float(x))


# --------------------------------------------------------------------------
# big-M

def compute_big_m(formula: Formula, regions, workspace: Workspace) -> float:
    """``2 * max(diagonal, T + 1, interval endpoints, predicate range) + 1``.

    ``T + 1`` covers the empty-window sentinels; the predicate range is the
    largest signed distance from any workspace corner to a region edge line.
    """
    from .stl_ast import walk
    T = float(workspace.horizon)
    ends = [float(n.interval.b) for n in walk(formula)
            if isinstance(n, (Always, Eventually, Until)) and n.interval is not None]
    corners = np.array(np.meshgrid(*zip(workspace.lower, workspace.upper))).reshape(len(workspace.lower), -1).T
    pred = 0.0
    for r in regions.values():
        pred = max(pred, float(np.max(np.abs((r.h[None, :] - corners @ r.A.T) / r.norms[None, :]))))
    pred += workspace.epsilon + 1.0
    return 2.0 * max([workspace.diagonal, T + 1.0, pred] + ends) + 1.0


# --------------------------------------------------------------------------
# window analysis

@dataclass(frozen=True)
class Cond:
    """Closed window condition ``sum(c_k t_k) + const >= 0``."""

    coeffs: tuple   # ((k, c), ...)
    const: float
    margin: float   # SHRINK or BLOAT when a binary is needed

    def expr(self, t) -> LinExpr:
        e = LinExpr(const=self.const)
        for k, c in self.coeffs:
            e = e + c * t[k]
        return e


def _status(coeffs, const, S, T, tau):
    """+1 always true (closed), -1 never true at margin tau, 0 needs a binary."""
    # t_k = sum_{m<k} dt_m, dt >= 0, sum dt = T
    D = [0.0] * S
    for k, c in coeffs:
        for m in range(min(k, S)):
            D[m] += c
    lo = const + T * min(D)
    hi = const + T * max(D)
    if lo >= 0:
        return 1
    if hi < tau:
        return -1
    return 0


def _cond(coeffs, const, margin, S, T, eps_t):
    coeffs = tuple((k, float(c)) for k, c in coeffs if c != 0)
    st = _status(coeffs, float(const), S, T, margin * eps_t)
    return st, Cond(coeffs, float(const), margin)


@dataclass
class Window:
    """Candidates of one temporal node at one segment."""

    side: Optional[Cond]            # residual side condition, None if statically true
    side_false: bool
    cands: list                     # [(j, [Cond, ...])] with statically-true parts removed
    hold: dict                      # Until only: l -> [Cond] (bloated), statically-true omitted


def window(node, i: int, S: int, T: float, eps_t: float) -> Window:
    a, b = float(node.interval.a), float(node.interval.b)
    side, side_false = None, False
    if isinstance(node, (Eventually, Until)):
        # t_{i+1} - t_i <= b - a
        st, c = _cond(((i, 1.0), (i + 1, -1.0)), b - a, SHRINK, S, T, eps_t)
        side_false = st < 0
        side = c if st == 0 else None
    cands = []
    for j in range(S):
        if isinstance(node, Always):
            # [t_j, t_{j+1}] meets [t_i + a, t_{i+1} + b]
            parts = [_cond(((i + 1, 1.0), (j, -1.0)), b, BLOAT, S, T, eps_t),
                     _cond(((j + 1, 1.0), (i, -1.0)), -a, BLOAT, S, T, eps_t)]
        else:
            # [t_j, t_{j+1}] meets [t_{i+1} + a, t_i + b]
            parts = [_cond(((i, 1.0), (j, -1.0)), b, SHRINK, S, T, eps_t),
                     _cond(((j + 1, 1.0), (i + 1, -1.0)), -a, SHRINK, S, T, eps_t)]
        if any(st < 0 for st, _ in parts):
            continue
        cands.append((j, [c for st, c in parts if st == 0]))
    hold = {}
    if isinstance(node, Until):
        last = max((j for j, _ in cands), default=-1)
        for l in range(last + 1):
            # t_{l+1} >= t_i; the upper end t_l <= t_{i+1} + b holds for any
            # l <= j once j is a candidate
            st, c = _cond(((l + 1, 1.0), (i, -1.0)), 0.0, BLOAT, S, T, eps_t)
            if st >= 0:
                hold[l] = [] if st > 0 else [c]
    return Window(side, side_false, cands, hold)


def child_segments(node, i: int, S: int, T: float, eps_t: float) -> dict:
    """Segments at which each child of ``node`` is read when evaluating segment ``i``."""
    if isinstance(node, (Atom, NegAtom)):
        return {}
    if isinstance(node, (And, Or)):
        return {c: {i} for c in node.children}
    w = window(node, i, S, T, eps_t)
    if w.side_false:
        return {}
    js = {j for j, _ in w.cands}
    if isinstance(node, Until):
        ls = {l for l in w.hold if any(l <= j for j in js)}
        out = {node.left: set(ls)}
        out.setdefault(node.right, set()).update(js)    # left and right may be one node
        return out
    return {node.child: js}


def needed_segments(f: Formula, S: int, T: float, eps_t: float, reduced: bool = True) -> dict:
    """Map each distinct subformula to the segments whose value the root depends on."""
    from .monitor import unique_nodes
    order = list(reversed(unique_nodes(f)))
    need = {n: set() for n in order}
    need[f] = {0} if reduced else set(range(S))
    for n in order:
        if not reduced:
            need[n] = set(range(S))
            continue
        for i in sorted(need[n]):
            for c, segs in child_segments(n, i, S, T, eps_t).items():
                need[c] |= segs
    return {n: sorted(s) for n, s in need.items()}


# --------------------------------------------------------------------------
# dynamics

def encode_dynamics(model: MilpModel, K: int, workspace: Workspace, v_b: float, T: float,
                    start=None, goal=None):
    """Timestamps and positions with monotone time, bounded per-axis speed and fixed ends."""
    d = len(workspace.lower)
    if start is not None and goal is not None:
        gap = float(np.max(np.abs(np.subtract(goal, start))))
        if gap > v_b * T + 1e-12:
            raise InfeasibleEndpoints(f"|goal - start|_inf = {gap:g} > v_b * T = {v_b * T:g}")
    t = [model.add_continuous(f"t_{i}", 0.0, T) for i in range(K)]
    p = [[model.add_continuous(f"p_{i}_{k}", workspace.lower[k], workspace.upper[k]) for k in range(d)]
         for i in range(K)]
    model.add_constraint(t[0], EQ, 0.0, "alg:t0")
    model.add_constraint(t[K - 1], EQ, T, "alg:tK")
    model.fix(t[0], 0.0)
    model.fix(t[K - 1], T)
    for i in range(K - 1):
        dt = t[i + 1] - t[i]
        model.add_constraint(dt, GE, 0.0, f"alg:mono[i={i}]")
        for k in range(d):
            dp = p[i + 1][k] - p[i][k]
            model.add_constraint(dp - v_b * dt, LE, 0.0, f"alg:vel[i={i},d={k}]")
            model.add_constraint(dp + v_b * dt, GE, 0.0, f"alg:vel[i={i},d={k}]")
    for pt, idx, tag in ((start, 0, "alg:start"), (goal, K - 1, "alg:goal")):
        if pt is not None:
            for k in range(d):
                model.add_constraint(p[idx][k], EQ, float(pt[k]), f"{tag}[d={k}]")
    return t, p


# --------------------------------------------------------------------------
# atom robustness

def encode_atom_robustness(model: MilpModel, z: Sequence, t: Sequence, side: str = RIGHT,
                           name: str = "pi", store: Optional[tuple] = None,
                           upper_only: bool = False) -> list:
    """Counting recursion over the label sequence ``z`` (one binary per segment).

    Right side, from the last segment backwards with ``D1_{S} = D0_{S} = 0``::

        D1_i = (D1_{i+1} + dt_i) z_i
        D0_i = (D0_{i+1} - dt_i) (1 - z_i)
        theta_i = D1_{i+1} z_i + D0_{i+1} (1 - z_i)

    The left side runs the same recursion forwards. ``upper_only`` keeps
    only the rows bounding each product from above.
    """
    S = len(z)
    if len(t) != S + 1:
        raise ValueError("need one more timestamp than labels")
    d1 = {S if side == RIGHT else -1: _const(0)}
    d0 = dict(d1)
    theta = [None] * S
    order = range(S - 1, -1, -1) if side == RIGHT else range(S)
    step = 1 if side == RIGHT else -1
    tag = "eq:t_aggre"
    # run sums never exceed the time span of the trajectory
    span = model.bounds(t[-1])[1] - model.bounds(t[0])[0]
    pos, neg = (0.0, span), (-span, 0.0)
    for i in order:
        prev = i + step
        dt = t[i + 1] - t[i]
        zi = z[i]
        up = upper_only
        d1[i] = _prod(model, d1[prev] + dt, zi, f"{name}_d1_{i}", f"{tag}[i={i}]", bounds=pos, up=up)
        d0[i] = _prod(model, d0[prev] - dt, zi, f"{name}_d0_{i}", f"{tag}[i={i}]", complement=True,
                      bounds=neg, up=up)
        rtag = f"eq:right_time_rob[i={i}]" if side == RIGHT else f"eq:left_time_rob[i={i}]"
        theta[i] = (_prod(model, d1[prev], zi, f"{name}_r1_{i}", rtag, bounds=pos, up=up)
                    + _prod(model, d0[prev], zi, f"{name}_r0_{i}", rtag, complement=True, bounds=neg,
                            up=up))
    if store is not None:
        store[0].update(d1)
        store[1].update(d0)
    return theta


def _prod(model, x, b, name, tag, complement=False, bounds=None, up=False):
    x = LinExpr.of(x)
    lo, hi = model.bounds(x)
    if bounds is not None:
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    if lo == 0 and hi == 0:
        return _const(0)
    b = LinExpr.of(b)
    if not b.terms:  # constant label
        val = (1.0 - b.const) if complement else b.const
        return x * val
    return LinExpr.of(ir.enc_product(model, x, b, name, tag, complement, bounds, upper_only=up))


# --------------------------------------------------------------------------
# mission

class _Encoder:
    def __init__(self, prob: SynthesisProblem, model: MilpModel):
        self.prob = prob
        self.model = model
        self.K = prob.K
        self.S = prob.K - 1
        self.T = prob.T
        self.eps_t = prob.eps_t
        self.art: Optional[EncodingArtifacts] = None
        self._pred_cache = {}
        self.mono = getattr(prob, "encoding", EXACT) == MONOTONE and prob.mode == ROBUST

    # -- labels ---------------------------------------------------------
    def point_pred(self, region: ConvexRegion, kind: str, w: int, e: int):
        key = (region.name, kind, w, e)
        if key not in self._pred_cache:
            m = self.model
            mu = self.point_margin(region, kind, w, e)
            tag = f"eq:milp_lin_pred[{region.name},{kind},w={w},e={e}]"
            b = ir.enc_linear_predicate(m, mu, f"mu_{region.name}_{kind}_{w}_{e}", tag)
            self._pred_cache[key] = b
            self.art.point_preds[key] = b
        return self._pred_cache[key]

    def point_margin(self, region: ConvexRegion, kind: str, w: int, e: int) -> LinExpr:
        """Signed edge margin of waypoint ``w`` less ``eps + eps_s`` (>= 0 means the test holds)."""
        p = self.art.p[w]
        nrm = float(region.norms[e])
        margin = LinExpr(const=float(region.h[e]) / nrm)
        for k in range(region.dim):
            margin = margin - (float(region.A[e, k]) / nrm) * p[k]
        shift = self.prob.workspace.epsilon + self.prob.eps_s
        return (margin - shift) if kind == "in" else (-margin - shift)

    def label(self, lit, i: int) -> LinExpr:
        store = self.art.labels.setdefault(lit, {})
        if i in store:
            return store[i]
        if self.mono:
            store[i] = self._mono_label(lit, i)
            return store[i]
        region = self.prob.regions[lit.name]
        m = self.model
        r = len(region.h)
        tag = f"alg:label[{lit.name},i={i}]"
        if isinstance(lit, Atom):
            bs = [self.point_pred(region, "in", w, e) for e in range(r) for w in (i, i + 1)]
            z = ir.enc_and(m, bs, f"z_{lit.name}_{i}", tag)
        else:
            per_edge = [ir.enc_and(m, [self.point_pred(region, "out", i, e),
                                       self.point_pred(region, "out", i + 1, e)],
                                   f"zo_{lit.name}_{i}_{e}", tag) for e in range(r)]
            z = ir.enc_or(m, per_edge, f"zn_{lit.name}_{i}", tag)
        store[i] = LinExpr.of(z)
        return store[i]

    # -- windows ----------------------------------------------------------
    def indicator(self, cond: Cond, tag: str) -> LinExpr:
        mu = cond.expr(self.art.t) - cond.margin * self.eps_t
        return LinExpr.of(ir.enc_linear_predicate(self.model, mu, "b_win", tag))

    def conj(self, parts, name, tag) -> LinExpr:
        if not parts:
            return _const(1)
        if len(parts) == 1:
            return parts[0]
        return LinExpr.of(ir.enc_and(self.model, parts, name, tag))

    def cap_indicators(self, node, nid, i, w: Window):
        """(j, b_cap_ij) for every candidate; the side condition is folded in."""
        side = []
        if w.side is not None:
            side = [self.indicator(w.side, f"eq:timeintrs[n={nid},i={i},side]")]
        out = []
        for j, conds in w.cands:
            parts = [self.indicator(c, f"eq:timeintrs[n={nid},i={i},j={j}]") for c in conds]
            b = self.conj(parts + side, f"bcap_{nid}_{i}_{j}", f"eq:timeintrs[n={nid},i={i},j={j}]")
            self.art.b_cap[(node, i, j)] = b
            out.append((j, b))
        return out

    # -- robustness ---------------------------------------------------------
    def theta(self, node, nid_of) -> dict:
        """Encode ``node`` at its needed segments (children first)."""
        prob, m = self.prob, self.model
        segs = self.art.needed[node]
        nid = nid_of[node]
        out = {}
        if isinstance(node, (Atom, NegAtom)):
            z = [self.label(node, i) for i in range(self.S)]
            key = f"{'n' if isinstance(node, NegAtom) else ''}{node.name}"
            d1, d0 = self.art.d1.setdefault(node, {}), self.art.d0.setdefault(node, {})
            full = encode_atom_robustness(m, z, self.art.t, prob.side, f"th_{key}", (d1, d0),
                                          upper_only=self.mono)
            return {i: full[i] for i in segs}
        for i in segs:
            if isinstance(node, (And, Or)) and self.mono:
                kids = [self.art.theta[c][i] for c in node.children]
                where = f"n={nid},i={i}"
                if isinstance(node, And):
                    out[i] = _upper_min(m, kids, f"th_{nid}_{i}", f"eq:log_time_rob[{where}]")
                else:
                    out[i] = self._mono_sup([(k, [v], []) for k, v in enumerate(kids)], None,
                                            f"th_{nid}_{i}", where, (node, i), phantom=False)
            elif isinstance(node, (And, Or)):
                kids = [self.art.theta[c][i] for c in node.children]
                fn = ir.enc_min if isinstance(node, And) else ir.enc_max
                out[i] = LinExpr.of(fn(m, kids, f"th_{nid}_{i}", f"eq:log_time_rob[n={nid},i={i}]"))
            else:
                out[i] = self.temporal(node, nid, i)
        return out

    def temporal(self, node, nid, i) -> LinExpr:
        w = window(node, i, self.S, self.T, self.eps_t)
        is_inf = isinstance(node, Always)
        sentinel = self.prob.theta_inf * (1.0 if is_inf else -1.0)
        if w.side_false or not w.cands:
            return self._empty(nid, i, sentinel)
        if self.mono:
            return self._mono_temporal(node, nid, i, w)
        caps = self.cap_indicators(node, nid, i, w)
        if isinstance(node, Until):
            vals = self._until_values(node, nid, i, w, caps)
        else:
            vals = {j: self.art.theta[node.child][j] for j, _ in caps}
        return encode_extremum(self.model, [(vals[j], b) for j, b in caps], is_inf,
                               self.prob.allow_empty, self.prob.theta_inf,
                               f"th_{nid}_{i}", f"n={nid},i={i}", self.art.selectors, (node, i))

    def _empty(self, nid, i, sentinel):
        if self.prob.allow_empty:
            return _const(sentinel)
        # no admissible candidate: sum of selectors over an empty set must be 1
        self.model.add_constraint(LinExpr(), EQ, 1.0, f"eq:supremum_exists[n={nid},i={i},empty]")
        return _const(0)

    def _until_values(self, node, nid, i, w, caps):
        """min(theta2_j, min over held l <= j of theta1_l) by a running prefix minimum."""
        m = self.model
        big = self.prob.theta_inf
        th1, th2 = self.art.theta[node.left], self.art.theta[node.right]
        last = max(j for j, _ in caps)
        prefix = {}
        run = None
        for l in range(last + 1):
            if l in w.hold:
                conds = w.hold[l]
                if conds:
                    tag = f"eq:until_hold[n={nid},i={i},l={l}]"
                    h = self.conj([self.indicator(c, tag) for c in conds], f"bhold_{nid}_{i}_{l}", tag)
                    # big + (theta1_l - big) * h
                    c_l = big + _prod(m, th1[l] - big, h, f"uh_{nid}_{i}_{l}", tag)
                else:
                    c_l = th1[l]
                if run is None:
                    run = c_l
                else:
                    run = LinExpr.of(ir.enc_min(m, [run, c_l], f"upre_{nid}_{i}_{l}",
                                                f"eq:until_time_rob[n={nid},i={i},l={l}]"))
            prefix[l] = run
        vals = {}
        for j, _ in caps:
            pre = prefix.get(j)
            if pre is None:
                vals[j] = th2[j]
            else:
                vals[j] = LinExpr.of(ir.enc_min(m, [th2[j], pre], f"ucand_{nid}_{i}_{j}",
                                                f"eq:until_time_rob[n={nid},i={i},j={j}]"))
        return vals

    # -- monotone variant ---------------------------------------------------
    # Every row below only bounds a robustness value from above (or forces
    # the geometry a label or selector claims). Robustness is nondecreasing
    # in labels and in child values, so the largest encodable theta_0 for a
    # fixed trajectory is still the exact one; only the weak direction of
    # each gadget is dropped, which removes most binaries.

    def _mono_label(self, lit, i: int) -> LinExpr:
        region = self.prob.regions[lit.name]
        m = self.model
        tag = f"alg:label[{lit.name},i={i}]"
        if isinstance(lit, Atom):
            z = m.add_binary(f"z_{lit.name}_{i}")
            for e in range(len(region.h)):
                for w in (i, i + 1):
                    mu = self.point_margin(region, "in", w, e)
                    _force(m, mu, z, f"eq:milp_lin_pred[{region.name},in,w={w},e={e}]")
            return LinExpr.of(z)
        z = m.add_binary(f"zn_{lit.name}_{i}")
        edges = []
        for e in range(len(region.h)):
            o = m.add_binary(f"zo_{lit.name}_{i}_{e}")
            for w in (i, i + 1):
                mu = self.point_margin(region, "out", w, e)
                _force(m, mu, o, f"eq:milp_lin_pred[{region.name},out,w={w},e={e}]")
            edges.append(o)
        m.add_constraint(z - ir.sum_expr(edges), LE, 0.0, tag)
        return LinExpr.of(z)

    def _cond_mu(self, cond: Cond) -> LinExpr:
        return cond.expr(self.art.t) - cond.margin * self.eps_t

    def _mono_temporal(self, node, nid, i, w: Window) -> LinExpr:
        m = self.model
        where = f"n={nid},i={i}"
        if isinstance(node, Always):
            child = self.art.theta[node.child]
            sure = [model_hi(m, child[j]) for j, conds in w.cands if not conds]
            hi = min(sure) if sure else self.prob.theta_inf
            lo = min(m.bounds(child[j])[0] for j, _ in w.cands)
            th = m.add_continuous(f"th_{nid}_{i}", min(lo, hi), hi)
            for j, conds in w.cands:
                tag = f"eq:leq_alws[{where},j={j}]"
                parts = [_detect(m, self._cond_mu(c), "b_win", f"eq:timeintrs[{where},j={j}]")
                         for c in conds]
                _gated_le(m, th, child[j], parts, tag)
            return LinExpr.of(th)
        if isinstance(node, Until):
            vals = self._mono_until_values(node, nid, i, w)
        else:
            vals = {j: [self.art.theta[node.child][j]] for j, _ in w.cands}
        cands = [(j, vals[j], conds) for j, conds in w.cands]
        return self._mono_sup(cands, w.side, f"th_{nid}_{i}", where, (node, i),
                              phantom=self.prob.allow_empty)

    def _mono_until_values(self, node, nid, i, w):
        m = self.model
        th1, th2 = self.art.theta[node.left], self.art.theta[node.right]
        last = max(j for j, _ in w.cands)
        run, prefix = None, {}
        for l in range(last + 1):
            if l in w.hold:
                tag = f"eq:until_time_rob[n={nid},i={i},l={l}]"
                parts = [_detect(m, self._cond_mu(c), "b_hold", f"eq:until_hold[n={nid},i={i},l={l}]")
                         for c in w.hold[l]]
                if run is None and not parts:
                    run = LinExpr.of(th1[l])
                else:
                    hi = self.prob.theta_inf if run is None else m.bounds(run)[1]
                    lo = min(m.bounds(th1[l])[0], hi)
                    if run is not None:
                        lo = min(lo, m.bounds(run)[0])
                    v = m.add_continuous(f"upre_{nid}_{i}_{l}", lo, hi)
                    if run is not None:
                        m.add_constraint(v - run, LE, 0.0, tag)
                    _gated_le(m, v, th1[l], parts, tag)
                    run = LinExpr.of(v)
            prefix[l] = run
        return {j: [th2[j]] + ([prefix[j]] if prefix.get(j) is not None else [])
                for j, _ in w.cands}

    def _mono_sup(self, cands, side: Optional[Cond], name, where, key, phantom: bool) -> LinExpr:
        """Upper half of a gated sup: one selector per candidate, selected value bounds theta."""
        m = self.model
        big = self.prob.theta_inf
        if phantom and side is None and any(not conds for _, _, conds in cands):
            phantom = False  # window never empty
        if len(cands) == 1 and not cands[0][2] and side is None and not phantom:
            _, vals, _ = cands[0]
            return vals[0] if len(vals) == 1 else _upper_min(m, vals, name, f"eq:inf_sup[{where}]")
        entries = list(cands) + ([(None, [_const(-big)], [])] if phantom else [])
        his = [min(m.bounds(v)[1] for v in vals) for _, vals, _ in entries]
        lo = min(m.bounds(v)[0] for _, vals, _ in entries for v in vals)
        hi = max(his)
        th = m.add_continuous(name, min(lo, hi), hi)
        sels, real = [], []
        for k, (j, vals, conds) in enumerate(entries):
            s = m.add_binary(f"{name}_sel{k}")
            sels.append(s)
            j_tag = f"[{where},c={k}]"
            if j is not None:
                real.append(s)
            for c in conds:
                _force(m, self._cond_mu(c), s, f"eq:timeintrs{j_tag}")
            for v in vals:
                mm = m.need_m(hi - m.bounds(v)[0], "eq:evtll_leq")
                if mm > 0:
                    m.add_constraint(th - v + mm * s, LE, mm, "eq:evtll_leq" + j_tag)
        if side is not None:
            _force(m, self._cond_mu(side), ir.sum_expr(real), f"eq:timeintrs[{where},side]")
        m.add_constraint(ir.sum_expr(sels), EQ, 1.0, f"eq:supremum_exists[{where}]")
        self.art.selectors[key] = sels
        return LinExpr.of(th)

    # -- qualitative --------------------------------------------------------
    def sat(self, node, nid_of) -> dict:
        m = self.model
        segs = self.art.needed[node]
        nid = nid_of[node]
        out = {}
        for i in segs:
            if isinstance(node, (Atom, NegAtom)):
                out[i] = self.label(node, i)
                continue
            tag = f"eq:qual[n={nid},i={i}]"
            if isinstance(node, (And, Or)):
                kids = [self.art.sat[c][i] for c in node.children]
                fn = ir.enc_and if isinstance(node, And) else ir.enc_or
                out[i] = LinExpr.of(fn(m, kids, f"zq_{nid}_{i}", tag))
                continue
            w = window(node, i, self.S, self.T, self.eps_t)
            if w.side_false or not w.cands:
                out[i] = _const(1 if isinstance(node, Always) else 0)
                continue
            if isinstance(node, Always):
                # AND_j (b_cap => z_j)  ==  AND_j OR(1 - b_cap, z_j)
                terms = []
                for j, conds in w.cands:
                    parts = [self.indicator(c, tag) for c in conds]
                    cap = self.conj(parts, f"bcapq_{nid}_{i}_{j}", tag)
                    terms.append(_implies(m, cap, self.art.sat[node.child][j], tag))
                out[i] = _and_expr(m, terms, f"zq_{nid}_{i}", tag)
                continue
            side = [self.indicator(w.side, tag)] if w.side is not None else []
            zs1 = self.art.sat[node.left] if isinstance(node, Until) else None
            zs2 = self.art.sat[node.right] if isinstance(node, Until) else self.art.sat[node.child]
            held = []
            terms = []
            for j, conds in w.cands:
                parts = [self.indicator(c, tag) for c in conds]
                items = parts + [zs2[j]]
                if isinstance(node, Until):
                    while len(held) <= j:
                        l = len(held)
                        if l in w.hold:
                            hp = [self.indicator(c, tag) for c in w.hold[l]]
                            hcap = self.conj(hp, f"bholdq_{nid}_{i}_{l}", tag)
                            held.append(_implies(m, hcap, zs1[l], tag))
                        else:
                            held.append(_const(1))
                    items += held[: j + 1]
                terms.append(_and_expr(m, items, f"zqc_{nid}_{i}_{j}", tag))
            any_j = _or_expr(m, terms, f"zqa_{nid}_{i}", tag)
            out[i] = _and_expr(m, side + [any_j], f"zq_{nid}_{i}", tag)
        return out


def model_hi(model, e) -> float:
    return model.bounds(e)[1]


def _force(model, mu, gate, tag):
    """``gate = 1`` implies ``mu >= 0``; ``gate`` is a binary or a sum of exclusive binaries."""
    mu, gate = LinExpr.of(mu), LinExpr.of(gate)
    if not gate.terms and gate.const < 1:
        return
    lo = model.bounds(mu)[0]
    if lo >= 0:
        return
    mm = model.need_m(-lo, tag)
    model.add_constraint(mu - mm * gate, GE, -mm, tag)


def _detect(model, mu, name, tag) -> LinExpr:
    """Binary forced to 1 whenever ``mu >= 0`` (free to be 1 otherwise)."""
    lo, hi = model.bounds(mu)
    if lo >= 0:
        return _const(1)
    if hi < 0:
        return _const(0)
    mm = model.need_m(hi + model.m_eps, tag)
    d = model.add_binary(name)
    model.add_constraint(mu - mm * d, LE, -model.m_eps, tag)
    return LinExpr.of(d)


def _gated_le(model, y, v, parts, tag):
    """``y <= v`` whenever every part is 1."""
    parts = [LinExpr.of(p) for p in parts]
    if any(not p.terms and p.const < 1 for p in parts):
        return
    parts = [p for p in parts if p.terms]
    y, v = LinExpr.of(y), LinExpr.of(v)
    if not parts:
        model.add_constraint(y - v, LE, 0.0, tag)
        return
    mm = model.need_m(model.bounds(y)[1] - model.bounds(v)[0], tag)
    if mm <= 0:
        return
    # y - v <= M * sum(1 - part)
    model.add_constraint(y - v + mm * ir.sum_expr(parts), LE, mm * len(parts), tag)


def _upper_min(model, vals, name, tag) -> LinExpr:
    vals = [LinExpr.of(v) for v in vals]
    if len(vals) == 1:
        return vals[0]
    lo = min(model.bounds(v)[0] for v in vals)
    hi = min(model.bounds(v)[1] for v in vals)
    y = model.add_continuous(name, min(lo, hi), hi)
    for v in vals:
        model.add_constraint(y - v, LE, 0.0, tag)
    return LinExpr.of(y)


def _implies(model, a: LinExpr, b: LinExpr, tag) -> LinExpr:
    if not a.terms:
        return b if a.const >= 1 else _const(1)
    na = LinExpr.of(ir.enc_not(model, _as_var(model, a, tag), "b_neg", tag))
    return _or_expr(model, [na, b], "b_imp", tag)


def _as_var(model, e: LinExpr, tag):
    if len(e.terms) == 1 and e.const == 0:
        (k, c), = e.terms.items()
        if c == 1.0:
            return model.vars[k]
    v = model.add_binary("b_alias")
    model.add_constraint(v - e, EQ, 0.0, tag)
    return v


def _and_expr(model, items, name, tag) -> LinExpr:
    items = [LinExpr.of(x) for x in items]
    if any(not x.terms and x.const < 1 for x in items):
        return _const(0)
    items = [x for x in items if x.terms]
    if not items:
        return _const(1)
    if len(items) == 1:
        return items[0]
    return LinExpr.of(ir.enc_and(model, items, name, tag))


def _or_expr(model, items, name, tag) -> LinExpr:
    items = [LinExpr.of(x) for x in items]
    if any(not x.terms and x.const >= 1 for x in items):
        return _const(1)
    items = [x for x in items if x.terms]
    if not items:
        return _const(0)
    if len(items) == 1:
        return items[0]
    return LinExpr.of(ir.enc_or(model, items, name, tag))


def encode_extremum(model: MilpModel, cands, is_inf: bool, allow_empty: bool, theta_inf: float,
                    name: str, where: str, sel_store=None, key=None) -> LinExpr:
    """sup (or inf) of candidate values gated by window indicators.

    ``cands`` is a list of ``(value_expr, b_cap_expr)``. For a sup::

        theta >= theta_j - (1 - b_cap_j) M      every admissible j
        theta <= theta_j + (1 - b_j) M          selected j
        b_j <= b_cap_j,  sum b_j = 1
    """
    if len(cands) == 1 and not LinExpr.of(cands[0][1]).terms:
        return LinExpr.of(cands[0][0])
    sgn = 1.0 if is_inf else -1.0
    bounds = [model.bounds(v) for v, _ in cands]
    lo = min(b[0] for b in bounds)
    hi = max(b[1] for b in bounds)
    if allow_empty:
        cands = list(cands) + [(_const(sgn * theta_inf), None)]
        lo, hi = min(lo, sgn * theta_inf), max(hi, sgn * theta_inf)
    th = model.add_continuous(name, lo, hi)
    sels = []
    for k, (v, cap) in enumerate(cands):
        v = LinExpr.of(v)
        vlo, vhi = model.bounds(v)
        j_tag = f"[{where},c={k}]"
        if cap is not None:
            cap = LinExpr.of(cap)
            if is_inf:
                # theta <= theta_j + (1 - cap) M
                mm = model.need_m(hi - vlo, "eq:leq_alws")
                model.add_constraint(th - v + mm * cap, LE, mm, "eq:leq_alws" + j_tag)
            else:
                mm = model.need_m(vhi - lo, "eq:geq_evtll")
                model.add_constraint(th - v - mm * cap, GE, -mm, "eq:geq_evtll" + j_tag)
        s = model.add_binary(f"{name}_sel{k}")
        sels.append(s)
        if cap is not None and cap.terms:
            model.add_constraint(s - cap, LE, 0.0, "eq:supremum_exists" + j_tag)
        elif cap is not None and cap.const < 1:
            model.set_bounds(s, hi=0.0)
        if is_inf:
            # theta >= theta_j - (1 - b_j) M
            mm = model.need_m(vhi - lo, "eq:alws_geq")
            model.add_constraint(th - v - mm * s, GE, -mm, "eq:alws_geq" + j_tag)
        else:
            mm = model.need_m(hi - vlo, "eq:evtll_leq")
            model.add_constraint(th - v + mm * s, LE, mm, "eq:evtll_leq" + j_tag)
    model.add_constraint(ir.sum_expr(sels), EQ, 1.0, f"eq:supremum_exists[{where}]")
    if sel_store is not None:
        sel_store[key] = sels
    return LinExpr.of(th)


def encode_temporal(model: MilpModel, node, child_theta: Mapping[int, LinExpr], t: Sequence, i: int,
                    T: float, *, left_theta: Optional[Mapping[int, LinExpr]] = None,
                    eps_t: Optional[float] = None, allow_empty: bool = True) -> LinExpr:
    """Robustness of one temporal node at segment ``i`` from its children's values.

    ``child_theta`` maps segment index to the child's robustness expression
    (the right operand for until); ``left_theta`` is until's left operand.
    Missing entries are treated as unconstrained only if the window never
    reads them.
    """
    S = len(t) - 1
    eps = model.eps_t if eps_t is None else eps_t
    prob = _StubProb(T=T, eps_t=eps, allow_empty=allow_empty)
    enc = _Encoder.__new__(_Encoder)
    enc.prob, enc.model, enc.K, enc.S, enc.T, enc.eps_t = prob, model, S + 1, S, T, eps
    enc.mono, enc._pred_cache = False, {}
    enc.art = EncodingArtifacts(t=list(t), p=[])
    if isinstance(node, Until):
        enc.art.theta = {node.left: dict(left_theta or {}), node.right: dict(child_theta)}
    else:
        enc.art.theta = {node.child: dict(child_theta)}
    return enc.temporal(node, 0, i)


@dataclass
class _StubProb:
    T: float
    eps_t: float
    allow_empty: bool

    @property
    def theta_inf(self):
        return self.T + 1.0


def encode_qualitative(model: MilpModel, enc: "_Encoder", formula: Formula) -> LinExpr:
    from .monitor import unique_nodes
    nodes = unique_nodes(formula)
    nid_of = {n: k for k, n in enumerate(nodes)}
    for n in nodes:
        enc.art.sat[n] = enc.sat(n, nid_of)
    return enc.art.sat[formula][0]


def encode_objective(model: MilpModel, prob: SynthesisProblem, theta0: Optional[LinExpr], art: EncodingArtifacts):
    """``maximize -J + lambda * theta_0`` with ``theta_0 >= theta_star``."""
    obj = LinExpr()
    if prob.objective == L1_PATH:
        p = art.p
        for i in range(len(p) - 1):
            for k in range(len(p[i])):
                width = prob.workspace.upper[k] - prob.workspace.lower[k]
                u = model.add_continuous(f"len_{i}_{k}", 0.0, width)
                dp = p[i + 1][k] - p[i][k]
                model.add_constraint(u - dp, GE, 0.0, f"obj:abs[i={i},d={k}]")
                model.add_constraint(u + dp, GE, 0.0, f"obj:abs[i={i},d={k}]")
                art.path_aux.append(u)
                obj = obj - u
    if theta0 is not None:
        model.add_constraint(theta0, GE, prob.theta_star, "prob:theta_star")
        obj = obj + prob.lam * theta0
    model.set_objective(obj)


def encode_mission(prob: SynthesisProblem) -> tuple[MilpModel, EncodingArtifacts]:
    from .monitor import unique_nodes
    big_m = prob.big_m or compute_big_m(prob.formula, prob.regions, prob.workspace)
    model = MilpModel(big_m=big_m, m_eps=prob.m_eps, eps_t=prob.eps_t)
    t, p = encode_dynamics(model, prob.K, prob.workspace, prob.v_b, prob.T, prob.start, prob.goal)
    enc = _Encoder(prob, model)
    art = EncodingArtifacts(t=t, p=p)
    enc.art = art
    S = prob.K - 1
    art.needed = needed_segments(prob.formula, S, prob.T, prob.eps_t, prob.reduced)
    nodes = unique_nodes(prob.formula)
    nid_of = {n: k for k, n in enumerate(nodes)}
    if prob.mode == ROBUST:
        for n in nodes:
            art.theta[n] = enc.theta(n, nid_of)
        art.theta0 = art.theta[prob.formula][0]
        encode_objective(model, prob, art.theta0, art)
    else:
        art.z0 = encode_qualitative(model, enc, prob.formula)
        model.add_constraint(art.z0, EQ, 1.0, "prob:sat")
        encode_objective(model, prob, None, art)
    model.validate()
    art.num_binary = model.num_binary
    art.num_continuous = model.num_continuous
    art.num_constraints = model.num_constraints
    return model, art


def pin_trajectory(model: MilpModel, art: EncodingArtifacts, traj: PwlTrajectory):
    """Fix all trajectory variables to the given waypoints (for round-trip checks)."""
    if traj.K != len(art.t):
        raise ValueError(f"trajectory has {traj.K} waypoints, model has {len(art.t)}")
    for w, tv, pv in zip(traj.waypoints, art.t, art.p):
        model.fix(tv, float(w.t))
        for k, v in enumerate(pv):
            model.fix(v, w.p[k])


def extract_trajectory(sol, art: EncodingArtifacts, T: float) -> PwlTrajectory:
    """Waypoints from a solution; timestamps are clamped monotone with exact ends."""
    times = np.array([sol.value(v) for v in art.t])
    times = np.clip(np.maximum.accumulate(times), 0.0, T)
    times[0], times[-1] = 0.0, T
    pts = [[sol.value(v) for v in row] for row in art.p]
    return PwlTrajectory.from_arrays([float(x) for x in times], pts)


def formula_stats(prob: SynthesisProblem):
    return analyze(prob.formula)
