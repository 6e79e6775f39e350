"""Best-bound branch-and-bound over the binary variables of a MilpModel."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import highspy

from ..errors import ModelError, ModelUnbounded, NumericalInstability
from ..milp_ir import (BINARY, EQ, FEASIBLE, GE, INFEASIBLE, LE, OPTIMAL, TIMED_OUT, MilpModel,
                       MilpSolution)
from .simplex import LpRelaxation, lp_relax_solve

INT_TOL = 1e-6
VERIFY_TOL = 1e-7

HIGHS, SIMPLEX = "highs", "simplex"

_OK = highspy.HighsModelStatus.kOptimal
_INFEASIBLE = highspy.HighsModelStatus.kInfeasible
_UNBOUNDED = highspy.HighsModelStatus.kUnbounded
_UNB_OR_INF = highspy.HighsModelStatus.kUnboundedOrInfeasible


@dataclass
class SolverConfig:
    time_limit: float = 60.0
    abs_gap: float = 1e-6
    node_limit: int = 1_000_000
    branching: str = "MostFractional"
    node_order: str = "BestBound"
    lp_backend: str = HIGHS
    propagate: bool = True

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.abs_gap < 0:
            raise ValueError("abs_gap must be nonnegative")
        if self.branching != "MostFractional" or self.node_order != "BestBound":
            raise ValueError("only MostFractional branching with BestBound node order is supported")
        if self.lp_backend not in (HIGHS, SIMPLEX):
            raise ValueError(f"unknown LP backend {self.lp_backend!r}")


@dataclass
class SolveStats:
    nodes: int = 0
    lp_solves: int = 0
    bound_history: list = field(default_factory=list)
    incumbent_history: list = field(default_factory=list)


class _LpOracle:
    """Node LP evaluator for fixed model rows and per-node variable bounds.

    The HiGHS backend keeps one solver instance alive and re-solves it from
    the parent node's basis after each bound change.
    """

    def __init__(self, model: MilpModel, backend: str):
        self.backend = backend
        self.n = model.num_vars
        self.c = np.zeros(self.n)
        for k, v in model.objective.terms.items():
            self.c[k] = v
        self.c0 = model.objective.const
        if backend == SIMPLEX:
            self.relax = LpRelaxation.from_model(model)
            return
        rows, cols, vals, rlo, rhi = [], [], [], [], []
        for r, con in enumerate(model.constraints):
            for k, v in con.expr.terms.items():
                rows.append(r); cols.append(k); vals.append(v)
            rlo.append(con.rhs if con.sense in (GE, EQ) else -highspy.kHighsInf)
            rhi.append(con.rhs if con.sense in (LE, EQ) else highspy.kHighsInf)
        A = sp.csc_matrix((vals, (rows, cols)), shape=(len(rlo), self.n))
        lp = highspy.HighsLp()
        lp.num_col_ = self.n
        lp.num_row_ = len(rlo)
        lp.col_cost_ = -self.c
        lp.col_lower_ = np.zeros(self.n)
        lp.col_upper_ = np.zeros(self.n)
        lp.row_lower_ = np.array(rlo, dtype=float)
        lp.row_upper_ = np.array(rhi, dtype=float)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("threads", 1)
        h.passModel(lp)
        self.h = h
        self.idx = np.arange(self.n, dtype=np.int32)

    def solve(self, lo, hi, basis=None):
        """(value, x, basis) of the relaxation; value is None when infeasible."""
        if np.any(lo > hi):
            return None, None, None
        if self.backend == SIMPLEX:
            rel = self.relax
            rel.lo, rel.hi = lo, hi
            res = lp_relax_solve(rel)
            if res.status != "Optimal":
                return None, None, None
            return res.value, res.x, None
        h = self.h
        inf = highspy.kHighsInf
        h.changeColsBounds(self.n, self.idx, np.where(np.isinf(lo), -inf, lo),
                           np.where(np.isinf(hi), inf, hi))
        if basis is not None:
            h.setBasis(basis)
        h.run()
        status = h.getModelStatus()
        if status not in (_OK, _INFEASIBLE):
            # warm start went astray: retry from scratch before giving up
            h.clearSolver()
            h.run()
            status = h.getModelStatus()
        if status == _INFEASIBLE:
            return None, None, None
        if status in (_UNBOUNDED, _UNB_OR_INF):
            raise ModelUnbounded("LP relaxation is unbounded")
        if status != _OK:
            raise NumericalInstability(f"LP solver failed: {h.modelStatusToString(status)}")
        x = np.clip(np.array(h.getSolution().col_value), lo, hi)
        return float(self.c @ x + self.c0), x, h.getBasis()


class _Propagator:
    """Activity-based bound tightening over all rows, vectorized.

    For each row the other terms' minimum (maximum) activity bounds every
    variable in it; binaries are then rounded inward. Pinned timestamps and
    positions fix most indicator binaries this way without any branching.
    """

    ROUNDS = 8
    TOL = 1e-9

    def __init__(self, model: MilpModel):
        r, k, a = [], [], []
        ulim, llim = [], []
        for i, con in enumerate(model.constraints):
            for j, v in con.expr.terms.items():
                r.append(i); k.append(j); a.append(v)
            ulim.append(con.rhs if con.sense in (LE, EQ) else math.inf)
            llim.append(con.rhs if con.sense in (GE, EQ) else -math.inf)
        self.r = np.array(r, dtype=int)
        self.k = np.array(k, dtype=int)
        self.a = np.array(a, dtype=float)
        self.m = len(model.constraints)
        self.n = model.num_vars
        self.u = np.array(ulim, dtype=float)[self.r]
        self.l = np.array(llim, dtype=float)[self.r]
        self.int_mask = np.array([v.kind == BINARY for v in model.vars], dtype=bool)
        self.pos = self.a > 0

    def _residual(self, contrib):
        """Sum of the other entries of each row (inf-safe)."""
        inf = np.isinf(contrib)
        fin = np.where(inf, 0.0, contrib)
        row_sum = np.bincount(self.r, weights=fin, minlength=self.m)
        row_inf = np.bincount(self.r, weights=inf.astype(float), minlength=self.m)
        others_inf = row_inf[self.r] - inf
        res = row_sum[self.r] - fin
        # rows with an unbounded other term give no information
        return np.where(others_inf > 0, np.nan, res)

    def run(self, lo, hi):
        """Tightened ``(lo, hi)`` copies, or None if the box is empty."""
        if not len(self.a):
            return lo, hi
        lo, hi = lo.copy(), hi.copy()
        a, k, pos = self.a, self.k, self.pos
        with np.errstate(invalid="ignore", over="ignore"):
            for _ in range(self.ROUNDS):
                clo, chi = a * lo[k], a * hi[k]
                cmin = self._residual(np.where(pos, clo, chi))
                cmax = self._residual(np.where(pos, chi, clo))
                # sum a x <= u  ->  a_k x_k <= u - min(others)
                cap_u = (self.u - cmin) / a
                # sum a x >= l  ->  a_k x_k >= l - max(others)
                cap_l = (self.l - cmax) / a
                new_hi = np.full(self.n, np.inf)
                new_lo = np.full(self.n, -np.inf)
                up = np.where(pos, cap_u, cap_l)
                dn = np.where(pos, cap_l, cap_u)
                ok_up = np.isfinite(up)
                ok_dn = np.isfinite(dn)
                np.minimum.at(new_hi, k[ok_up], up[ok_up])
                np.maximum.at(new_lo, k[ok_dn], dn[ok_dn])
                im = self.int_mask
                new_hi[im] = np.floor(new_hi[im] + self.TOL)
                new_lo[im] = np.ceil(new_lo[im] - self.TOL)
                # continuous bounds only move by a meaningful amount
                slack = self.TOL * (1.0 + np.abs(new_hi))
                tighter_hi = new_hi < hi - np.where(im, 0.5, 1e-7)
                slack_lo = self.TOL * (1.0 + np.abs(new_lo))
                tighter_lo = new_lo > lo + np.where(im, 0.5, 1e-7)
                if not tighter_hi.any() and not tighter_lo.any():
                    break
                hi = np.where(tighter_hi, np.where(im, new_hi, new_hi + slack), hi)
                lo = np.where(tighter_lo, np.where(im, new_lo, new_lo - slack_lo), lo)
                if np.any(lo > hi + 1e-7):
                    return None
                hi = np.maximum(hi, lo)
        return lo, hi


def solve(model: MilpModel, cfg: SolverConfig = None, stats: SolveStats = None) -> MilpSolution:
    """Maximize ``model`` exactly (within ``cfg.abs_gap``) or report why not.

    Nodes are explored in order of their parent's LP bound, ties by creation
    order; the branching variable is the most fractional binary, ties by
    lowest id. A candidate incumbent is re-solved with its binaries fixed
    and must pass the model's own constraint check before it is accepted.
    """
    cfg = cfg or SolverConfig()
    stats = stats if stats is not None else SolveStats()
    model.validate()
    start = time.monotonic()
    lo = np.array([v.lo for v in model.vars], dtype=float)
    hi = np.array([v.hi for v in model.vars], dtype=float)
    if cfg.lp_backend == SIMPLEX and (np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi))):
        raise ModelError("the simplex backend needs finite bounds on every variable")
    binaries = np.array([v.id for v in model.vars if v.kind == BINARY], dtype=int)
    oracle = _LpOracle(model, cfg.lp_backend)
    prop = _Propagator(model) if cfg.propagate else None

    inc_x, inc_val = None, -math.inf
    warnings = []
    heap = [(-math.inf, 0, lo, hi, None)]  # (-bound, node id, lo, hi, parent basis)
    next_id = 1
    timed_out = False
    global_bound = math.inf

    while heap:
        if stats.nodes >= cfg.node_limit or time.monotonic() - start > cfg.time_limit:
            timed_out = True
            break
        neg_bound, nid, nlo, nhi, basis = heapq.heappop(heap)
        parent_bound = -neg_bound
        # best bound over what is still open (including this node)
        open_bound = parent_bound if nid else math.inf
        global_bound = min(global_bound, max(open_bound, inc_val))
        stats.bound_history.append(global_bound)
        if parent_bound <= inc_val + cfg.abs_gap and nid:
            continue
        stats.nodes += 1
        if prop is not None:
            box = prop.run(nlo, nhi)
            if box is None:
                continue
            nlo, nhi = box
        value, x, basis = oracle.solve(nlo, nhi, basis)
        stats.lp_solves += 1
        if value is None or value <= inc_val + cfg.abs_gap:
            continue
        xb = x[binaries]
        frac = np.abs(xb - np.round(xb))
        if frac.max(initial=0.0) <= INT_TOL:
            cand = _polish(oracle, model, x, binaries, nlo, nhi, basis)
            stats.lp_solves += 1
            if cand is None:
                warnings.append(f"node {nid}: integral LP point failed verification after polishing")
                continue
            cval, cx = cand
            if cval > inc_val:
                inc_val, inc_x = cval, cx
                stats.incumbent_history.append((stats.nodes, inc_val))
            continue
        # most fractional binary, lowest id on ties
        score = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        best = score.max()
        k = int(binaries[np.flatnonzero(score >= best - 1e-12)[0]])
        for val in (0.0, 1.0):
            clo, chi = nlo.copy(), nhi.copy()
            clo[k] = chi[k] = val
            heapq.heappush(heap, (-value, next_id, clo, chi, basis))
            next_id += 1

    if heap and timed_out:
        open_best = max(-h[0] for h in heap)
        global_bound = min(global_bound, max(open_best, inc_val))
    elif not heap:
        global_bound = inc_val if inc_x is not None else -math.inf
    stats.bound_history.append(global_bound)
    if inc_x is None:
        status = TIMED_OUT if timed_out else INFEASIBLE
        return MilpSolution(status, None, math.nan, global_bound, stats.nodes, warnings)
    status = FEASIBLE if timed_out else OPTIMAL
    return MilpSolution(status, inc_x, inc_val, global_bound, stats.nodes, warnings)


def _polish(oracle, model, x, binaries, lo, hi, basis):
    """Fix binaries to their rounded values, re-solve, verify."""
    flo, fhi = lo.copy(), hi.copy()
    r = np.round(x[binaries])
    flo[binaries] = r
    fhi[binaries] = r
    value, fx, _ = oracle.solve(flo, fhi, basis)
    if value is None:
        return None
    fx[binaries] = r
    if model.violations(fx, VERIFY_TOL):
        return None
    return value, fx
