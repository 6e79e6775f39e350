"""Dense bounded-variable primal simplex for LP relaxations.

Rows ``a x (<=|>=|=) b`` receive one slack each; every structural variable
must have finite bounds. Phase 1 minimizes the sum of artificials added for
rows whose slack cannot absorb the initial residual; phase 2 maximizes the
objective. Pricing is Dantzig's rule, falling back to Bland's rule (lowest
index entering and leaving) after a run of degenerate pivots so the method
cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ModelError, ModelUnbounded, NumericalInstability
from ..milp_ir import EQ, GE, LE, MilpModel

OPTIMAL, INFEASIBLE, UNBOUNDED = "Optimal", "Infeasible", "Unbounded"

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
COST_TOL = 1e-9
DEGENERATE_RUN = 30


@dataclass
class LpRelaxation:
    """``max c x`` s.t. ``A x (sense) b``, ``lo <= x <= hi`` (dense)."""

    c: np.ndarray
    A: np.ndarray
    sense: np.ndarray   # +1 for <=, -1 for >=, 0 for =
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    c0: float = 0.0

    def __post_init__(self):
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ModelError("relaxation dimensions disagree with A")
        if self.b.shape != (m,) or self.sense.shape != (m,):
            raise ModelError("relaxation row data disagree with A")

    @classmethod
    def from_model(cls, model: MilpModel, lo=None, hi=None) -> "LpRelaxation":
        n = model.num_vars
        A = np.zeros((model.num_constraints, n))
        b = np.zeros(model.num_constraints)
        sense = np.zeros(model.num_constraints)
        code = {LE: 1.0, GE: -1.0, EQ: 0.0}
        for r, con in enumerate(model.constraints):
            for k, v in con.expr.terms.items():
                A[r, k] = v
            b[r] = con.rhs
            sense[r] = code[con.sense]
        c = np.zeros(n)
        for k, v in model.objective.terms.items():
            c[k] = v
        lo = np.array([v.lo for v in model.vars]) if lo is None else np.asarray(lo, float)
        hi = np.array([v.hi for v in model.vars]) if hi is None else np.asarray(hi, float)
        return cls(c, A, sense, b, lo, hi, model.objective.const)


@dataclass
class LpResult:
    status: str
    value: float = float("nan")
    x: Optional[np.ndarray] = None
    pivots: int = 0


class _Tableau:
    def __init__(self, A, b, lo, hi):
        self.T = A.astype(float).copy()     # B^-1 A, kept current
        self.lo = lo.astype(float).copy()
        self.hi = hi.astype(float).copy()
        m, n = A.shape
        self.m, self.n = m, n
        self.basis = np.full(m, -1, dtype=int)
        self.x = np.zeros(n)
        self.is_basic = np.zeros(n, dtype=bool)
        self.pivots = 0
        self._b = b

    def set_basis(self, basis, x_nonbasic):
        self.basis = np.array(basis, dtype=int)
        self.is_basic[:] = False
        self.is_basic[self.basis] = True
        B = self.T[:, self.basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalInstability("singular starting basis") from exc
        self.T = Binv @ self.T
        self.x = x_nonbasic.copy()
        rhs = Binv @ self._b - self.T[:, ~self.is_basic] @ self.x[~self.is_basic]
        self.x[self.basis] = rhs

    def reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T

    def run(self, cost, max_pivots=100000):
        """Minimize ``cost . x``; returns OPTIMAL or UNBOUNDED."""
        degenerate = 0
        while True:
            d = self.reduced_costs(cost)
            nb = ~self.is_basic
            at_lo = nb & (self.x <= self.lo + FEAS_TOL) & (self.lo < self.hi)
            at_hi = nb & (self.x >= self.hi - FEAS_TOL) & (self.lo < self.hi)
            free = nb & ~at_lo & ~at_hi & (self.lo < self.hi)
            up = (at_lo & (d < -COST_TOL)) | (free & (d < -COST_TOL))
            down = (at_hi & (d > COST_TOL)) | (free & (d > COST_TOL))
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                return OPTIMAL
            bland = degenerate >= DEGENERATE_RUN
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            s = 1.0 if up[j] else -1.0
            col = self.T[:, j]
            # basic x_B changes by -s * col * step
            step = self.hi[j] - self.lo[j]
            leave = -1
            leave_to = 0.0
            rate = -s * col
            for_ratio = np.abs(rate) > PIVOT_TOL
            idx = np.flatnonzero(for_ratio)
            if idx.size:
                xb = self.x[self.basis[idx]]
                r = rate[idx]
                lim = np.where(r > 0, self.hi[self.basis[idx]] - xb, xb - self.lo[self.basis[idx]])
                ratios = np.maximum(lim, 0.0) / np.abs(r)
                best = ratios.min() if ratios.size else np.inf
                if best < step:
                    ties = idx[ratios <= best + 1e-12]
                    if bland:
                        pos = int(ties[np.argmin(self.basis[ties])])
                    else:
                        pos = int(ties[np.argmax(np.abs(col[ties]))])
                    step = best
                    leave = pos
                    leave_to = self.hi[self.basis[pos]] if rate[pos] > 0 else self.lo[self.basis[pos]]
            if not np.isfinite(step):
                return UNBOUNDED
            self.x[self.basis] += rate * step
            self.x[j] += s * step
            degenerate = degenerate + 1 if step <= FEAS_TOL else 0
            if leave >= 0:
                piv = self.T[leave, j]
                if abs(piv) < PIVOT_TOL:
                    raise NumericalInstability(f"pivot {piv:.3g} below tolerance")
                out = self.basis[leave]
                self.x[out] = leave_to
                row = self.T[leave] / piv
                self.T -= np.outer(self.T[:, j], row)
                self.T[leave] = row
                self.basis[leave] = j
                self.is_basic[out] = False
                self.is_basic[j] = True
            self.pivots += 1
            if self.pivots > max_pivots:
                raise NumericalInstability("pivot limit reached")


def lp_relax_solve(relax: LpRelaxation) -> LpResult:
    """Solve the LP relaxation to optimality or report infeasibility."""
    lo, hi = relax.lo, relax.hi
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
        raise ModelError("simplex needs finite bounds on all structural variables")
    if np.any(lo > hi + FEAS_TOL):
        return LpResult(INFEASIBLE)
    m, n = relax.A.shape
    x0 = lo.copy()
    resid = relax.b - relax.A @ x0
    slo = np.where(relax.sense > 0, 0.0, np.where(relax.sense < 0, -np.inf, 0.0))
    shi = np.where(relax.sense > 0, np.inf, np.where(relax.sense < 0, 0.0, 0.0))
    # columns: structural | slack | artificial
    need_art = (resid < slo - FEAS_TOL) | (resid > shi + FEAS_TOL)
    arts = np.flatnonzero(need_art)
    na = arts.size
    A = np.zeros((m, n + m + na))
    A[:, :n] = relax.A
    A[:, n:n + m] = np.eye(m)
    sign = np.sign(resid[arts])
    A[arts, n + m + np.arange(na)] = sign
    lo_all = np.concatenate([lo, slo, np.zeros(na)])
    hi_all = np.concatenate([hi, shi, np.full(na, np.inf)])
    tab = _Tableau(A, relax.b, lo_all, hi_all)
    basis = np.arange(n, n + m)
    basis[arts] = n + m + np.arange(na)
    xn = np.concatenate([x0, np.zeros(m + na)])
    tab.set_basis(basis, xn)
    if na:
        cost1 = np.zeros(n + m + na)
        cost1[n + m:] = 1.0
        tab.run(cost1)
        if tab.x[n + m:].sum() > 1e-7 * max(1.0, np.abs(relax.b).max(initial=0.0)):
            return LpResult(INFEASIBLE, pivots=tab.pivots)
        tab.hi[n + m:] = 0.0
        tab.x[n + m:] = np.where(tab.is_basic[n + m:], tab.x[n + m:], 0.0)
    cost2 = np.zeros(n + m + na)
    cost2[:n] = -relax.c
    if tab.run(cost2) == UNBOUNDED:
        raise ModelUnbounded("LP relaxation is unbounded")
    x = np.clip(tab.x[:n], lo, hi)
    return LpResult(OPTIMAL, float(relax.c @ x + relax.c0), x, tab.pivots)


def vertex_enumeration(relax: LpRelaxation) -> LpResult:
    """Brute-force optimum over all basic solutions (tiny LPs only; test oracle)."""
    import itertools
    m, n = relax.A.shape
    rows = []
    rhs = []
    for r in range(m):
        rows.append(relax.A[r]); rhs.append(relax.b[r])
    for k in range(n):
        e = np.zeros(n); e[k] = 1.0
        rows.append(e); rhs.append(relax.lo[k])
        rows.append(e.copy()); rhs.append(relax.hi[k])
    rows = np.array(rows); rhs = np.array(rhs)
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        M = rows[list(combo)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[list(combo)])
        if np.any(x < relax.lo - 1e-7) or np.any(x > relax.hi + 1e-7):
            continue
        act = relax.A @ x
        ok = np.where(relax.sense > 0, act <= relax.b + 1e-7,
                      np.where(relax.sense < 0, act >= relax.b - 1e-7, np.abs(act - relax.b) <= 1e-7))
        if not ok.all():
            continue
        v = float(relax.c @ x + relax.c0)
        if best is None or v > best.value:
            best = LpResult(OPTIMAL, v, x)
    return best or LpResult(INFEASIBLE)
