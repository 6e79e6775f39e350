"""Benchmark missions and the encoding-size scaling harness.

All geometry here is invented. Desk cases are small analogues of the four
mission structures; paper-scale cases use the full formulas at large K and
are only encoded, never solved in-process.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoder import EXACT, MONOTONE, encode_mission, extract_trajectory
from .mission import AVOID, REACH, Mission
from .monitor import eval_qualitative, eval_time_robustness
from .solver import SolverConfig, SolveStats, solve

DESK, PAPER = "desk", "paper"
DESK_TIME_BUDGET = 30.0


@dataclass
class BenchmarkCase:
    mission: Mission
    feasible: bool
    theta_min: Optional[float]
    scale: str
    # order-of-magnitude reference counts for export-only cases
    reference: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.mission.name


def _box(name, lo, hi, kind=REACH):
    return {"name": name, "kind": kind, "box": [list(lo), list(hi)]}


def _desk(name, formula, regions, start, goal=None, K=8, T=20):
    return Mission(name=name, workspace={"lower": [0, 0], "upper": [10, 10]}, horizon=T,
                   regions=regions, formula=formula, K=K, v_b=1.0, theta_star=0.5, lam=1.0,
                   epsilon=0.1, eps_t=1e-3, start=list(start),
                   goal=None if goal is None else list(goal), encoding=MONOTONE)


def desk_cases() -> list[BenchmarkCase]:
    phi1 = _desk("desk-phi1", "(!A1) & F(G[0,2] R1) & F(G[0,2] R2)",
                 [_box("A1", (3, 0), (5, 4), AVOID), _box("R1", (5, 5), (8, 8)),
                  _box("R2", (6, 6), (9, 9))], start=(1, 1), goal=(9, 1))
    phi2 = _desk("desk-phi2", "(!A1) & F[0,8] G[0,2] R1 & F[8,16] G[0,2] R2",
                 [_box("A1", (3, 3), (5, 7), AVOID), _box("R1", (1, 6), (4, 9)),
                  _box("R2", (3, 6), (7, 9))], start=(1, 1))
    phi3 = _desk("desk-phi3", "((!G1) U[0,8] C1) & F(G[0,1] R1)",
                 [_box("G1", (4, 3), (6, 7), AVOID), _box("C1", (0, 0), (3, 3)),
                  _box("R1", (7, 4), (9, 6))], start=(1, 1))
    # an unbounded G over the horizon always reaches the final segment, whose
    # right robustness is 0, so the avoid clause carries a finite window;
    # the goal doubles as the locked door to stay within three regions
    phi4 = _desk("desk-phi4", "F G1 & G[0,10](!A1) & ((!G1) U[0,10] R1)",
                 [_box("G1", (8, 8), (10, 10)), _box("A1", (4, 0), (6, 5), AVOID),
                  _box("R1", (1, 6), (3, 8))], start=(1, 1))
    return [BenchmarkCase(m, True, 0.5, DESK) for m in (phi1, phi2, phi3, phi4)]


def _grid_boxes(prefix, n, origin, step, size, cols, kind):
    out = []
    for k in range(n):
        r, c = divmod(k, cols)
        lo = (origin[0] + c * step[0], origin[1] + r * step[1])
        out.append(_box(f"{prefix}{k + 1}", lo, (lo[0] + size[0], lo[1] + size[1]), kind))
    return out


def _paper(name, formula, regions, K, T, start, goal=None, reference=None):
    m = Mission(name=name, workspace={"lower": [0, 0], "upper": [60, 60]}, horizon=T,
                regions=regions, formula=formula, K=K, v_b=3.0, theta_star=0.5, lam=1.0,
                epsilon=0.1, eps_t=1e-3, start=list(start),
                goal=None if goal is None else list(goal), encoding=EXACT)
    return BenchmarkCase(m, True, None, PAPER, dict(reference or {}))


def paper_cases() -> list[BenchmarkCase]:
    avoid8 = _grid_boxes("A", 8, (6, 6), (12, 24), (5, 8), 4, AVOID)
    phi1 = " & ".join(f"(!A{k})" for k in range(1, 9)) + " & F(G[0,5] R1) & F(G[0,5] R2)"
    r12 = [_box("R1", (50, 50), (56, 56)), _box("R2", (50, 4), (56, 10))]
    avoid20 = _grid_boxes("A", 20, (4, 4), (11, 11), (4, 4), 5, AVOID)
    phi2 = (" & ".join(f"(!A{k})" for k in range(1, 21))
            + " & F[0,150] G[0,15] R1 & F[180,260] G[0,15] R2 & F[50,80] G[0,15] R3"
            + " & G[200,220] R3")
    r123 = [_box("R1", (50, 50), (58, 58)), _box("R2", (2, 50), (10, 58)),
            _box("R3", (26, 26), (34, 34))]
    phi3 = "((!G1) U[0,30] C1) & F[50,80] G[0,5] R1 & F(G[0,5] R2)"
    r3 = [_box("G1", (28, 20), (32, 40), AVOID), _box("C1", (2, 2), (8, 8)),
          _box("R1", (45, 45), (55, 55)), _box("R2", (45, 5), (55, 15))]
    phi4 = ("F Goal & " + " & ".join(f"G(!A{k})" for k in range(1, 6)) + " & "
            + " & ".join(f"((!D{k}) U R{k})" for k in range(1, 6)))
    r4 = ([_box("Goal", (52, 52), (58, 58))] + _grid_boxes("A", 5, (10, 20), (10, 0), (4, 30), 5, AVOID)
          + _grid_boxes("D", 5, (10, 52), (10, 0), (4, 6), 5, AVOID)
          + _grid_boxes("R", 5, (2, 2), (11, 0), (5, 5), 5, REACH))
    return [
        _paper("paper-phi1-K23", phi1, avoid8 + r12, 23, 100, (1, 1), (58, 30),
               {"num_binary": 7724, "num_continuous": 895, "num_constraints": 22740}),
        _paper("paper-phi2-K25", phi2, avoid20 + r123, 25, 300, (1, 1), None,
               {"num_binary": 16636, "num_continuous": 1973, "num_constraints": 49677}),
        _paper("paper-phi3-K23", phi3, r3, 23, 100, (1, 1), None,
               {"num_binary": 6394, "num_continuous": 648, "num_constraints": 18498}),
        _paper("paper-phi4-K35", phi4, r4, 35, 200, (1, 30), None,
               {"num_binary": 11855, "num_continuous": 2090, "num_constraints": 39337}),
    ]


def load_benchmarks() -> list[BenchmarkCase]:
    return desk_cases() + paper_cases()


# --------------------------------------------------------------------------
# running

def run_case(case: BenchmarkCase, time_limit: float = DESK_TIME_BUDGET) -> dict:
    """Encode; for desk cases also solve and re-verify with the monitor."""
    m = case.mission
    prob = m.problem()
    t0 = time.perf_counter()
    model, art = encode_mission(prob)
    out = {"name": case.name, "scale": case.scale, "formula": m.formula, "K": m.K,
           "encoding": m.encoding, **art.counts(), "encode_seconds": time.perf_counter() - t0}
    if case.scale == PAPER:
        out["reference"] = case.reference
        out["status"] = "ExportOnly"
        return out
    stats = SolveStats()
    t1 = time.perf_counter()
    sol = solve(model, SolverConfig(time_limit=time_limit), stats)
    out.update(status=sol.status, objective=sol.objective_value, nodes=stats.nodes,
               solve_seconds=time.perf_counter() - t1)
    if sol.has_solution:
        traj = extract_trajectory(sol, art, prob.T)
        regions = m.region_objects()
        f = prob.formula
        theta = eval_time_robustness(f, traj, regions, m.epsilon, m.side).root[0]
        sat = eval_qualitative(f, traj, regions, m.epsilon).root[0]
        out.update(theta_encoded=sol.value(art.theta0), theta_monitor=float(theta), sat=bool(sat))
        out["verified"] = bool(sat) and float(theta) >= (case.theta_min or 0.0) - 1e-6
    else:
        out["verified"] = False
    out["passed"] = (out["status"] == "Optimal") == case.feasible and out["verified"] == case.feasible \
        and out["solve_seconds"] <= time_limit
    return out


# --------------------------------------------------------------------------
# scaling

@dataclass
class ScalingReport:
    formula: str
    K_values: list
    num_binary: list
    num_continuous: list
    num_constraints: list
    binary_exponent: float
    continuous_exponent: float
    constraint_exponent: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


NESTED_TEMPLATE = "F[0,{T}] G[0,2] R"
SINGLE_TEMPLATE = "F[0,{T}] R"


def scaling_mission(template: str, K: int, T: float = 100.0) -> Mission:
    return Mission(name=f"scaling-K{K}", workspace={"lower": [0, 0], "upper": [10, 10]},
                   horizon=T, regions=[_box("R", (4, 4), (6, 6))],
                   formula=template.format(T=_fmt(T)), K=K, v_b=1.0, theta_star=0.5,
                   start=[1, 1], encoding=EXACT)


def _fmt(x):
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def measure_scaling(template: str = NESTED_TEMPLATE, K_values: Sequence[int] = (8, 16, 32, 64),
                    T: float = 100.0) -> ScalingReport:
    """Encode the template at each K and fit log-log exponents of the counts."""
    K_values = sorted(K_values)
    if len(K_values) < 3 or K_values[-1] < 4 * K_values[0]:
        raise ValueError("need at least 3 K values spanning a factor of 4")
    rows = []
    for K in K_values:
        _, art = encode_mission(scaling_mission(template, K, T).problem())
        rows.append(art.counts())
    col = {k: [r[k] for r in rows] for k in rows[0]}
    return ScalingReport(template.format(T=_fmt(T)), list(K_values), col["num_binary"],
                         col["num_continuous"], col["num_constraints"],
                         loglog_slope(K_values, col["num_binary"]),
                         loglog_slope(K_values, col["num_continuous"]),
                         loglog_slope(K_values, col["num_constraints"]))


def scaling_figure(reports: Sequence[ScalingReport], path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 4))
    for rep in reports:
        ax.loglog(rep.K_values, rep.num_binary, "o-", label=f"{rep.formula} bin ({rep.binary_exponent:.2f})")
        ax.loglog(rep.K_values, rep.num_continuous, "s--",
                  label=f"{rep.formula} cont ({rep.continuous_exponent:.2f})")
    ax.set_xlabel("K (waypoints)")
    ax.set_ylabel("variables")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    plt.close(fig)


def within(x: float, lo: float, hi: float) -> bool:
    return lo <= x <= hi and not math.isnan(x)
