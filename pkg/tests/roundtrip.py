"""Encoder vs monitor on pinned trajectories.

Each instance draws regions, a formula of depth at most 2, and a trajectory
with K <= 6 whose stamps are fine-grained rationals. The trajectory is pinned
into the model and the MILP answers "is theta_0 >= theta_star feasible?",
which must agree with the monitor. Instances sitting inside a deliberate
margin band (timing within 2 eps_t of a window boundary, a waypoint within
1e-4 of the spatial eps offset, or theta within 1e-6 of theta_star) are
skipped and redrawn.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from trstl.encoder import EXACT, SynthesisProblem, encode_mission, pin_trajectory
from trstl.geometry import PwlTrajectory
from trstl.milp_ir import INFEASIBLE, OPTIMAL
from trstl.monitor import RIGHT, eval_time_robustness
from trstl.solver import SolverConfig, solve
from trstl.stl_ast import Always, Eventually, Until, resolve_horizon, walk

from gen import random_formula, random_points, random_regions, workspace

HORIZON = 10
EPS_T = 1e-3
SPATIAL_BAND = 1e-4
THETA_BAND = 1e-6


@dataclass
class Instance:
    seed: int
    formula: object
    regions: dict
    traj: PwlTrajectory
    theta_star: float
    theta_monitor: object
    v_b: float


@dataclass
class Outcome:
    instance: Instance
    encoding: str
    monitor_ok: bool
    milp_ok: bool
    theta_milp: float

    @property
    def agree(self) -> bool:
        return self.monitor_ok == self.milp_ok


def _times(rng, K):
    inner = sorted(Fraction(rng.randint(1, HORIZON * 1000 - 1), 1000) for _ in range(K - 2))
    return [Fraction(0)] + inner + [Fraction(HORIZON)]


def timing_in_band(f, times, eps_t=EPS_T) -> bool:
    consts = {Fraction(0)}
    for n in walk(f):
        if isinstance(n, (Always, Eventually, Until)):
            a, b = n.interval.a, n.interval.b
            consts |= {a, b, b - a}
    consts |= {-c for c in consts}
    for p in range(len(times)):
        for q in range(p + 1, len(times)):
            d = times[q] - times[p]
            if any(abs(float(d - c)) < 2 * eps_t for c in consts):
                return True
    return False


def spatial_in_band(regions, pts, eps) -> bool:
    for reg in regions.values():
        for p in pts:
            m = reg.signed_margin(p)
            if np.any(np.abs(np.abs(m) - eps) < SPATIAL_BAND):
                return True
    return False


def _pick_star(rng, theta, want: bool):
    """A theta_star the monitored value meets (``want``) or misses, else None."""
    if want:
        if theta == math.inf:
            return rng.uniform(0.05, HORIZON)
        if theta <= 0.05:
            return None
        return rng.uniform(max(0.01, float(theta) - 3.0), float(theta) - 0.01)
    if theta == math.inf:
        return None
    if theta <= 0:
        return rng.uniform(0.05, 3.0)
    return float(theta) + rng.uniform(0.05, 3.0)


def draw(seed: int, eps: float = 0.1) -> Instance:
    """First admissible instance from the stream seeded by ``seed``."""
    rng = random.Random(seed)
    ws = workspace(HORIZON)
    while True:
        regions = random_regions(rng)
        f = resolve_horizon(random_formula(rng, regions, rng.randint(1, 2), HORIZON), HORIZON)
        K = rng.randint(2, 6)
        times = _times(rng, K)
        pts = random_points(rng, K, regions)
        if timing_in_band(f, times) or spatial_in_band(regions, pts, eps):
            continue
        traj = PwlTrajectory.from_arrays(times, pts)
        speed = max(float(np.max(np.abs(np.subtract(pts[k + 1], pts[k]))) / float(times[k + 1] - times[k]))
                    for k in range(K - 1))
        theta = eval_time_robustness(f, traj, regions, eps=eps, side=RIGHT).root[0]
        star = _pick_star(rng, theta, want=seed % 2 == 0)
        if star is None or abs(star - float(theta)) < THETA_BAND:
            continue
        return Instance(seed, f, regions, traj, star, theta, v_b=speed + 1.0)


def check(inst: Instance, encoding: str = EXACT, time_limit: float = 30.0) -> Outcome:
    prob = SynthesisProblem(inst.formula, inst.regions, inst.traj.K, workspace(HORIZON), inst.v_b,
                            inst.theta_star, eps_t=EPS_T, encoding=encoding)
    model, art = encode_mission(prob)
    pin_trajectory(model, art, inst.traj)
    sol = solve(model, SolverConfig(time_limit=time_limit))
    if sol.status not in (OPTIMAL, INFEASIBLE):
        raise RuntimeError(f"seed {inst.seed}: solver returned {sol.status}")
    ok = sol.status == OPTIMAL
    return Outcome(inst, encoding, inst.theta_monitor >= inst.theta_star, ok,
                   sol.value(art.theta0) if ok else math.nan)
