"""Qualitative and time-robust evaluation of formulas over PWL trajectories.

Segments are indexed ``0 .. K-2``. All interval arithmetic runs on exact
rationals; robustness values are :class:`~fractions.Fraction` or
``math.inf`` / ``-math.inf`` for the empty infimum / supremum and for an
eventually/until whose segment is longer than its window allows.

Window conventions (closed intervals, touching counts as overlap):

* ``G[a,b]`` at segment i looks at every segment meeting ``[t_i+a, t_{i+1}+b]``;
* ``F[a,b]`` at segment i needs ``t_{i+1}-t_i <= b-a`` and looks at segments
  meeting ``[t_{i+1}+a, t_i+b]``;
* ``l U[a,b] r`` uses the eventually window for ``r`` and, for a candidate
  segment j, every segment ``l <= j`` meeting ``[t_i, t_{i+1}+b]`` for ``l``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

from .errors import UnboundAtom
from .geometry import DEFAULT_EPS, ConvexRegion, Label, PwlTrajectory, segment_label
from .stl_ast import (
    And, Always, Atom, Eventually, Formula, NegAtom, Or, Until, format_formula,
    require_resolved, subformulas, walk,
)

Robustness = Union[Fraction, float]
RIGHT, LEFT = "right", "left"
SIDES = (RIGHT, LEFT)
INF = math.inf


def sgn(z: bool) -> int:
    return 1 if z else -1


def unique_nodes(f: Formula) -> list[Formula]:
    """Distinct subformulas in post-order; equal subtrees appear once."""
    seen, out = set(), []
    for n in walk(f):
        if n not in seen:
            seen.add(n)
            out.append(n)
    return out


@dataclass
class SatMatrix:
    """``values[node][i]`` is True iff segment i satisfies ``node``."""

    formula: Formula
    values: dict = field(repr=False)

    def __getitem__(self, node):
        return self.values[node]

    @property
    def nodes(self):
        return list(self.values)

    @property
    def root(self) -> list[bool]:
        return self.values[self.formula]


@dataclass
class RobustnessMatrix:
    """``values[node][i]`` is the right or left time robustness of segment i."""

    formula: Formula
    side: str
    values: dict = field(repr=False)

    def __getitem__(self, node):
        return self.values[node]

    @property
    def nodes(self):
        return list(self.values)

    @property
    def root(self) -> list[Robustness]:
        return self.values[self.formula]


def atom_labels(f: Formula, traj: PwlTrajectory, regions: Mapping[str, ConvexRegion],
                eps: float = DEFAULT_EPS) -> dict:
    """Per referenced region, the inside/outside/neither label of each segment."""
    labels = {}
    for n in walk(f):
        if isinstance(n, (Atom, NegAtom)) and n.name not in labels:
            if n.name not in regions:
                raise UnboundAtom(n.name)
            labels[n.name] = [segment_label(regions[n.name], s, eps) for s in traj.segments()]
    return labels


def literal_truth(node, labels) -> list[bool]:
    want = Label.INSIDE if isinstance(node, Atom) else Label.OUTSIDE
    return [lab is want for lab in labels[node.name]]


def _sup(values):
    return max(values, default=-INF)


def _inf(values):
    return min(values, default=INF)


# --------------------------------------------------------------------------
# window index sets, computed from sorted timestamps

def _range(times, lo, hi):
    """Segments j (as a range) with [t_j, t_{j+1}] meeting the closed [lo, hi]."""
    S = len(times) - 1
    if lo > hi:
        return range(0)
    # first j with t_{j+1} >= lo, last j with t_j <= hi
    first = bisect.bisect_left(times, lo, 1) - 1
    last = bisect.bisect_right(times, hi, 0, S) - 1
    return range(max(first, 0), min(last, S - 1) + 1)


def _side_ok(times, i, iv):
    return times[i + 1] - times[i] <= iv.b - iv.a


def always_window(times, i, iv):
    return _range(times, times[i] + iv.a, times[i + 1] + iv.b)


def eventually_window(times, i, iv):
    return _range(times, times[i + 1] + iv.a, times[i] + iv.b)


def until_hold_window(times, i, iv):
    return _range(times, times[i], times[i + 1] + iv.b)


# --------------------------------------------------------------------------
# qualitative semantics

def eval_qualitative(f: Formula, traj: PwlTrajectory, regions: Mapping[str, ConvexRegion],
                     eps: float = DEFAULT_EPS) -> SatMatrix:
    """Boolean satisfaction of every subformula on every segment."""
    require_resolved(f)
    labels = atom_labels(f, traj, regions, eps)
    times = traj.times
    S = traj.num_segments

    def meets(j, lo, hi):
        return times[j] <= hi and times[j + 1] >= lo

    values = {}
    for n in unique_nodes(f):
        if isinstance(n, (Atom, NegAtom)):
            row = literal_truth(n, labels)
        elif isinstance(n, And):
            row = [all(values[c][i] for c in n.children) for i in range(S)]
        elif isinstance(n, Or):
            row = [any(values[c][i] for c in n.children) for i in range(S)]
        elif isinstance(n, Always):
            a, b, z = n.interval.a, n.interval.b, values[n.child]
            row = [all(z[j] for j in range(S) if meets(j, times[i] + a, times[i + 1] + b))
                   for i in range(S)]
        elif isinstance(n, Eventually):
            a, b, z = n.interval.a, n.interval.b, values[n.child]
            row = [_side_ok(times, i, n.interval)
                   and any(z[j] for j in range(S) if meets(j, times[i + 1] + a, times[i] + b))
                   for i in range(S)]
        elif isinstance(n, Until):
            a, b = n.interval.a, n.interval.b
            z1, z2 = values[n.left], values[n.right]
            row = []
            for i in range(S):
                ok = _side_ok(times, i, n.interval) and any(
                    z2[j] and all(z1[l] for l in range(j + 1)
                                  if meets(l, times[i], times[i + 1] + b))
                    for j in range(S) if meets(j, times[i + 1] + a, times[i] + b))
                row.append(ok)
        else:
            raise TypeError(f"unknown node {n!r}")
        values[n] = row
    return SatMatrix(f, values)


# --------------------------------------------------------------------------
# time robustness

def atom_robustness(z: list[bool], times, side: str = RIGHT) -> list[Fraction]:
    """Signed duration of the same-sign run after (right) or before (left) each segment."""
    S = len(z)
    dur = [times[j + 1] - times[j] for j in range(S)]
    out = [Fraction(0)] * S
    # acc is the total duration of the same-sign run that starts at the
    # neighbour (i+1 for right, i-1 for left); it resets at every sign flip
    if side == RIGHT:
        acc = Fraction(0)
        for i in range(S - 1, -1, -1):
            out[i] = sgn(z[i]) * (acc if i + 1 < S and z[i + 1] == z[i] else Fraction(0))
            acc = dur[i] + (acc if i + 1 < S and z[i + 1] == z[i] else Fraction(0))
    else:
        acc = Fraction(0)
        for i in range(S):
            out[i] = sgn(z[i]) * (acc if i > 0 and z[i - 1] == z[i] else Fraction(0))
            acc = dur[i] + (acc if i > 0 and z[i - 1] == z[i] else Fraction(0))
    return out


def eval_time_robustness(f: Formula, traj: PwlTrajectory, regions: Mapping[str, ConvexRegion],
                         eps: float = DEFAULT_EPS, side: str = RIGHT) -> RobustnessMatrix:
    """Right (``side="right"``) or left time robustness of every subformula and segment."""
    if side not in SIDES:
        raise ValueError(f"side must be 'right' or 'left', not {side!r}")
    require_resolved(f)
    labels = atom_labels(f, traj, regions, eps)
    times = traj.times
    S = traj.num_segments
    values = {}
    for n in unique_nodes(f):
        if isinstance(n, (Atom, NegAtom)):
            row = atom_robustness(literal_truth(n, labels), times, side)
        elif isinstance(n, And):
            row = [min(values[c][i] for c in n.children) for i in range(S)]
        elif isinstance(n, Or):
            row = [max(values[c][i] for c in n.children) for i in range(S)]
        elif isinstance(n, Always):
            th = values[n.child]
            row = [_inf(th[j] for j in always_window(times, i, n.interval)) for i in range(S)]
        elif isinstance(n, Eventually):
            th = values[n.child]
            row = [_sup(th[j] for j in eventually_window(times, i, n.interval))
                   if _side_ok(times, i, n.interval) else -INF for i in range(S)]
        elif isinstance(n, Until):
            th1, th2 = values[n.left], values[n.right]
            row = []
            for i in range(S):
                if not _side_ok(times, i, n.interval):
                    row.append(-INF)
                    continue
                hold = until_hold_window(times, i, n.interval)
                best = -INF
                for j in eventually_window(times, i, n.interval):
                    held = _inf(th1[l] for l in range(hold.start, min(hold.stop, j + 1)))
                    best = max(best, min(th2[j], held))
                row.append(best)
        else:
            raise TypeError(f"unknown node {n!r}")
        values[n] = row
    return RobustnessMatrix(f, side, values)


def naive_oracle(f: Formula, traj: PwlTrajectory, regions: Mapping[str, ConvexRegion],
                 eps: float = DEFAULT_EPS, side: str = RIGHT) -> RobustnessMatrix:
    """Unoptimized reference for :func:`eval_time_robustness`.

    Every entry is recomputed recursively from scratch: run lengths by direct
    search over ``k``, index sets by testing every segment pair.
    """
    require_resolved(f)
    times = traj.times
    S = traj.num_segments
    segs = traj.segments()
    for n in walk(f):
        if isinstance(n, (Atom, NegAtom)) and n.name not in regions:
            raise UnboundAtom(n.name)

    def z_lit(n, i):
        lab = segment_label(regions[n.name], segs[i], eps)
        return lab is (Label.INSIDE if isinstance(n, Atom) else Label.OUTSIDE)

    def intersects(j, lo, hi):
        return max(times[j], lo) <= min(times[j + 1], hi)

    def rob(n, i):
        if isinstance(n, (Atom, NegAtom)):
            zi = z_lit(n, i)
            if side == RIGHT:
                k = 0
                while i + k + 1 <= S - 1 and all(z_lit(n, q) == zi for q in range(i + 1, i + k + 2)):
                    k += 1
                return sgn(zi) * sum((times[j + 1] - times[j] for j in range(i + 1, i + k + 1)), Fraction(0))
            k = 0
            while i - k - 1 >= 0 and all(z_lit(n, q) == zi for q in range(i - k - 1, i)):
                k += 1
            return sgn(zi) * sum((times[j + 1] - times[j] for j in range(i - k, i)), Fraction(0))
        if isinstance(n, And):
            return min(rob(c, i) for c in n.children)
        if isinstance(n, Or):
            return max(rob(c, i) for c in n.children)
        a, b = n.interval.a, n.interval.b
        if isinstance(n, Always):
            js = [j for j in range(S) if intersects(j, times[i] + a, times[i + 1] + b)]
            return min((rob(n.child, j) for j in js), default=INF)
        if times[i + 1] - times[i] > b - a:
            return -INF
        js = [j for j in range(S) if intersects(j, times[i + 1] + a, times[i] + b)]
        if isinstance(n, Eventually):
            return max((rob(n.child, j) for j in js), default=-INF)
        best = -INF
        for j in js:
            ls = [l for l in range(j + 1) if intersects(l, times[i], times[i + 1] + b)]
            inner = min((rob(n.left, l) for l in ls), default=INF)
            best = max(best, min(rob(n.right, j), inner))
        return best

    values = {n: [rob(n, i) for i in range(S)] for n in unique_nodes(f)}
    return RobustnessMatrix(f, side, values)


# --------------------------------------------------------------------------
# soundness

@dataclass
class SoundnessReport:
    consistent: bool
    witnesses: list

    def __bool__(self):
        return self.consistent


def check_soundness(f: Formula, traj: PwlTrajectory, regions: Mapping[str, ConvexRegion],
                    eps: float = DEFAULT_EPS, sides=SIDES) -> SoundnessReport:
    """Check that positive robustness implies satisfaction and negative implies violation.

    Zero is inconclusive and skipped. Infinite values take part in the check:
    ``+inf`` only arises from an empty always-window (vacuously satisfied) and
    ``-inf`` only from an empty or inadmissible eventually/until window
    (violated). Returns every counterexample found, first one first.
    """
    sat = eval_qualitative(f, traj, regions, eps)
    witnesses = []
    for side in sides:
        rob = eval_time_robustness(f, traj, regions, eps, side)
        for n in rob.nodes:
            for i, (th, z) in enumerate(zip(rob[n], sat[n])):
                if (th > 0 and not z) or (th < 0 and z):
                    witnesses.append({"formula": format_formula(n), "segment": i,
                                      "side": side, "theta": th, "sat": z})
    return SoundnessReport(not witnesses, witnesses)


# --------------------------------------------------------------------------
# reporting

def robustness_to_json(x: Robustness):
    if x == INF:
        return "+inf"
    if x == -INF:
        return "-inf"
    return float(x)


def monitor_report(f: Formula, traj: PwlTrajectory, regions: Mapping[str, ConvexRegion],
                   eps: float = DEFAULT_EPS, full: bool = False) -> dict:
    """JSON-ready summary: per subformula, satisfaction and both robustness sides."""
    sat = eval_qualitative(f, traj, regions, eps)
    right = eval_time_robustness(f, traj, regions, eps, RIGHT)
    left = eval_time_robustness(f, traj, regions, eps, LEFT)
    entries = []
    for n in reversed(sat.nodes):
        segs = range(traj.num_segments) if full else range(1)
        rows = [{"segment": i, "sat": sat[n][i],
                 "theta_right": robustness_to_json(right[n][i]),
                 "theta_left": robustness_to_json(left[n][i])} for i in segs]
        entries.append({"formula": format_formula(n), "segments": rows})
    return {
        "formula": format_formula(f),
        "sat": sat.root[0],
        "theta_right": robustness_to_json(right.root[0]),
        "theta_left": robustness_to_json(left.root[0]),
        "subformulas": entries,
    }


__all__ = [
    "RIGHT", "LEFT", "SIDES", "INF", "SatMatrix", "RobustnessMatrix", "SoundnessReport",
    "atom_labels", "atom_robustness", "eval_qualitative", "eval_time_robustness",
    "naive_oracle", "check_soundness", "monitor_report", "unique_nodes", "subformulas",
]
