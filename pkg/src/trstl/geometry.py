"""Convex regions, PWL trajectories and the segment-level atomic predicates.

A segment is *inside* a region when both endpoints keep a signed distance of
at least ``eps`` from every edge (by convexity the whole segment then lies in
the shrunk polygon). It is *outside* when a single edge has both endpoints at
least ``eps`` beyond it. The two tests are conservative and not complements:
a segment crossing the region satisfies neither.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateRegion, OutOfHorizon
from .stl_ast import to_fraction

DEFAULT_EPS = 0.1


@dataclass(frozen=True, eq=False)
class ConvexRegion:
    """Polygon ``{p : A p <= h}``. Rows of ``A`` are kept unnormalized."""

    name: str
    A: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        h = np.array(self.h, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != h.shape[0]:
            raise ValueError(f"region {self.name}: A must be r x d with len(h) == r")
        if np.any(np.linalg.norm(A, axis=1) == 0):
            raise ValueError(f"region {self.name}: zero row in A")
        if A.shape[1] == 2 and A.shape[0] < 3:
            raise DegenerateRegion(f"region {self.name}: a bounded polygon needs >= 3 edges")
        A.setflags(write=False)
        h.setflags(write=False)
        norms = np.linalg.norm(A, axis=1)
        norms.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "_norms", norms)

    @property
    def norms(self) -> np.ndarray:
        return self._norms

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def signed_margin(self, p) -> np.ndarray:
        """Per-edge distance ``(h_j - A_j p) / |A_j|``; positive means inside."""
        return (self.h - self.A @ np.asarray(p, dtype=float)) / self.norms

    def contains(self, p, eps: float = 0.0) -> bool:
        return bool(np.all(self.signed_margin(p) >= eps))

    def vertices(self) -> np.ndarray:
        """Polygon corners in counter-clockwise order (2-D only)."""
        if self.dim != 2:
            raise ValueError("vertices() is only available for planar regions")
        pts = []
        r = len(self.h)
        for i in range(r):
            for j in range(i + 1, r):
                M = self.A[[i, j]]
                if abs(np.linalg.det(M)) < 1e-12:
                    continue
                p = np.linalg.solve(M, self.h[[i, j]])
                if np.all(self.A @ p <= self.h + 1e-9):
                    pts.append(p)
        hull = _convex_hull([tuple(p) for p in pts])
        return np.array(hull)

    def __eq__(self, other):
        return (isinstance(other, ConvexRegion) and self.name == other.name
                and np.array_equal(self.A, other.A) and np.array_equal(self.h, other.h))

    def __hash__(self):
        return hash((self.name, self.A.tobytes(), self.h.tobytes()))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _convex_hull(points):
    # Andrew's monotone chain, CCW, collinear points dropped
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def region_from_vertices(name: str, vertices: Sequence[Sequence[float]]) -> ConvexRegion:
    """Half-space form of the convex hull of ``vertices`` (planar).

    Each CCW hull edge ``(v, w)`` contributes the outward normal
    ``(w_y - v_y, v_x - w_x)`` and offset ``n . v``.
    """
    pts = [tuple(float(c) for c in v) for v in vertices]
    if len(pts) < 3 or any(len(p) != 2 for p in pts):
        raise DegenerateRegion(f"region {name}: need at least three 2-D vertices")
    hull = _convex_hull(pts)
    area = 0.5 * sum(hull[k][0] * hull[(k + 1) % len(hull)][1]
                     - hull[(k + 1) % len(hull)][0] * hull[k][1] for k in range(len(hull)))
    if len(hull) < 3 or area <= 1e-12:
        raise DegenerateRegion(f"region {name}: vertices span zero area")
    A, h = [], []
    for k, v in enumerate(hull):
        w = hull[(k + 1) % len(hull)]
        n = (w[1] - v[1], v[0] - w[0])
        A.append(n)
        h.append(n[0] * v[0] + n[1] * v[1])
    return ConvexRegion(name, np.array(A), np.array(h))


def box_region(name: str, lower, upper) -> ConvexRegion:
    (x0, y0), (x1, y1) = lower, upper
    return region_from_vertices(name, [(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


@dataclass(frozen=True)
class Waypoint:
    t: Fraction
    p: tuple

    def __post_init__(self):
        t = to_fraction(self.t)
        if t < 0:
            raise ValueError(f"negative timestamp {t}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", tuple(float(c) for c in self.p))


@dataclass(frozen=True)
class PwlTrajectory:
    """``K >= 2`` waypoints with nondecreasing timestamps; ``K - 1`` segments.

    Timestamps are held as exact rationals so that interval tests in the
    monitor are decided without rounding.
    """

    waypoints: tuple

    def __post_init__(self):
        wps = tuple(w if isinstance(w, Waypoint) else Waypoint(*w) for w in self.waypoints)
        if len(wps) < 2:
            raise ValueError("a trajectory needs at least two waypoints")
        for w0, w1 in zip(wps, wps[1:]):
            if w1.t < w0.t:
                raise ValueError(f"timestamps must be nondecreasing ({w0.t} > {w1.t})")
            if len(w1.p) != len(w0.p):
                raise ValueError("waypoints have mixed dimensions")
        object.__setattr__(self, "waypoints", wps)

    @classmethod
    def from_arrays(cls, times, points) -> "PwlTrajectory":
        return cls(tuple(Waypoint(t, p) for t, p in zip(times, points)))

    @property
    def K(self) -> int:
        return len(self.waypoints)

    @property
    def num_segments(self) -> int:
        return len(self.waypoints) - 1

    @property
    def times(self) -> list[Fraction]:
        return [w.t for w in self.waypoints]

    @property
    def points(self) -> np.ndarray:
        return np.array([w.p for w in self.waypoints])

    def segment(self, i: int) -> tuple[Waypoint, Waypoint]:
        return self.waypoints[i], self.waypoints[i + 1]

    def segments(self):
        return [self.segment(i) for i in range(self.num_segments)]


@dataclass(frozen=True)
class Workspace:
    lower: tuple
    upper: tuple
    horizon: float
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("workspace needs lower < upper componentwise")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))


def eval_at(traj: PwlTrajectory, t) -> np.ndarray:
    """Position at time ``t`` by linear interpolation inside its segment."""
    t = to_fraction(t)
    times = traj.times
    if t < times[0] or t > times[-1]:
        raise OutOfHorizon(f"t={t} outside [{times[0]}, {times[-1]}]")
    for i in range(traj.num_segments):
        w0, w1 = traj.segment(i)
        if w0.t <= t <= w1.t:
            if t == w0.t or w1.t == w0.t:
                return np.array(w0.p)
            if t == w1.t:
                return np.array(w1.p)
            s = float((t - w0.t) / (w1.t - w0.t))
            return np.array(w0.p) + s * (np.array(w1.p) - np.array(w0.p))
    raise AssertionError("unreachable")  # pragma: no cover


def _endpoints(seg):
    w0, w1 = seg
    p0 = w0.p if isinstance(w0, Waypoint) else w0
    p1 = w1.p if isinstance(w1, Waypoint) else w1
    return np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)


def segment_inside(region: ConvexRegion, seg, eps: float = DEFAULT_EPS) -> bool:
    """Both endpoints at least ``eps`` inside every edge."""
    p0, p1 = _endpoints(seg)
    return bool(np.all(region.signed_margin(p0) >= eps) and np.all(region.signed_margin(p1) >= eps))


def segment_outside(region: ConvexRegion, seg, eps: float = DEFAULT_EPS) -> bool:
    """Some single edge has both endpoints at least ``eps`` beyond it."""
    p0, p1 = _endpoints(seg)
    out0 = -region.signed_margin(p0) >= eps
    out1 = -region.signed_margin(p1) >= eps
    return bool(np.any(out0 & out1))


class Label(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    NEITHER = "neither"


def segment_label(region: ConvexRegion, seg, eps: float = DEFAULT_EPS) -> Label:
    p0, p1 = _endpoints(seg)
    m0, m1 = region.signed_margin(p0), region.signed_margin(p1)
    if (m0 >= eps).all() and (m1 >= eps).all():
        return Label.INSIDE
    if ((m0 <= -eps) & (m1 <= -eps)).any():
        return Label.OUTSIDE
    return Label.NEITHER
