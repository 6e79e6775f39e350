"""JSON mission and trajectory files.

Mission schema (version 1)::

    {"schema": 1, "name": "toy",
     "workspace": {"lower": [x, y], "upper": [x, y]},
     "horizon": 10,
     "regions": [{"name": "R", "kind": "reach", "box": [[x0, y0], [x1, y1]]},
                 {"name": "A", "kind": "avoid", "vertices": [[x, y], ...]},
                 {"name": "B", "halfspaces": {"A": [[a, b], ...], "h": [c, ...]}}],
     "formula": "F[0,10] G[0,2] R",
     "K": 6, "v_b": 1, "theta_star": 0.5, "lambda": 1,
     "epsilon": 0.1, "eps_t": 0.001,
     "start": [x, y], "goal": [x, y],
     "objective": "l1_path", "side": "right", "encoding": "exact"}

``start``, ``goal``, ``kind`` and every scalar after ``K`` are optional.
Trajectory files are ``{"waypoints": [{"t": 0, "p": [x, y]}, ...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from .encoder import EXACT, L1_PATH, MAKESPAN_ONLY, MONOTONE, SynthesisProblem
from .errors import MissionError, TrstlError
from .geometry import ConvexRegion, PwlTrajectory, Workspace, box_region, region_from_vertices
from .monitor import LEFT, RIGHT
from .stl_ast import NegAtom, atom_names, parse_formula, walk

SCHEMA_VERSION = 1
REACH, AVOID = "reach", "avoid"
_REQUIRED = ("workspace", "horizon", "regions", "formula", "K")
_OPTIONAL = {"v_b": 1.0, "theta_star": 0.5, "lambda": 1.0, "epsilon": 0.1, "eps_t": 1e-3,
             "start": None, "goal": None, "objective": L1_PATH, "side": RIGHT, "encoding": None}


@dataclass
class Mission:
    name: str
    workspace: dict
    horizon: float
    regions: list
    formula: str
    K: int
    v_b: float = 1.0
    theta_star: float = 0.5
    lam: float = 1.0
    epsilon: float = 0.1
    eps_t: float = 1e-3
    start: Optional[list] = None
    goal: Optional[list] = None
    objective: str = L1_PATH
    side: str = RIGHT
    encoding: Optional[str] = None   # None: the caller picks
    _parsed: dict = field(default_factory=dict, repr=False, compare=False)

    # -- derived objects ---------------------------------------------------
    def region_objects(self) -> dict[str, ConvexRegion]:
        if "regions" not in self._parsed:
            self._parsed["regions"] = {r["name"]: _region(r) for r in self.regions}
        return self._parsed["regions"]

    def formula_ast(self):
        if "formula" not in self._parsed:
            self._parsed["formula"] = parse_formula(self.formula)
        return self._parsed["formula"]

    def workspace_obj(self) -> Workspace:
        return Workspace(self.workspace["lower"], self.workspace["upper"], self.horizon, self.epsilon)

    def region_kind(self, name: str) -> str:
        """Declared kind, else avoid when the atom only appears negated."""
        for r in self.regions:
            if r["name"] == name and r.get("kind"):
                return r["kind"]
        nodes = [n for n in walk(self.formula_ast()) if getattr(n, "name", None) == name]
        if nodes and all(isinstance(n, NegAtom) for n in nodes):
            return AVOID
        return REACH

    def problem(self, default_encoding: str = EXACT, **overrides) -> SynthesisProblem:
        kw = dict(formula=self.formula_ast(), regions=self.region_objects(), K=self.K,
                  workspace=self.workspace_obj(), v_b=self.v_b, theta_star=self.theta_star,
                  lam=self.lam, objective=self.objective, start=self.start, goal=self.goal,
                  side=self.side, eps_t=self.eps_t, encoding=self.encoding or default_encoding)
        kw.update(overrides)
        return SynthesisProblem(**kw)

    def with_(self, **changes) -> "Mission":
        return replace(self, _parsed={}, **changes)

    def to_dict(self) -> dict:
        out = {"schema": SCHEMA_VERSION, "name": self.name, "workspace": self.workspace,
               "horizon": self.horizon, "regions": self.regions, "formula": self.formula,
               "K": self.K, "v_b": self.v_b, "theta_star": self.theta_star, "lambda": self.lam,
               "epsilon": self.epsilon, "eps_t": self.eps_t, "objective": self.objective,
               "side": self.side}
        if self.encoding is not None:
            out["encoding"] = self.encoding
        if self.start is not None:
            out["start"] = self.start
        if self.goal is not None:
            out["goal"] = self.goal
        return out


def _region(r: dict) -> ConvexRegion:
    if "box" in r:
        lo, hi = r["box"]
        return box_region(r["name"], lo, hi)
    if "halfspaces" in r:
        return ConvexRegion(r["name"], r["halfspaces"]["A"], r["halfspaces"]["h"])
    return region_from_vertices(r["name"], r["vertices"])


def _number(d, key, positive=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MissionError(f"{key} must be a number")
    if positive and not v > 0:
        raise MissionError(f"{key} must be positive")
    return v


def _point(d, key, dim):
    v = d.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or len(v) != dim or not all(isinstance(c, (int, float)) for c in v):
        raise MissionError(f"{key} must be a list of {dim} numbers")
    return v


def mission_from_dict(d: dict) -> Mission:
    """Validate a parsed mission document; raises MissionError on schema problems."""
    if not isinstance(d, dict):
        raise MissionError("mission must be a JSON object")
    if d.get("schema") != SCHEMA_VERSION:
        raise MissionError(f"unsupported schema {d.get('schema')!r} (expected {SCHEMA_VERSION})")
    missing = [k for k in _REQUIRED if k not in d]
    if missing:
        raise MissionError(f"missing field(s): {', '.join(missing)}")
    known = set(_REQUIRED) | set(_OPTIONAL) | {"schema", "name"}
    extra = sorted(set(d) - known)
    if extra:
        raise MissionError(f"unknown field(s): {', '.join(extra)}")
    ws = d["workspace"]
    if not isinstance(ws, dict) or set(ws) != {"lower", "upper"}:
        raise MissionError("workspace must have exactly 'lower' and 'upper'")
    dim = len(ws["lower"]) if isinstance(ws["lower"], list) else -1
    for key in ("lower", "upper"):
        _point(ws, key, dim)
    if not isinstance(d["K"], int) or isinstance(d["K"], bool):
        raise MissionError("K must be an integer")
    vals = {k: d.get(k, v) for k, v in _OPTIONAL.items()}
    for key in ("v_b", "theta_star", "lambda"):
        _number(vals, key, positive=True)
    for key in ("epsilon", "eps_t"):
        _number(vals, key)
    if not isinstance(d["regions"], list):
        raise MissionError("regions must be a list")
    names = set()
    for r in d["regions"]:
        if not isinstance(r, dict) or not isinstance(r.get("name"), str) or not r["name"]:
            raise MissionError("each region needs a nonempty name")
        if sum(k in r for k in ("box", "vertices", "halfspaces")) != 1:
            raise MissionError(f"region {r['name']}: give exactly one of 'box', 'vertices', 'halfspaces'")
        if r.get("kind", REACH) not in (REACH, AVOID):
            raise MissionError(f"region {r['name']}: kind must be 'reach' or 'avoid'")
        if r["name"] in names:
            raise MissionError(f"duplicate region {r['name']}")
        names.add(r["name"])
    if vals["encoding"] not in (None, EXACT, MONOTONE):
        raise MissionError("encoding must be 'exact' or 'monotone'")
    if vals["objective"] not in (L1_PATH, MAKESPAN_ONLY):
        raise MissionError("objective must be 'l1_path' or 'none'")
    if vals["side"] not in (RIGHT, LEFT):
        raise MissionError("side must be 'right' or 'left'")
    if not isinstance(d["formula"], str):
        raise MissionError("formula must be a string")
    m = Mission(name=str(d.get("name", "mission")), workspace=ws, horizon=_number(d, "horizon", True),
                regions=d["regions"], formula=d["formula"], K=d["K"], v_b=vals["v_b"],
                theta_star=vals["theta_star"], lam=vals["lambda"], epsilon=vals["epsilon"],
                eps_t=vals["eps_t"], start=_point(vals, "start", dim), goal=_point(vals, "goal", dim),
                objective=vals["objective"], side=vals["side"], encoding=vals["encoding"])
    try:
        f = m.formula_ast()
        m.region_objects()
        m.workspace_obj()
    except TrstlError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise MissionError(str(e)) from None
    unknown = sorted(atom_names(f) - names)
    if unknown:
        raise MissionError(f"formula uses undeclared region(s): {', '.join(unknown)}")
    return m


def load_mission(path) -> Mission:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise MissionError(f"{path}: invalid JSON ({e})") from None
    return mission_from_dict(d)


def trajectory_from_dict(d: dict) -> PwlTrajectory:
    try:
        wps = d["waypoints"]
        return PwlTrajectory.from_arrays([w["t"] for w in wps], [w["p"] for w in wps])
    except (KeyError, TypeError, ValueError) as e:
        raise MissionError(f"bad trajectory: {e}") from None


def load_trajectory(path) -> PwlTrajectory:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise MissionError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(d, dict):
        raise MissionError("trajectory must be a JSON object")
    return trajectory_from_dict(d)


def trajectory_to_dict(traj: PwlTrajectory) -> dict:
    return {"waypoints": [{"t": float(w.t), "p": list(w.p)} for w in traj.waypoints]}
