"""Time-robust STL monitoring and MILP synthesis for piecewise-linear trajectories."""

from .errors import *  # noqa: F401,F403
from .geometry import (ConvexRegion, Label, PwlTrajectory, Waypoint, Workspace, box_region,
                       region_from_vertices, segment_label)
from .stl_ast import (Always, And, Atom, Eventually, Formula, Interval, NegAtom, Or, Until,
                      analyze, format_formula, parse_formula)

__version__ = "0.1.0"
