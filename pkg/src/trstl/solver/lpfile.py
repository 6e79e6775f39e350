"""CPLEX LP-format export and plain ``name value`` solution files.

Exported files are byte-deterministic: variables and rows appear in id
order and numbers use the shortest round-trip representation.
"""

from __future__ import annotations

import math
import re

import numpy as np

from ..errors import MalformedLine, UnknownVariableName
from ..milp_ir import BINARY, EQ, FEASIBLE, GE, INFEASIBLE, LE, MilpModel, MilpSolution

_BAD = re.compile(r"[^A-Za-z0-9_]")
_WRAP = 6  # terms per line
_SENSE = {LE: "<=", GE: ">=", EQ: "="}
VERIFY_TOL = 1e-7


def lp_names(model: MilpModel) -> list[str]:
    """LP-safe, unique column names in variable-id order.

    Characters outside ``[A-Za-z0-9_]`` become ``_``; names that an LP reader
    could mistake for a number (leading digit, or a leading ``e``/``E``) get a
    ``v_`` prefix; remaining clashes get the variable id appended.
    """
    out, seen = [], set()
    for v in model.vars:
        name = _BAD.sub("_", v.name) or "v"
        if name[0].isdigit() or name[0] in "eE":
            name = "v_" + name
        if name in seen:
            name = f"{name}_{v.id}"
        while name in seen:
            name += "_"
        seen.add(name)
        out.append(name)
    return out


def _num(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _terms(coefs, names) -> list[str]:
    parts = []
    for k in sorted(coefs):
        c = coefs[k]
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = names[k] if mag == 1 else f"{_num(mag)} {names[k]}"
        parts.append(f"{sign} {body}")
    if parts and parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return parts


def _wrap(prefix: str, parts: list[str]) -> list[str]:
    lines = []
    for k in range(0, len(parts), _WRAP):
        chunk = " ".join(parts[k:k + _WRAP])
        lines.append((prefix if k == 0 else "   ") + chunk)
    return lines


def export_lp(model: MilpModel) -> str:
    """Model as CPLEX LP text (Maximize / Subject To / Bounds / Binaries / End)."""
    names = lp_names(model)
    lines = [f"\\ {model.name}: {model.num_vars} columns, {model.num_constraints} rows",
             "Maximize"]
    obj = _terms(model.objective.terms, names)
    if model.objective.const:
        c = model.objective.const
        obj.append(f"{'-' if c < 0 else '+'} {_num(abs(c))}")
    zero = [f"0 {names[0]}"] if names else ["0"]
    lines += _wrap(" obj: ", obj or zero)
    lines.append("Subject To")
    for r, con in enumerate(model.constraints):
        body = _terms(con.expr.terms, names) or zero
        rows = _wrap(f" R{r}: ", body)
        rows[-1] += f" {_SENSE[con.sense]} {_num(con.rhs)}"
        lines += rows
    lines.append("Bounds")
    for v, name in zip(model.vars, names):
        if v.kind == BINARY and v.lo == 0 and v.hi == 1:
            continue
        lo, hi = v.lo, v.hi
        if lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            lines.append(f" {name} free")
        elif math.isinf(lo):
            lines.append(f" -inf <= {name} <= {_num(hi)}")
        elif math.isinf(hi):
            lines.append(f" {name} >= {_num(lo)}")
        else:
            lines.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    bins = [n for v, n in zip(model.vars, names) if v.kind == BINARY]
    if bins:
        lines.append("Binaries")
        for k in range(0, len(bins), _WRAP * 2):
            lines.append(" " + " ".join(bins[k:k + _WRAP * 2]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_solution(model: MilpModel, sol: MilpSolution) -> str:
    """``name value`` lines for every variable, in id order."""
    if sol.x is None:
        raise ValueError(f"no assignment to write (status {sol.status})")
    names = lp_names(model)
    out = [f"# objective {_num(sol.objective_value)}"]
    out += [f"{n} {repr(float(sol.x[v.id]))}" for v, n in zip(model.vars, names)]
    return "\n".join(out) + "\n"


def import_solution(model: MilpModel, text: str) -> MilpSolution:
    """Read an external solver's assignment and check it against ``model``.

    Missing variables default to 0 (each listed in ``warnings``). The
    objective is always recomputed. The status is Feasible when every row
    holds within 1e-7, otherwise Infeasible with the violated rows as warnings.
    """
    index = {n: k for k, n in enumerate(lp_names(model))}
    x = np.zeros(model.num_vars)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MalformedLine(lineno, raw)
        name, val = parts
        try:
            value = float(val)
        except ValueError:
            raise MalformedLine(lineno, raw) from None
        if not math.isfinite(value):
            raise MalformedLine(lineno, raw)
        if name not in index:
            raise UnknownVariableName(name)
        x[index[name]] = value
        seen.add(name)
    warnings = [f"variable {n} missing from solution, set to 0" for n in index if n not in seen]
    bad = model.violations(x, VERIFY_TOL)
    warnings += bad
    status = INFEASIBLE if bad else FEASIBLE
    return MilpSolution(status, x, model.objective_value(x), math.nan, 0, warnings)
