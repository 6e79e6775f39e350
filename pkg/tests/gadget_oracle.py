"""Exhaustive checker for single-output big-M gadgets.

All inputs are pinned; the gadget's own binaries are enumerated; for each
assignment the feasible interval of the one free continuous output is read
off the rows directly (no LP involved).
"""

from __future__ import annotations

import itertools
import math
import random

from trstl import milp_ir as ir
from trstl.milp_ir import EQ, GE, LE, MilpModel

ROW_TOL = 1e-9


def free_interval(model: MilpModel, values: dict, free):
    """Feasible ``[lo, hi]`` of variable ``free`` given all other values, or None."""
    lo, hi = free.lo, free.hi
    for con in model.constraints:
        c = con.expr.terms.get(free.id, 0.0)
        rest = sum(v * values[k] for k, v in con.expr.terms.items() if k != free.id)
        rhs = con.rhs - rest
        if c == 0:
            ok = {LE: rest <= con.rhs + ROW_TOL, GE: rest >= con.rhs - ROW_TOL,
                  EQ: abs(rest - con.rhs) <= ROW_TOL}[con.sense]
            if not ok:
                return None
            continue
        bound = rhs / c
        if con.sense == EQ:
            lo, hi = max(lo, bound), min(hi, bound)
        elif (con.sense == LE) == (c > 0):
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    if lo > hi + ROW_TOL:
        return None
    return lo, hi


def rows_ok(model: MilpModel, values: dict) -> bool:
    for con in model.constraints:
        act = sum(v * values[k] for k, v in con.expr.terms.items())
        if con.sense == LE and act > con.rhs + ROW_TOL:
            return False
        if con.sense == GE and act < con.rhs - ROW_TOL:
            return False
        if con.sense == EQ and abs(act - con.rhs) > ROW_TOL:
            return False
    return True


def binary_assignments(model, ids):
    for bits in itertools.product((0.0, 1.0), repeat=len(ids)):
        yield dict(zip(ids, bits))


def check_indicator(model, out_id, pinned, expected_out):
    """Binary-output gadget: feasible assignments must all put ``expected_out`` on ``out_id``."""
    free = [v.id for v in model.vars if v.is_binary and v.id not in pinned]
    feasible = []
    for asg in binary_assignments(model, free):
        vals = {**pinned, **asg}
        if rows_ok(model, vals):
            feasible.append(vals[out_id])
    if not feasible:
        return math.inf
    return max(abs(v - expected_out) for v in feasible)


def check_continuous(model, out, pinned, expected):
    """Continuous-output gadget: max distance of any feasible output from ``expected``."""
    free = [v.id for v in model.vars if v.is_binary and v.id not in pinned]
    dev, seen = 0.0, False
    for asg in binary_assignments(model, free):
        vals = {**pinned, **asg, out.id: 0.0}
        iv = free_interval(model, vals, out)
        if iv is None:
            continue
        seen = True
        dev = max(dev, abs(iv[0] - expected), abs(iv[1] - expected))
    return dev if seen else math.inf


def _model(M=100.0):
    return MilpModel(big_m=M, m_eps=1e-6, eps_t=1e-3)


def _pin(model, name, value, lo, hi):
    v = model.add_continuous(name, lo, hi)
    return v, value


# one trial per call; each returns the deviation (0 means exact)

def trial_predicate(rng: random.Random, M=100.0):
    m = _model(M)
    x, xv = _pin(m, "x", rng.uniform(-M / 2, M / 2), -M / 2, M / 2)
    b = ir.enc_linear_predicate(m, 0.5 * x.expr() - 1.0)
    mu = 0.5 * xv - 1.0
    if abs(mu) < 1e-6:          # inside the strictness band, either verdict is legal
        return 0.0
    return check_indicator(m, b.id, {x.id: xv}, 1.0 if mu >= 0 else 0.0)


def _bool_gadget(rng, enc, fn):
    m = _model()
    n = rng.randint(1, 5)
    ins = [m.add_binary(f"i{k}") for k in range(n)]
    # enumerate the inputs too: every (inputs, output) pair is checked
    worst = 0.0
    out = enc(m, ins)
    for bits in itertools.product((0.0, 1.0), repeat=n):
        pinned = {v.id: b for v, b in zip(ins, bits)}
        worst = max(worst, check_indicator(m, out.id, pinned, float(fn(bits))))
    return worst


def trial_and(rng):
    return _bool_gadget(rng, ir.enc_and, all)


def trial_or(rng):
    return _bool_gadget(rng, ir.enc_or, any)


def _extremum(rng, enc, fn, M=100.0):
    m = _model(M)
    n = rng.randint(1, 5)
    vals = [rng.uniform(-M / 2, M / 2) for _ in range(n)]
    if rng.random() < 0.2 and n > 1:
        vals[1] = vals[0]                       # ties
    xs = [m.add_continuous(f"x{k}", -M / 2, M / 2) for k in range(n)]
    th = enc(m, xs)
    return check_continuous(m, th, {x.id: v for x, v in zip(xs, vals)}, fn(vals))


def trial_min(rng):
    return _extremum(rng, ir.enc_min, min)


def trial_max(rng):
    return _extremum(rng, ir.enc_max, max)


def trial_product(rng, M=100.0):
    m = _model(M)
    x = m.add_continuous("x", -M / 2, M / 2)
    b = m.add_binary("b")
    y = ir.enc_product(m, x, b)
    xv = rng.uniform(-M / 2, M / 2)
    worst = 0.0
    for bv in (0.0, 1.0):
        worst = max(worst, check_continuous(m, y, {x.id: xv, b.id: bv}, xv * bv))
    return worst


GADGETS = {"predicate": trial_predicate, "and": trial_and, "or": trial_or,
           "min": trial_min, "max": trial_max, "product": trial_product}
