import math
import random

import numpy as np
import pytest

from trstl import milp_ir as ir
from trstl.errors import BigMTooSmall, ModelError
from trstl.milp_ir import GE, LE, LinExpr, MilpModel

import gadget_oracle as G


def model(M=100.0):
    return MilpModel(big_m=M, m_eps=1e-6, eps_t=1e-3)


@pytest.mark.parametrize("mu,expected", [(3.0, 1.0), (-3.0, 0.0), (0.0, 1.0)])
def test_predicate_sign(mu, expected):
    m = model()
    x = m.add_continuous("x", -10, 10)
    b = ir.enc_linear_predicate(m, x)
    assert G.check_indicator(m, b.id, {x.id: mu}, expected) == 0.0


def test_predicate_needs_enough_m():
    m = model(M=5.0)
    x = m.add_continuous("x", -10, 10)
    with pytest.raises(BigMTooSmall):
        ir.enc_linear_predicate(m, x)


def test_and_or_truth_tables():
    for n in (1, 2, 3, 4):
        assert G._bool_gadget(random.Random(n), ir.enc_and, all) == 0.0
        assert G._bool_gadget(random.Random(n), ir.enc_or, any) == 0.0


@pytest.mark.parametrize("vals,enc,expected", [
    ([3, 1, 2], ir.enc_min, 1), ([5], ir.enc_min, 5), ([2, 2], ir.enc_min, 2),
    ([3, 1, 2], ir.enc_max, 3), ([5], ir.enc_max, 5), ([2, 2], ir.enc_max, 2),
])
def test_extremum_examples(vals, enc, expected):
    m = model()
    xs = [m.add_continuous(f"x{k}", -10, 10) for k in range(len(vals))]
    th = enc(m, xs)
    assert G.check_continuous(m, th, {x.id: v for x, v in zip(xs, vals)}, expected) == 0.0


def test_tie_admits_either_selector():
    m = model()
    xs = [m.add_continuous(f"x{k}", -10, 10) for k in range(2)]
    th = ir.enc_min(m, xs)
    sels = [v for v in m.vars if v.is_binary]
    for pick in (0, 1):
        vals = {xs[0].id: 2.0, xs[1].id: 2.0, th.id: 2.0}
        vals.update({s.id: float(k == pick) for k, s in enumerate(sels)})
        assert G.rows_ok(m, vals)


@pytest.mark.parametrize("x,b", [(7.5, 0), (7.5, 1), (-3.2, 0), (-3.2, 1)])
def test_product_examples(x, b):
    m = model()
    xv = m.add_continuous("x", -10, 10)
    bv = m.add_binary("b")
    y = ir.enc_product(m, xv, bv)
    assert G.check_continuous(m, y, {xv.id: x, bv.id: float(b)}, x * b) <= 1e-9


def test_upper_only_product_is_an_upper_bound():
    m = model()
    xv = m.add_continuous("x", -10, 10)
    bv = m.add_binary("b")
    y = ir.enc_product(m, xv, bv, upper_only=True)
    for x in (-3.0, 4.0):
        for b in (0.0, 1.0):
            lo, hi = G.free_interval(m, {xv.id: x, bv.id: b, y.id: 0.0}, y)
            assert hi == pytest.approx(x * b, abs=1e-12)


def test_oracle_catches_a_broken_min():
    m = model()
    xs = [m.add_continuous(f"x{k}", -10, 10) for k in range(2)]
    th, sel = ir._extremum(m, xs, "th", "eq:inf_sup", True)
    # drop the rows that pull theta up to the selected operand
    m.constraints = [c for c in m.constraints if c.sense != GE]
    assert G.check_continuous(m, th, {xs[0].id: 1.0, xs[1].id: 4.0}, 1.0) > 0.5


def test_gadget_properties_quick():
    rng = random.Random(11)
    for name, trial in G.GADGETS.items():
        assert max(trial(rng) for _ in range(40)) <= 1e-9, name


def test_tags_and_wellformedness():
    m = model()
    x = m.add_continuous("x", -1, 1)
    with pytest.raises(ModelError):
        m.add_constraint(x, LE, 1.0, "")
    big = model()
    big.add_continuous("a", 0, 1)
    stray = big.add_continuous("b", 0, 1)        # id 1 does not exist in m
    with pytest.raises(ModelError):
        m.add_constraint(stray, LE, 1.0, "t")
    with pytest.raises(ModelError):
        m.add_constraint(x, "<", 1.0, "t")


def test_bounds_interval_arithmetic():
    m = model()
    x = m.add_continuous("x", -1, 2)
    y = m.add_continuous("y", 0, 3)
    assert m.bounds(2 * x - y + 1) == (-4.0, 5.0)


def test_linexpr_drops_zero_coefficients():
    m = model()
    x = m.add_continuous("x", -1, 1)
    e = LinExpr.of(x) - x
    assert not e.terms


def test_violations_report_rows():
    m = model()
    x = m.add_continuous("x", 0, 10)
    m.add_constraint(x, LE, 3, "cap")
    assert m.violations(np.array([5.0]))
    assert not m.violations(np.array([3.0]))


def test_solution_value_requires_assignment():
    sol = ir.MilpSolution("Infeasible")
    with pytest.raises(ValueError):
        sol.value(LinExpr())
    assert math.isnan(sol.objective_value)
