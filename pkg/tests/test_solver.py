import math
import random
from pathlib import Path

import highspy
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trstl.errors import MalformedLine, UnknownVariableName
from trstl.milp_ir import FEASIBLE, INFEASIBLE, LE, OPTIMAL, MilpModel
from trstl.solver import (LpRelaxation, SolverConfig, SolveStats, export_lp, import_solution,
                          lp_names, lp_relax_solve, solve, vertex_enumeration, write_solution)

from solver_oracle import brute_force, dual_enumeration, random_lp, random_milp, verify

FIXTURES = Path(__file__).parent / "fixtures"


def _m():
    return MilpModel(big_m=100.0, m_eps=1e-6, eps_t=1e-3, name="t")


def test_single_continuous():
    m = _m()
    x = m.add_continuous("x", 0, 10)
    m.add_constraint(x, LE, 3, "cap")
    m.set_objective(x)
    sol = solve(m)
    assert sol.status == OPTIMAL and sol.value(x) == pytest.approx(3)


def test_two_binaries():
    m = _m()
    b1, b2 = m.add_binary("b1"), m.add_binary("b2")
    m.add_constraint(b1 + b2, LE, 1, "pick")
    m.set_objective(2 * b1 + b2)
    sol = solve(m)
    assert sol.objective_value == pytest.approx(2)
    assert (sol.value(b1), sol.value(b2)) == (1.0, 0.0)


def _lp(c, A, sense, b, lo, hi):
    f = lambda v: np.array(v, dtype=float)  # noqa: E731
    return LpRelaxation(f(c), f(A), f(sense), f(b), f(lo), f(hi))


def test_lp_examples():
    assert lp_relax_solve(_lp([1, 1], [[1, 1]], [1], [1], [0, 0], [1, 1])).value == pytest.approx(1)
    bad = _lp([1], [[1], [1]], [-1, 1], [2, 1], [-5], [5])
    assert lp_relax_solve(bad).status == INFEASIBLE


def test_simplex_against_dual_breakpoints():
    rng = random.Random(1)
    for _ in range(10):
        lp = random_lp(rng)
        res = lp_relax_solve(lp)
        assert res.status == OPTIMAL
        assert res.value == pytest.approx(dual_enumeration(lp), abs=1e-7)


def test_simplex_against_vertex_enumeration_small():
    rng = random.Random(2)
    for _ in range(20):
        lp = random_lp(rng, n=4, m=2, feasible=rng.random() < 0.8)
        a, b = lp_relax_solve(lp), vertex_enumeration(lp)
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert a.value == pytest.approx(b.value, abs=1e-7)


def test_infeasible_lps():
    rng = random.Random(3)
    for _ in range(5):
        assert lp_relax_solve(random_lp(rng, feasible=False)).status == INFEASIBLE


# -- branch and bound ----------------------------------------------------------

def _value(sol):
    return sol.objective_value if sol.status == OPTIMAL else -math.inf


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_brute_force(seed):
    rng = random.Random(seed)
    m = random_milp(rng, rng.randint(1, 7), rng.randint(0, 3), rng.randint(1, 5))
    sol = solve(m)
    want = brute_force(m)
    got = _value(sol)
    assert (got == want == -math.inf) or got == pytest.approx(want, abs=1e-6)
    if sol.x is not None:
        assert not verify(m, sol.x)


@pytest.mark.parametrize("backend", ["highs", "simplex"])
def test_backends_and_propagation_agree(backend):
    rng = random.Random(4)
    for _ in range(10):
        m = random_milp(rng, 8, 3, 5)
        a = solve(m, SolverConfig(lp_backend=backend))
        b = solve(m, SolverConfig(lp_backend=backend, propagate=False))
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)


def test_deterministic_runs():
    m = random_milp(random.Random(5), 14, 4, 8)
    runs = []
    for _ in range(2):
        st_ = SolveStats()
        sol = solve(m, SolverConfig(), st_)
        runs.append((sol.status, st_.nodes, None if sol.x is None else sol.x.tobytes()))
    assert runs[0] == runs[1]


def test_bound_never_increases():
    rng = random.Random(6)
    for _ in range(10):
        st_ = SolveStats()
        solve(random_milp(rng, 12, 3, 6), SolverConfig(), st_)
        h = st_.bound_history
        assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))


def test_node_limit_reports_partial_status():
    # knapsack whose root relaxation is fractional
    m = _m()
    bs = [m.add_binary(f"b{k}") for k in range(6)]
    m.add_constraint(sum(w * b for w, b in zip((5, 4, 6, 3, 7, 2), bs)), LE, 11.5, "cap")
    m.set_objective(sum(v * b for v, b in zip((9, 7, 10, 5, 11, 3), bs)))
    sol = solve(m, SolverConfig(node_limit=1, propagate=False))
    assert sol.status == "TimedOut" and sol.best_bound > 19
    assert solve(m).status == OPTIMAL


def test_config_validation():
    for bad in (dict(time_limit=0), dict(abs_gap=-1), dict(branching="Random"), dict(lp_backend="x")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


# -- LP files ----------------------------------------------------------------

def _one_var():
    m = MilpModel(big_m=10.0, m_eps=1e-6, eps_t=1e-3, name="one")
    x = m.add_continuous("x", 0, 5)
    m.add_constraint(2 * x, LE, 3, "cap")
    m.set_objective(x)
    return m, x


def test_one_var_golden():
    m, _ = _one_var()
    assert export_lp(m) == (FIXTURES / "one_var.lp").read_text()


def test_export_is_stable():
    m, _ = _one_var()
    assert export_lp(m) == export_lp(m)


def test_names_are_sanitized_and_unique():
    m = _m()
    for name in ("th[1,2]", "th_1_2_", "3x", "e5", "a b"):
        m.add_continuous(name, 0, 1)
    names = lp_names(m)
    assert len(set(names)) == 5
    assert all(n[0].isalpha() and n[0] not in "eE" or n.startswith("v_") for n in names)
    assert all(c.isalnum() or c == "_" for n in names for c in n)


def test_solution_round_trip():
    m = random_milp(random.Random(8), 6, 3, 4)
    sol = solve(m)
    assert sol.status == OPTIMAL
    back = import_solution(m, write_solution(m, sol))
    assert back.status == FEASIBLE
    assert np.array_equal(back.x, sol.x)
    assert back.objective_value == pytest.approx(sol.objective_value)


def test_import_recomputes_objective_and_fills_gaps():
    m, x = _one_var()
    sol = import_solution(m, "# objective 999\nx 1.5\n")
    assert sol.status == FEASIBLE and sol.objective_value == 1.5
    partial = import_solution(m, "")
    assert partial.x[x.id] == 0 and any("missing" in w for w in partial.warnings)
    assert import_solution(m, "x 4").status == INFEASIBLE


def test_import_errors():
    m, _ = _one_var()
    with pytest.raises(UnknownVariableName):
        import_solution(m, "y 1")
    with pytest.raises(MalformedLine) as ei:
        import_solution(m, "x 1\nx one\n")
    assert ei.value.lineno == 2


def test_external_reader_accepts_export(tmp_path):
    m = random_milp(random.Random(10), 6, 2, 4)
    path = tmp_path / "m.lp"
    path.write_text(export_lp(m))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    ours = solve(m)
    assert h.getInfo().objective_function_value == pytest.approx(ours.objective_value, abs=1e-6)
