import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trstl.errors import UnboundAtom
from trstl.geometry import PwlTrajectory, box_region
from trstl.monitor import (INF, LEFT, RIGHT, check_soundness, eval_qualitative, eval_time_robustness,
                           monitor_report, naive_oracle)
from trstl.stl_ast import And, Atom, Interval, Or, parse_formula, resolve_horizon

from gen import random_formula, random_regions, random_trajectory

R = {"R": box_region("R", (0, 0), (1, 1))}
IN, CROSS, FAR = (0.5, 0.5), (2.0, 0.5), (3.0, 3.0)


def traj(times, pts):
    return PwlTrajectory.from_arrays(times, pts)


def test_single_inside_segment():
    tr = traj([0, 4], [IN, IN])
    assert eval_qualitative(Atom("R"), tr, R).root == [True]
    assert eval_time_robustness(Atom("R"), tr, R).root == [0]


def test_atom_run_lengths():
    tr = traj([0, 2, 5, 6], [IN, IN, IN, CROSS])   # labels: inside, inside, neither
    right = eval_time_robustness(Atom("R"), tr, R, side=RIGHT).root
    left = eval_time_robustness(Atom("R"), tr, R, side=LEFT).root
    assert right[0] == 3 and right[1] == 0
    assert left[1] == 2


def test_negative_run_uses_false_sign():
    tr = traj([0, 2, 5, 6], [FAR] * 4)
    assert eval_time_robustness(Atom("R"), tr, R).root[0] == -4


def test_always_window_reaches_later_segment():
    tr = traj([0, 2, 4, 10], [IN, IN, IN, CROSS])
    f = parse_formula("G[0,5] R")
    assert eval_qualitative(f, tr, R).root[0] is False


def test_eventually_side_condition():
    tr = traj([0, 12, 14], [IN, IN, IN])
    f = parse_formula("F[0,10] R")
    assert eval_qualitative(f, tr, R).root[0] is False
    assert eval_time_robustness(f, tr, R).root[0] == -INF
    assert naive_oracle(f, tr, R).root[0] == -INF


def test_empty_always_window_is_vacuous():
    tr = traj([0, 1, 2], [IN, IN, IN])
    f = parse_formula("G[5,6] R")
    assert eval_time_robustness(f, tr, R).root[0] == INF
    assert eval_qualitative(f, tr, R).root[0] is True


def test_unbound_atom():
    with pytest.raises(UnboundAtom):
        eval_qualitative(Atom("Z"), traj([0, 1], [IN, IN]), R)


def test_hand_soundness_case():
    tr = traj([0, 2, 5, 6], [IN, IN, IN, CROSS])
    assert check_soundness(Atom("R"), tr, R).consistent


def test_report_shape():
    tr = traj([0, 2, 5, 6], [IN, IN, IN, CROSS])
    rep = monitor_report(parse_formula("F[0,5] R"), tr, R, full=True)
    assert rep["sat"] is True
    assert len(rep["subformulas"][0]["segments"]) == 3
    json_inf = monitor_report(parse_formula("G[50,60] R"), tr, R)["theta_right"]
    assert json_inf == "+inf"


# -- properties ---------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


def _case(seed, depth=3, kmax=10):
    rng = random.Random(seed)
    regs = random_regions(rng)
    f = random_formula(rng, regs, rng.randint(0, depth))
    tr = random_trajectory(rng, rng.randint(2, kmax), 10, regs)
    return f, tr, regs


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_soundness_property(seed):
    f, tr, regs = _case(seed)
    rep = check_soundness(f, tr, regs)
    assert rep.consistent, rep.witnesses[:1]


@settings(max_examples=150, deadline=None)
@given(seeds, st.sampled_from([RIGHT, LEFT]))
def test_matches_naive_oracle(seed, side):
    f, tr, regs = _case(seed, kmax=12)
    fast, slow = eval_time_robustness(f, tr, regs, side=side), naive_oracle(f, tr, regs, side=side)
    for n in fast.nodes:
        assert fast[n] == slow[n]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=1, max_size=9))
def test_all_inside_suffix_sum(steps):
    times = [Fraction(0)]
    for s in steps:
        times.append(times[-1] + Fraction(s, 2))
    tr = traj(times, [IN] * len(times))
    th = eval_time_robustness(Atom("R"), tr, R).root
    for i in range(tr.num_segments):
        assert th[i] == times[-1] - times[i + 1]
    # appending an inside segment never lowers any value
    longer = traj(times + [times[-1] + 1], [IN] * (len(times) + 1))
    th2 = eval_time_robustness(Atom("R"), longer, R).root
    assert all(b >= a for a, b in zip(th, th2))


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_and_or_are_min_max(seed):
    rng = random.Random(seed)
    regs = random_regions(rng)
    f1, f2 = (resolve_horizon(random_formula(rng, regs, 2), 10) for _ in range(2))
    tr = random_trajectory(rng, rng.randint(2, 8), 10, regs)
    a = eval_time_robustness(f1, tr, regs).root
    b = eval_time_robustness(f2, tr, regs).root
    conj = eval_time_robustness(And([f1, f2]), tr, regs).root
    disj = eval_time_robustness(Or([f1, f2]), tr, regs).root
    assert conj == [min(x, y) for x, y in zip(a, b)]
    assert disj == [max(x, y) for x, y in zip(a, b)]


def test_finite_values_are_duration_sums():
    rng = random.Random(3)
    for _ in range(100):
        f, tr, regs = _case(rng.randrange(2**32))
        for side in (RIGHT, LEFT):
            for v in eval_time_robustness(f, tr, regs, side=side).root:
                if not math.isinf(v):
                    assert isinstance(v, Fraction)
                    assert abs(v) <= tr.times[-1]
