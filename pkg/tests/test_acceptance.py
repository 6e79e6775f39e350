"""The nine acceptance criteria, each at its stated tolerance and budget.

Every test prints one ``criterion N: PASS|FAIL - detail`` line (collected
again in the terminal summary) before asserting.
"""

import math
import random
import time
from pathlib import Path

from click.testing import CliRunner

from conftest import record
from gadget_oracle import GADGETS
from gen import random_formula, random_regions, random_trajectory
from roundtrip import check, draw
from solver_oracle import brute_force, random_model_stream, verify
from trstl.bench import NESTED_TEMPLATE, SINGLE_TEMPLATE, desk_cases, measure_scaling, run_case, within
from trstl.cli import main
from trstl.encoder import EXACT, MONOTONE, encode_mission, extract_trajectory
from trstl.milp_ir import OPTIMAL
from trstl.mission import load_mission
from trstl.monitor import LEFT, RIGHT, check_soundness, eval_qualitative, eval_time_robustness, naive_oracle
from trstl.solver import SolverConfig, export_lp, solve

FIX = Path(__file__).parent / "fixtures"


def _fuzz_case(seed, kmax):
    rng = random.Random(seed)
    regs = random_regions(rng)
    f = random_formula(rng, regs, rng.randint(0, 3))
    return f, random_trajectory(rng, rng.randint(2, kmax), 10, regs), regs


def test_criterion_1_soundness_fuzz():
    t0 = time.perf_counter()
    bad = []
    for seed in range(5000):
        f, tr, regs = _fuzz_case(seed, 10)
        rep = check_soundness(f, tr, regs, sides=(RIGHT, LEFT))
        if not rep.consistent:
            bad.append((seed, rep.witnesses[0]))
    dt = time.perf_counter() - t0
    ok = not bad and dt <= 120
    record(1, ok, f"5000 cases, {len(bad)} counterexamples, {dt:.1f}s (limit 120s)")
    assert ok, bad[:3]


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches = 0
    for seed in range(1000):
        f, tr, regs = _fuzz_case(10_000 + seed, 10)
        side = (RIGHT, LEFT)[seed % 2]
        fast, slow = eval_time_robustness(f, tr, regs, side=side), naive_oracle(f, tr, regs, side=side)
        mismatches += any(fast[n] != slow[n] for n in fast.nodes)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt <= 30
    record(2, ok, f"1000 cases, {mismatches} mismatches (exact equality), {dt:.1f}s (limit 30s)")
    assert ok


def test_criterion_3_gadget_exactness():
    worst = {}
    for name, trial in GADGETS.items():
        rng = random.Random(name)
        worst[name] = max(trial(rng) for _ in range(200))
    ok = all(d <= 1e-9 for d in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(3, ok, f"200 trials per gadget, max deviation: {detail} (limit 1e-9)")
    assert ok


def test_criterion_4_round_trip():
    agree = {EXACT: 0, MONOTONE: 0}
    for seed in range(200):
        inst = draw(seed)
        for enc in agree:
            out = check(inst, encoding=enc)
            agree[enc] += out.monitor_ok == out.milp_ok
    ok = all(v == 200 for v in agree.values())
    record(4, ok, f"agreement exact {agree[EXACT]}/200, monotone {agree[MONOTONE]}/200")
    assert ok


def test_criterion_5_end_to_end_toy():
    m = load_mission(FIX / "toy_mission.json")
    assert (m.formula, m.K, m.horizon, m.v_b, m.theta_star, m.lam) == ("F[0,10] G[0,2] R", 6, 10, 1, 0.5, 1)
    prob = m.problem(default_encoding=EXACT)
    model, art = encode_mission(prob)
    t0 = time.perf_counter()
    sol = solve(model, SolverConfig(time_limit=30))
    dt = time.perf_counter() - t0
    traj = extract_trajectory(sol, art, prob.T) if sol.has_solution else None
    theta = sat = None
    if traj is not None:
        regs = m.region_objects()
        theta = float(eval_time_robustness(prob.formula, traj, regs, m.epsilon, RIGHT).root[0])
        sat = bool(eval_qualitative(prob.formula, traj, regs, m.epsilon).root[0])
    ok = sol.status == OPTIMAL and dt <= 30 and sat is True and theta >= 0.5 - 1e-6
    record(5, ok, f"status {sol.status} in {dt:.2f}s, monitor theta_+ {theta}, sat {sat}")
    assert ok


def test_criterion_6_complexity_exponents():
    nested, single = measure_scaling(NESTED_TEMPLATE), measure_scaling(SINGLE_TEMPLATE)
    again = measure_scaling(NESTED_TEMPLATE)
    ok = (within(nested.binary_exponent, 1.8, 2.2) and within(nested.continuous_exponent, 0.9, 1.1)
          and within(single.binary_exponent, 0.9, 1.1) and again.to_dict() == nested.to_dict())
    record(6, ok, f"nested bin {nested.binary_exponent:.3f} [1.8,2.2], cont {nested.continuous_exponent:.3f} "
                  f"[0.9,1.1]; single bin {single.binary_exponent:.3f} [0.9,1.1]; repeat identical")
    assert ok


def test_criterion_7_solver_exactness():
    worst, unverified, count = 0.0, 0, 0
    for model in random_model_stream(7, 50):
        assert model.num_binary <= 18
        want = brute_force(model)
        sol = solve(model)
        got = sol.objective_value if sol.status == OPTIMAL else -math.inf
        if math.isinf(want) or math.isinf(got):
            gap = 0.0 if got == want else math.inf
        else:
            gap = abs(got - want)
        worst = max(worst, gap)
        if sol.x is not None and verify(model, sol.x):
            unverified += 1
        count += 1
    ok = count == 50 and worst <= 1e-6 and unverified == 0
    record(7, ok, f"{count} models, worst |B&B - brute force| {worst:.1e} (limit 1e-6), "
                  f"{unverified} solutions failing verification")
    assert ok


def test_criterion_8_interface_determinism(tmp_path):
    runner = CliRunner()
    toy = str(FIX / "toy_mission.json")
    lps = []
    for k in range(2):
        out = tmp_path / f"{k}.lp"
        runner.invoke(main, ["encode", toy, "--out", str(out)])
        lps.append(out.read_bytes())
    same = lps[0] == lps[1]
    lp_golden = lps[0] == (FIX / "toy.lp").read_bytes()
    from test_solver import _one_var
    lp_golden &= export_lp(_one_var()[0]) == (FIX / "one_var.lp").read_text()
    svg_ok = True
    for mission, traj, golden in (("toy_mission.json", "toy_sat.json", "toy.svg"),
                                  ("avoid_mission.json", "avoid_detour.json", "avoid.svg")):
        out = tmp_path / golden
        runner.invoke(main, ["plot", str(FIX / mission), str(FIX / traj), "--out", str(out)])
        svg_ok &= out.read_bytes() == (FIX / golden).read_bytes()
    ok = same and lp_golden and svg_ok
    record(8, ok, f"LP repeat identical {same}, LP goldens {lp_golden}, SVG goldens {svg_ok}")
    assert ok


def test_criterion_9_desk_suite():
    results = [run_case(c) for c in desk_cases()]
    ok = len(results) == 4 and all(r["passed"] and r["status"] == OPTIMAL and r["verified"]
                                   and r["solve_seconds"] <= 30 for r in results)
    detail = "; ".join(f"{r['name']} {r['status']} theta {r.get('theta_monitor', float('nan')):.3f} "
                       f"{r['solve_seconds']:.2f}s" for r in results)
    record(9, ok, detail)
    assert ok
