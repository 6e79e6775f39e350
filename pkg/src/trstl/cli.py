"""``trstl`` command line: monitor, encode, synth, plot, bench.

Exit codes: 0 ok, 1 specification violated, 2 bad input, 3 infeasible,
4 solver limit reached, 5 monitor disagrees with the solver.
"""

from __future__ import annotations

import json
import sys

import click

from .encoder import EXACT, MONOTONE, encode_mission, extract_trajectory
from .errors import InfeasibleEndpoints, TrstlError
from .milp_ir import INFEASIBLE, OPTIMAL
from .mission import load_mission, load_trajectory, trajectory_to_dict
from .monitor import eval_qualitative, eval_time_robustness, monitor_report

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_MISMATCH = range(6)
VERIFY_TOL = 1e-6
DEFAULT_MAX_BINARIES = 400


class Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)


def _load(mission_path, trajectory_path=None):
    try:
        m = load_mission(mission_path)
        traj = load_trajectory(trajectory_path) if trajectory_path else None
    except (TrstlError, OSError) as e:
        raise Exit(EXIT_INPUT, f"error: {e}") from None
    return m, traj


def _run(fn, *args, **kw):
    try:
        code = fn(*args, **kw)
    except Exit as e:
        if str(e):
            click.echo(str(e), err=True)
        code = e.code
    sys.exit(code)


@click.group()
@click.version_option(package_name="artifact", prog_name="trstl")
def main():
    """Time-robust STL monitoring and synthesis for PWL trajectories."""


# --------------------------------------------------------------------------
@main.command()
@click.argument("mission", type=click.Path(dir_okay=False))
@click.argument("trajectory", type=click.Path(dir_okay=False))
@click.option("--full", is_flag=True, help="Report every segment, not only segment 0.")
def monitor(mission, trajectory, full):
    """Evaluate a trajectory against the mission formula."""
    _run(_monitor, mission, trajectory, full)


def _monitor(mission, trajectory, full):
    m, traj = _load(mission, trajectory)
    try:
        prob_formula = m.problem().formula
        report = monitor_report(prob_formula, traj, m.region_objects(), m.epsilon, full)
    except TrstlError as e:
        raise Exit(EXIT_INPUT, f"error: {e}") from None
    click.echo(_dump(report))
    return EXIT_OK if report["sat"] else EXIT_VIOLATION


# --------------------------------------------------------------------------
@main.command()
@click.argument("mission", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the model as a CPLEX LP file.")
@click.option("--encoding", type=click.Choice([EXACT, MONOTONE]), default=None,
              help="Override the mission's encoding (default exact).")
def encode(mission, out, encoding):
    """Build the MILP; print its size, optionally export it."""
    _run(_encode, mission, out, encoding)


def _encode(mission, out, encoding):
    from .solver import export_lp
    m, _ = _load(mission)
    try:
        prob = m.problem(default_encoding=EXACT, **({"encoding": encoding} if encoding else {}))
        model, art = encode_mission(prob)
    except InfeasibleEndpoints as e:
        raise Exit(EXIT_INFEASIBLE, f"infeasible: {e}") from None
    except TrstlError as e:
        raise Exit(EXIT_INPUT, f"error: {e}") from None
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(export_lp(model))
    click.echo(_dump({**art.counts(), "encoding": prob.encoding}))
    return EXIT_OK


# --------------------------------------------------------------------------
@main.command()
@click.argument("mission", type=click.Path(dir_okay=False))
@click.option("--solver", "solver_kind", type=click.Choice(["builtin", "external"]), default="builtin")
@click.option("--solution", type=click.Path(dir_okay=False),
              help="Solution file from an external solver (name value lines).")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the trajectory JSON here.")
@click.option("--auto-k", "auto_k", type=int, default=None,
              help="Retry with K+1, K+2, ... up to this value until feasible.")
@click.option("--encoding", type=click.Choice([EXACT, MONOTONE]), default=None,
              help="Override the mission's encoding (default monotone).")
@click.option("--time-limit", type=float, default=60.0, show_default=True)
@click.option("--max-binaries", type=int, default=DEFAULT_MAX_BINARIES, show_default=True,
              help="Refuse builtin solves above this many binaries.")
def synth(mission, solver_kind, solution, out, auto_k, encoding, time_limit, max_binaries):
    """Synthesize a trajectory, then re-check it with the monitor."""
    _run(_synth, mission, solver_kind, solution, out, auto_k, encoding, time_limit, max_binaries)


class _NoModel(Exception):
    """Encoding already proves infeasibility (e.g. unreachable endpoints)."""


def _solve_once(m, K, solver_kind, solution, encoding, time_limit, max_binaries):
    from .solver import SolverConfig, SolveStats, import_solution, solve
    over = {"K": K}
    if encoding:
        over["encoding"] = encoding
    try:
        prob = m.problem(default_encoding=MONOTONE, **over)
        model, art = encode_mission(prob)
    except InfeasibleEndpoints as e:
        raise _NoModel(str(e)) from None
    except TrstlError as e:
        raise Exit(EXIT_INPUT, f"error: {e}") from None
    stats = SolveStats()
    if solver_kind == "external":
        if not solution:
            raise Exit(EXIT_INPUT, "error: --solver external needs --solution (export with `trstl encode --out`)")
        try:
            with open(solution, encoding="utf-8") as fh:
                sol = import_solution(model, fh.read())
        except (TrstlError, OSError) as e:
            raise Exit(EXIT_INPUT, f"error: {e}") from None
        if sol.status == INFEASIBLE:
            for w in sol.warnings:
                click.echo(f"warning: {w}", err=True)
            raise Exit(EXIT_MISMATCH, "external solution violates the model")
    else:
        if model.num_binary > max_binaries:
            raise Exit(EXIT_LIMIT, f"model has {model.num_binary} binaries (cap {max_binaries}); "
                                   "raise --max-binaries or use an external solver")
        sol = solve(model, SolverConfig(time_limit=time_limit), stats)
    return prob, model, art, sol, stats


def _synth(mission, solver_kind, solution, out, auto_k, encoding, time_limit, max_binaries):
    m, _ = _load(mission)
    if auto_k is not None and solver_kind == "external":
        raise Exit(EXIT_INPUT, "error: --auto-k needs the builtin solver")
    Ks = range(m.K, max(m.K, auto_k) + 1) if auto_k is not None else [m.K]
    tried = []
    for K in Ks:
        try:
            prob, model, art, sol, stats = _solve_once(m, K, solver_kind, solution, encoding,
                                                       time_limit, max_binaries)
        except _NoModel as e:
            tried.append({"K": K, "status": INFEASIBLE, "note": str(e)})
            continue
        tried.append({"K": K, "status": sol.status})
        if sol.status == INFEASIBLE:
            continue
        break
    else:
        click.echo(_dump({"status": INFEASIBLE, "attempts": tried}))
        raise Exit(EXIT_INFEASIBLE, "infeasible for every K tried" if auto_k else "infeasible")
    if not sol.has_solution:
        click.echo(_dump({"status": sol.status, "attempts": tried}))
        raise Exit(EXIT_LIMIT, f"solver stopped without a solution ({sol.status})")
    traj = extract_trajectory(sol, art, prob.T)
    regions = m.region_objects()
    theta = float(eval_time_robustness(prob.formula, traj, regions, m.epsilon, prob.side).root[0])
    sat = bool(eval_qualitative(prob.formula, traj, regions, m.epsilon).root[0])
    report = {"status": sol.status, "K": K, "encoding": prob.encoding, "objective": sol.objective_value,
              "theta_encoded": sol.value(art.theta0), "theta_monitor": theta, "sat": sat,
              "theta_star": prob.theta_star, **art.counts()}
    if solver_kind == "builtin":
        report["nodes"] = stats.nodes
    if auto_k is not None:
        report["attempts"] = tried
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_dump(trajectory_to_dict(traj)) + "\n")
    verified = sat and theta >= prob.theta_star - VERIFY_TOL
    report["verified"] = verified
    click.echo(_dump(report))
    if not verified:
        raise Exit(EXIT_MISMATCH, "monitor rejects the synthesized trajectory")
    if sol.status != OPTIMAL and solver_kind == "builtin":
        raise Exit(EXIT_LIMIT, f"solver limit reached; best trajectory kept ({sol.status})")
    return EXIT_OK


# --------------------------------------------------------------------------
@main.command()
@click.argument("mission", type=click.Path(dir_okay=False))
@click.argument("trajectory", type=click.Path(dir_okay=False), required=False)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def plot(mission, trajectory, out):
    """Draw regions and the trajectory as SVG."""
    _run(_plot, mission, trajectory, out)


def _plot(mission, trajectory, out):
    from .svg import render_svg
    m, traj = _load(mission, trajectory)
    try:
        regions = [(name, m.region_kind(name), r.vertices()) for name, r in m.region_objects().items()]
    except (TrstlError, ValueError) as e:
        raise Exit(EXIT_INPUT, f"error: {e}") from None
    text, warnings = render_svg(m.workspace["lower"], m.workspace["upper"], regions, traj)
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
@main.group()
def bench():
    """Benchmark missions and encoding-size scaling."""


@bench.command("run")
@click.option("--scale", type=click.Choice(["desk", "paper", "all"]), default="desk", show_default=True)
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Write the report here.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Write a flat CSV here.")
@click.option("--figure", type=click.Path(dir_okay=False), help="Scaling plot (PNG or SVG).")
@click.option("--scaling/--no-scaling", default=True, show_default=True)
def bench_run(scale, json_path, csv_path, figure, scaling):
    """Run the benchmark cases (desk: solve + verify, paper: encode only)."""
    _run(_bench, scale, json_path, csv_path, figure, scaling)


def _bench(scale, json_path, csv_path, figure, scaling):
    from . import bench as B
    cases = [c for c in B.load_benchmarks() if scale == "all" or c.scale == scale]
    rows = []
    for c in cases:
        r = B.run_case(c)
        rows.append(r)
        extra = (f"{r['status']:<10} theta={r.get('theta_monitor', float('nan')):.3f} "
                 f"{r.get('solve_seconds', 0.0):.1f}s" if c.scale == B.DESK else r["status"])
        click.echo(f"{r['name']:<16} bin={r['num_binary']:<6} cont={r['num_continuous']:<6} "
                   f"rows={r['num_constraints']:<6} {extra}", err=True)
    report = {"cases": rows}
    ok = all(r.get("passed", True) for r in rows)
    if scaling:
        reps = [B.measure_scaling(B.NESTED_TEMPLATE), B.measure_scaling(B.SINGLE_TEMPLATE)]
        report["scaling"] = [r.to_dict() for r in reps]
        checks = [B.within(reps[0].binary_exponent, 1.8, 2.2),
                  B.within(reps[0].continuous_exponent, 0.9, 1.1),
                  B.within(reps[1].binary_exponent, 0.9, 1.1)]
        report["scaling_ok"] = all(checks)
        ok = ok and all(checks)
        for rep in reps:
            click.echo(f"scaling {rep.formula}: bin^{rep.binary_exponent:.3f} "
                       f"cont^{rep.continuous_exponent:.3f}", err=True)
        if figure:
            B.scaling_figure(reps, figure)
    report["passed"] = ok
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(_dump(report) + "\n")
    if csv_path:
        import csv
        keys = ["name", "scale", "K", "encoding", "num_binary", "num_continuous", "num_constraints",
                "status", "objective", "theta_monitor", "nodes", "solve_seconds"]
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, keys, extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
    if not json_path:
        click.echo(_dump(report))
    return EXIT_OK if ok else EXIT_VIOLATION


if __name__ == "__main__":  # pragma: no cover
    main()
