"""Command-line front end: ``swarm-cert <command> ...``.

Exit codes: 0 success, 1 infeasible or uncertified, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench
from .errors import InfeasiblePlanError, SwarmCertError
from .model import DriftModel, NoiseModel, Scenario, VisibilityGraph

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _emit(doc, path):
    text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _write_text(text, path):
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def parse_range(text):
    """``3..8`` (inclusive) or ``3,4,5`` to a tuple of ints."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a..b' or a comma list of integers, got {text!r}") from None


def parse_floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got {text!r}") from None


def parse_window(text):
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError("window end precedes its start")
    return a, b


def _splines(scn: Scenario):
    from .trajectory import QuinticSpline

    tr = scn.trajectories or {}
    robots = tr.get("robots")
    if not robots:
        raise UsageError("scenario has no trajectories.robots")
    if len(robots) != scn.n_robots:
        raise UsageError(f"scenario has {scn.n_robots} robots but {len(robots)} trajectories")
    try:
        return [QuinticSpline.from_json(r) for r in robots]
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed trajectory: {e}") from e


def _sampled(scn, dt):
    from .trajectory import sample_positions

    P, n_t = sample_positions(_splines(scn), dt)
    if n_t < 1:
        raise UsageError("trajectories shorter than one sample interval")
    return P


# ---------------------------------------------------------------------------
# commands


def cmd_estimate(args):
    from .estimator import estimate

    scn = Scenario.load(args.scenario)
    recs = scn.records
    if args.window is not None:
        a, b = args.window
        recs = [r for r in recs if a <= r.time <= b]
    res = estimate(recs, scn.n_robots, scn.graph, tol=args.tol)
    _emit(res.to_json(), args.out)
    return EXIT_OK if res.certified else EXIT_FAIL


def cmd_certify(args):
    from .certificate import certificate_eigenvalue, eigenvalue_bound, empirical_noise_sweep, k_hat_from_positions

    scn = Scenario.load(args.scenario)
    P = _sampled(scn, args.dt)
    lam = certificate_eigenvalue(k_hat_from_positions(P, scn.graph).k)
    curve = empirical_noise_sweep(P, scn.graph, args.xi_grid, args.trials, np.random.default_rng(args.seed))
    _write_text(curve.to_csv(), args.out)
    summary = {"lambda4": lam, "n_t": len(P), "crossing": curve.crossing}
    ok = lam > 0
    if args.xi_max is not None:
        B = eigenvalue_bound(scn.graph, len(P), args.xi_max)
        summary.update(bound_B=B, xi_max=args.xi_max)
        ok = lam >= B
    summary["certified"] = bool(ok)
    print(json.dumps(summary, default=_json_default), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_plan(args):
    from .planner import ObstacleField, PlannerConfig, plan_swarm

    scn = Scenario.load(args.scenario)
    cfg = PlannerConfig.load(args.config) if args.config else PlannerConfig()
    if args.xi_max is not None:
        cfg = cfg.replace(xi_max=args.xi_max)
    tr = scn.trajectories or {}
    starts = np.array([p.t for p in scn.robots])
    if "goals" in tr:
        goals = np.asarray(tr["goals"], dtype=float)
    elif tr.get("robots"):
        goals = np.array([r["end"]["p"] for r in tr["robots"]], dtype=float)
    else:
        raise UsageError("scenario needs trajectories.goals (or trajectories.robots with end states)")
    if goals.shape != starts.shape:
        raise UsageError(f"goals have shape {goals.shape}, expected {starts.shape}")
    if args.obstacles:
        with open(args.obstacles) as f:
            field_ = ObstacleField.from_json(json.load(f))
    else:
        field_ = ObstacleField.from_json(tr["obstacles"]) if "obstacles" in tr else ObstacleField()
    try:
        plan = plan_swarm(field_, starts, goals, cfg, graph=scn.graph, raise_on_failure=False)
    except InfeasiblePlanError as e:
        if e.report is not None:
            _emit(e.report.to_json(), args.report)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    rep = plan.report
    if args.out:
        _emit({"robots": [s.to_json() for s in plan.splines]}, args.out)
    _emit(rep.to_json(), args.report)
    ok = rep.success and rep.lambda4 >= rep.bound_B
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args):
    from .sim import drifted_odometry, make_records, synthetic_scenario, truth_from_trajectories
    from .trajectory import QuinticSpline

    rng = np.random.default_rng(args.seed)
    if args.sigma is not None and args.xi is not None:
        raise UsageError("give either --xi or --sigma, not both")
    noise = None
    if args.sigma is not None:
        noise = NoiseModel("gaussian", sigma=args.sigma, seed=args.seed)
    elif args.xi is not None:
        noise = NoiseModel("bounded", xi=args.xi, seed=args.seed)
    traj_doc = None
    if args.trajectories:
        with open(args.trajectories) as f:
            traj_doc = json.load(f)
        splines = [QuinticSpline.from_json(r) for r in traj_doc["robots"]]
        truth = truth_from_trajectories(splines, args.dt, rng)
        n = len(splines)
    else:
        if args.robots is None:
            raise UsageError("simulate needs --robots or --trajectories")
        n = args.robots
        _, truth = synthetic_scenario(n, args.times, args.dt, seed=args.seed)
    graph = VisibilityGraph.complete(n) if args.graph == "complete" else getattr(VisibilityGraph, args.graph)(n)
    odo = None
    if args.drift is not None:
        sp, st = args.drift
        odo = drifted_odometry(truth, DriftModel(sp, st, args.dt), rng, set(range(1, n)))
    recs = make_records(truth, graph, noise, rng, odometry=odo)
    scn = Scenario(truth.initial, graph, recs, noise, traj_doc)
    _emit(scn.to_json(), args.out)
    return EXIT_OK


def cmd_bench(args):
    spec = bench.BenchmarkSpec(
        experiment=args.experiment, n_robots=args.robots, trials=args.trials, seed=args.seed,
        xi_grid=args.xi_grid, xi_max_grid=args.xi_max_grid, samples=args.samples, out_dir=args.out_dir,
    )
    text = bench.run(spec)
    if not args.out_dir:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_degen_check(args):
    from .certificate import detect_degeneration

    scn = Scenario.load(args.scenario)
    rep = detect_degeneration(_sampled(scn, args.dt), scn.graph)
    _emit({"degenerate": rep.degenerate, "mechanism": rep.mechanism, "witness": rep.witness,
           "lambda4": rep.lambda4, "k_norm": rep.k_norm}, args.out)
    return EXIT_FAIL if rep.degenerate else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="swarm-cert", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate relative poses from a scenario's bearing records")
    e.add_argument("--scenario", required=True)
    e.add_argument("--window", type=parse_window, help="START:END in seconds")
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--out", help="EstimationResult JSON (default stdout)")
    e.set_defaults(fn=cmd_estimate)

    c = sub.add_parser("certify", help="certificate eigenvalue of a scenario's trajectories and its noise sweep")
    c.add_argument("--scenario", required=True)
    c.add_argument("--dt", type=float, default=0.1, help="sampling interval for K-hat")
    c.add_argument("--xi-max", type=float, help="check λ4 against the bound for this noise level")
    c.add_argument("--xi-grid", type=parse_floats, default=bench.DEFAULT_XI)
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", help="sweep CSV (default stdout)")
    c.set_defaults(fn=cmd_certify)

    pl = sub.add_parser("plan", help="plan certificate-aware swarm trajectories")
    pl.add_argument("--scenario", required=True)
    pl.add_argument("--config", help="PlannerConfig JSON")
    pl.add_argument("--xi-max", type=float)
    pl.add_argument("--obstacles", help="ObstacleField JSON (overrides trajectories.obstacles)")
    pl.add_argument("--out", help="trajectories JSON")
    pl.add_argument("--report", help="plan report JSON (default stdout)")
    pl.set_defaults(fn=cmd_plan)

    s = sub.add_parser("simulate", help="write a synthetic scenario")
    s.add_argument("--robots", type=int)
    s.add_argument("--trajectories", help="trajectories JSON from 'plan' to follow instead of random motion")
    s.add_argument("--times", type=int, default=30)
    s.add_argument("--dt", type=float, default=0.2)
    s.add_argument("--xi", type=float, help="bounded bearing noise")
    s.add_argument("--sigma", type=float, help="gaussian bearing noise")
    s.add_argument("--drift", type=parse_floats, help="SIGMA_P,SIGMA_THETA drift on robots 1..N-1")
    s.add_argument("--graph", choices=("complete", "star", "cycle"), default="complete")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="Scenario JSON (default stdout)")
    s.set_defaults(fn=cmd_simulate)

    b = sub.add_parser("bench", help="run a Monte-Carlo benchmark and emit CSV")
    b.add_argument("experiment", choices=bench.EXPERIMENTS)
    b.add_argument("--robots", type=parse_range, default=(3,))
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--xi-grid", type=parse_floats, default=bench.DEFAULT_XI)
    b.add_argument("--xi-max-grid", type=parse_floats, default=(0.0, 0.05))
    b.add_argument("--samples", type=int, default=1000)
    b.add_argument("--out-dir", help="write <experiment>.csv here instead of stdout")
    b.set_defaults(fn=cmd_bench)

    d = sub.add_parser("degen-check", help="detect degenerate swarm motion in a scenario's trajectories")
    d.add_argument("--scenario", required=True)
    d.add_argument("--dt", type=float, default=0.1)
    d.add_argument("--out", help="report JSON (default stdout)")
    d.set_defaults(fn=cmd_degen_check)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if getattr(args, "drift", None) is not None and len(args.drift) != 2:
        parser.print_usage(sys.stderr)
        print("error: --drift needs SIGMA_P,SIGMA_THETA", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasiblePlanError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (SwarmCertError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
