"""Command-line surface: plan, latency, sweep, oracle-check.

Every subcommand writes machine-readable artifacts into one output directory
(atomically, temp + rename) so plotting tools can consume them by glob.
Exit codes: 0 success, 2 validation/parse, 3 infeasible scenario,
4 certificate failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import os
import sys
import tempfile
import time

from . import __version__, baselines, oracle, planner, protosim
from .channel import compute_rates
from .errors import (
    InfeasibleError,
    LeohoError,
    OracleCapError,
    ParseError,
    ValidationError,
)
from .geometry import build_visibility
from .planner import read_plan_csv, write_plan_csv
from .scenario import (
    Scenario,
    load_scenario,
    scenario_digest,
    synthesize_ues,
)

log = logging.getLogger("leoho")

ALGORITHMS = ("preho", "lss", "lst", "greedy")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_CERTIFICATE = 4


def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit_error(out_dir: str | None, code: int, message: str) -> int:
    doc = {"error": {"exit_code": code, "message": message}}
    print(_json_dumps(doc), end="", file=sys.stderr)
    if out_dir:
        try:
            _atomic_write(os.path.join(out_dir, "error.json"), _json_dumps(doc))
        except OSError:
            pass
    return code


def _run_algorithm(algorithm: str, scenario: Scenario, vis, rates, passes: int):
    """One plan + objective (+ trace for preho) for one algorithm."""
    if algorithm == "preho":
        seed = planner.initial_plan(scenario, vis)
        plan_, objective, trace = planner.plan(scenario, vis, rates, seed, passes=passes)
        return plan_, objective, trace
    plan_ = baselines.run_baseline(algorithm, scenario, vis, rates)
    objective = planner.evaluate_plan(scenario, vis, rates, plan_)
    return plan_, objective, [objective.objective]


def _apply_seed_override(scenario: Scenario, seed: int | None) -> Scenario:
    if seed is None:
        return scenario
    channel = dataclasses.replace(scenario.channel, seed=seed)
    ues = scenario.ues
    if ues.bbox is not None:
        ues = synthesize_ues(len(ues), ues.bbox, seed)
    return dataclasses.replace(scenario, channel=channel, ues=ues)


def _prepare(scenario_path: str, seed_override: int | None):
    scenario = _apply_seed_override(load_scenario(scenario_path), seed_override)
    vis = build_visibility(scenario)
    rates = compute_rates(scenario, vis)
    return scenario, vis, rates


def cmd_plan(args) -> int:
    try:
        scenario, vis, rates = _prepare(args.scenario, args.seed_override)
        plan_, objective, trace = _run_algorithm(
            args.algorithm, scenario, vis, rates, args.passes
        )
    except (ParseError, ValidationError) as exc:
        return _emit_error(args.out, EXIT_VALIDATION, str(exc))
    except InfeasibleError as exc:
        return _emit_error(args.out, EXIT_INFEASIBLE, str(exc))

    buf = io.StringIO()
    write_plan_csv(plan_, buf)
    _atomic_write(os.path.join(args.out, f"plan_{args.algorithm}.csv"), buf.getvalue())
    doc = planner.objective_to_dict(objective, trace)
    doc["algorithm"] = args.algorithm
    doc["scenario_digest"] = scenario_digest(scenario)
    _atomic_write(
        os.path.join(args.out, f"objective_{args.algorithm}.json"), _json_dumps(doc)
    )
    log.info("plan %s: n_ho=%d objective=%.6f", args.algorithm, objective.n_ho, objective.objective)
    return EXIT_OK


def cmd_latency(args) -> int:
    try:
        scenario = _apply_seed_override(load_scenario(args.scenario), args.seed_override)
        with open(args.plan) as fh:
            plan_ = read_plan_csv(fh)
        summaries = []
        for mechanism in args.mechanisms:
            dist = protosim.latency_cdf(plan_, mechanism, scenario)
            buf = io.StringIO()
            protosim.write_cdf_csv(dist, buf)
            _atomic_write(os.path.join(args.out, f"latency_{mechanism}.csv"), buf.getvalue())
            summaries.append(protosim.summarize(dist))
    except (ParseError, ValidationError, OSError) as exc:
        return _emit_error(args.out, EXIT_VALIDATION, str(exc))
    except InfeasibleError as exc:
        return _emit_error(args.out, EXIT_INFEASIBLE, str(exc))
    doc = {
        "mechanisms": summaries,
        "scenario_digest": scenario_digest(scenario),
        "tool_version": __version__,
    }
    _atomic_write(os.path.join(args.out, "latency_summary.json"), _json_dumps(doc))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        template = _apply_seed_override(load_scenario(args.scenario), args.seed_override)
        if template.ues.bbox is None:
            raise ValidationError("ues.bbox", "sweep template needs a synthesizable population")
        rows = []
        per_run = {}
        for n in args.n_values:
            ues = synthesize_ues(n, template.ues.bbox, template.ues.seed or 0)
            scenario = dataclasses.replace(template, ues=ues)
            vis = build_visibility(scenario)
            rates = compute_rates(scenario, vis)
            for algorithm in args.algorithms:
                t0 = time.perf_counter()
                _, objective, _ = _run_algorithm(algorithm, scenario, vis, rates, args.passes)
                wall = time.perf_counter() - t0
                rows.append((n, algorithm, objective.n_ho, objective.u_ue, objective.objective, wall))
                per_run[f"{algorithm}_n{n}"] = {
                    "n_ho": objective.n_ho,
                    "u_ue": objective.u_ue,
                    "objective": objective.objective,
                    "wall_clock_s": wall,
                }
    except (ParseError, ValidationError) as exc:
        return _emit_error(args.out, EXIT_VALIDATION, str(exc))
    except InfeasibleError as exc:
        return _emit_error(args.out, EXIT_INFEASIBLE, str(exc))
    lines = ["n,algorithm,n_ho,u_ue,objective,wall_clock_s"]
    for n, alg, n_ho, u_ue, obj, wall in rows:
        lines.append(f"{n},{alg},{n_ho},{u_ue!r},{obj!r},{wall!r}")
    _atomic_write(os.path.join(args.out, "sweep.csv"), "\n".join(lines) + "\n")
    doc = {
        "runs": per_run,
        "scenario_digest": scenario_digest(template),
        "tool_version": __version__,
    }
    _atomic_write(os.path.join(args.out, "report.json"), _json_dumps(doc))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    try:
        scenario, vis, rates = _prepare(args.scenario, args.seed_override)
    except (ParseError, ValidationError) as exc:
        return _emit_error(None, EXIT_VALIDATION, str(exc))
    except InfeasibleError as exc:
        return _emit_error(None, EXIT_INFEASIBLE, str(exc))

    failures = []
    base = planner.initial_plan(scenario, vis)
    try:
        for ue in base.ue_ids():
            _, bf_obj = oracle.brute_force_ue(ue, base, scenario, vis, rates)
            _, dp_obj = planner.optimize_ue(scenario, vis, rates, ue, base)
            if abs(bf_obj.objective - dp_obj.objective) > 1e-9:
                failures.append(
                    f"ue {ue}: dp objective {dp_obj.objective!r} != brute force {bf_obj.objective!r}"
                )
    except OracleCapError as exc:
        return _emit_error(None, EXIT_VALIDATION, str(exc))

    # Allocation certificates on the seed plan's small served sets.
    from .alloc import allocate_bisection, allocate_closed_form

    checked = 0
    for t in range(vis.num_slots):
        groups: dict[int, list[int]] = {}
        for ue in base.ue_ids():
            groups.setdefault(base.serving[ue][t], []).append(ue)
        for sat, members in sorted(groups.items()):
            if len(members) > 3 or checked >= 20:
                continue
            dmax = {i: rates.dmax(i, t, sat) for i in members}
            grid = oracle.brute_force_alloc(scenario.utility, dmax, grid_step=1e-3)
            for name, solver in (
                ("closed_form", lambda d: allocate_closed_form(scenario.utility.alpha, d)),
                ("bisection", lambda d: allocate_bisection(scenario.utility, d)),
            ):
                result = solver(dmax)
                worst = max(
                    abs(result.shares[i] - grid.shares[i]) for i in result.served_set
                )
                if worst > 2e-3:
                    failures.append(
                        f"alloc {name} sat={sat} t={t}: share deviates {worst:.2e} from grid oracle"
                    )
            checked += 1

    if failures:
        return _emit_error(None, EXIT_CERTIFICATE, "; ".join(failures))
    print(json.dumps({"oracle_check": "pass", "ues": len(base.ue_ids()), "allocs": checked}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leoho",
        description="Plan coordinated LEO handovers and simulate their signaling latency.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="compute a handover plan for one algorithm")
    p_plan.add_argument("--scenario", required=True)
    p_plan.add_argument("--algorithm", choices=ALGORITHMS, default="preho")
    p_plan.add_argument("--out", required=True)
    p_plan.add_argument("--passes", type=int, default=1)
    p_plan.add_argument("--seed-override", type=int, default=None)
    p_plan.set_defaults(func=cmd_plan)

    p_lat = sub.add_parser("latency", help="signaling-latency CDFs for an existing plan")
    p_lat.add_argument("--scenario", required=True)
    p_lat.add_argument("--plan", required=True)
    p_lat.add_argument(
        "--mechanisms", nargs="+", choices=protosim.MECHANISMS, default=list(protosim.MECHANISMS)
    )
    p_lat.add_argument("--out", required=True)
    p_lat.add_argument("--seed-override", type=int, default=None)
    p_lat.set_defaults(func=cmd_latency)

    p_sweep = sub.add_parser("sweep", help="rerun planning across UE counts")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--n-values", nargs="+", type=int, required=True)
    p_sweep.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--passes", type=int, default=1)
    p_sweep.add_argument("--seed-override", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle-check", help="certify planner and allocator on a tiny scenario")
    p_oracle.add_argument("--scenario", required=True)
    p_oracle.add_argument("--seed-override", type=int, default=None)
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("LEOHO_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LeohoError as exc:
        return _emit_error(getattr(args, "out", None), EXIT_VALIDATION, str(exc))


if __name__ == "__main__":
    sys.exit(main())
