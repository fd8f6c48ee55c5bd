"""`bench` command line: experiment sweeps, single rollouts, report tables."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bench import ExperimentConfig, load_experiment_config, run_experiment
from .rewards import TaskVector, project_for_deployment
from .simulate import DEFAULT_DT, DEFAULT_T, rollout, serialize_trajectory


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config:
        config = load_experiment_config(json.loads(Path(args.config).read_text()))
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.methods:
        overrides["methods"] = tuple(args.methods.split(","))
    if args.budgets:
        overrides["query_budgets"] = _parse_int_list(args.budgets)
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.mock_llm:
        overrides["mock_llm_fixture"] = args.mock_llm
    if overrides:
        config = replace(config, **overrides)

    result = run_experiment(config, out_dir=args.out)
    print(f"wrote {len(result.rows)} result rows to {args.out}")
    for row in result.failed:
        print(f"FAILED {row.task}/{row.method}/n={row.budget}/seed={row.replicate}: {row.error}", file=sys.stderr)
    return 1 if result.failed else 0


def _cmd_rollout(args: argparse.Namespace) -> int:
    omega = project_for_deployment(TaskVector.from_array(args.omega))
    traj = rollout(omega, T=args.T, dt=args.dt, noise_sigma=args.noise_sigma, seed=args.seed)
    record = serialize_trajectory(traj)
    Path(args.out).write_text(json.dumps(record, indent=2) + "\n")
    print(f"wrote trajectory {traj.id} ({len(traj)} steps) to {args.out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.in_dir) / "aggregates.csv"
    if not path.exists():
        print(f"no aggregates.csv under {args.in_dir}", file=sys.stderr)
        return 1
    with path.open() as handle:
        rows = list(csv.reader(handle))
    widths = [max(len(row[col]) for row in rows) for col in range(len(rows[0]))]
    for i, row in enumerate(rows):
        print("  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)))
        if i == 0:
            print("  ".join("-" * w for w in widths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Gait preference-learning benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a sweep and write results")
    run_p.add_argument("--config", help="JSON experiment config file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--mock-llm", help="mock LLM fixture file (offline mode)")
    run_p.add_argument("--methods", help="comma-separated method subset")
    run_p.add_argument("--budgets", help="comma-separated query budgets, e.g. 4,8,12")
    run_p.add_argument("--seeds", type=int, help="replicates per cell")
    run_p.set_defaults(func=_cmd_run)

    roll_p = sub.add_parser("rollout", help="emit one trajectory JSON")
    roll_p.add_argument("--omega", nargs=5, type=float, required=True,
                        metavar=("V", "PITCH", "TROT", "PACE", "BOUND"))
    roll_p.add_argument("--out", required=True)
    roll_p.add_argument("--T", type=int, default=DEFAULT_T)
    roll_p.add_argument("--dt", type=float, default=DEFAULT_DT)
    roll_p.add_argument("--noise-sigma", type=float, default=0.0)
    roll_p.add_argument("--seed", type=int, default=0)
    roll_p.set_defaults(func=_cmd_rollout)

    report_p = sub.add_parser("report", help="print the aggregate table")
    report_p.add_argument("--in", dest="in_dir", required=True)
    report_p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
