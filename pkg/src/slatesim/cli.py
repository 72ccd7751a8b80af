"""Command-line entry point.

Subcommands:

* ``gen-catalog`` — synthesize an item catalog and write it as CSV.
* ``train``       — fit one policy; writes a model file and a diagnostics CSV.
* ``sweep``       — run the (algorithm x gamma x budget x seed) grid; writes
                    the results CSV.
* ``oracle``      — solve a knapsack instance file exactly.
* ``report``      — delta table plus sign tests from a results CSV.

Every value can come from (highest priority first) a command-line flag, a
``SLATESIM_<KEY>`` environment variable, the ``--config`` JSON file, or the
built-in default. Commands never mutate their input files and only write to
explicitly given output paths. Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents import TrainConfig, save_policy, train, write_diagnostics_csv
from .catalog import BudgetDistribution, save_catalog
from .config import RunConfig, load_config
from .errors import SlatesimError
from .experiment import (
    SweepResult,
    build_catalog_for_config,
    delta_report,
    run_sweep,
    sign_test,
    write_delta_report_csv,
)
from .knapsack import instance_from_json, solution_to_json, solve_bruteforce, solve_dp
from .rng import derive_stream

__all__ = ["main"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", type=str, required=True, help="output file path")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slatesim",
        description="Budget-aware slate recommendation simulator and sweep runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-catalog", help="write a synthetic catalog CSV")
    _add_common(p)
    p.add_argument("--num-items", type=int, default=None)

    p = sub.add_parser("train", help="train a single policy")
    _add_common(p)
    p.add_argument("--algorithm", type=str, default=None, choices=["sarsa", "qlearning", "montecarlo"])
    p.add_argument("--gamma", type=float, default=None, help="discount factor override")
    p.add_argument("--budget-loc", type=float, default=None, help="user budget location override")
    p.add_argument("--diagnostics", type=str, default=None, help="diagnostics CSV path")

    p = sub.add_parser("sweep", help="run the full sweep grid")
    _add_common(p)
    p.add_argument("--workers", type=int, default=None, help="parallel cell processes")
    p.add_argument("--episodes-dir", type=str, default=None, help="dump per-cell episode JSONL here")
    p.add_argument("--timing", action="store_true", help="write measured wall times (breaks byte-reproducibility)")

    p = sub.add_parser("oracle", help="solve a knapsack instance file")
    p.add_argument("--instance", type=str, required=True, help="instance JSON path")
    p.add_argument("--method", type=str, default="bruteforce", choices=["bruteforce", "dp"])
    p.add_argument("--resolution", type=float, default=None, help="cost grid for the dp method")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="solution JSON path (default: stdout)")

    p = sub.add_parser("report", help="delta table and sign tests from a results CSV")
    p.add_argument("--results", type=str, required=True, help="sweep results CSV")
    p.add_argument("--gamma-a", type=float, default=0.2)
    p.add_argument("--gamma-b", type=float, default=0.8)
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, required=True, help="report CSV path")
    return parser


def _config_from_args(args: argparse.Namespace, extra: dict | None = None) -> RunConfig:
    overrides = dict(extra or {})
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    return load_config(getattr(args, "config", None), overrides=overrides)


def _cmd_gen_catalog(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, {"num_items": args.num_items})
    catalog = build_catalog_for_config(cfg)
    save_catalog(catalog, args.out)
    print(f"wrote {catalog.n_items} items to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    overrides = {"algorithm": args.algorithm, "discount_factor": args.gamma, "user_budget": args.budget_loc}
    cfg = _config_from_args(args, overrides)
    catalog = build_catalog_for_config(cfg)
    budget_dist = BudgetDistribution(cfg.user_budget, cfg.user_budget_scale)
    train_cfg = TrainConfig.from_run_config(cfg)
    rng = derive_stream(cfg.master_seed, "train-cli", 0)
    policy, diags = train(catalog, budget_dist, train_cfg, rng)
    save_policy(policy, args.out)
    print(f"trained {policy.algorithm} (gamma={policy.gamma:g}) -> {args.out}")
    if args.diagnostics:
        write_diagnostics_csv(diags, args.diagnostics)
        print(f"diagnostics -> {args.diagnostics}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, {"workers": args.workers})
    result = run_sweep(cfg, episode_dir=args.episodes_dir)
    result.to_csv(args.out, include_timing=args.timing)
    n_err = len(result.errors)
    print(
        f"wrote {len(result.rows)} rows to {args.out}"
        + (f" ({n_err} error rows)" if n_err else "")
    )
    for row in result.errors:
        print(
            f"error in cell ({row.algorithm}, gamma={row.gamma:g}, "
            f"loc={row.budget_loc:g}, seed={row.seed}): {row.error}",
            file=sys.stderr,
        )
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    instance = instance_from_json(Path(args.instance), from_path=True)
    if args.method == "bruteforce":
        solution = solve_bruteforce(instance)
    else:
        resolution = args.resolution if args.resolution is not None else cfg.resolution
        solution = solve_dp(instance, resolution=resolution)
    text = solution_to_json(solution)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(
        f"S={{{', '.join(str(i) for i in solution.selected)}}}, "
        f"utility {solution.total_utility:g}, cost {solution.total_cost:g}"
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    result = SweepResult.from_csv(args.results)
    rows = delta_report(result, gamma_a=args.gamma_a, gamma_b=args.gamma_b)
    write_delta_report_csv(rows, args.out)
    print(f"wrote {len(rows)} delta rows to {args.out}")
    for r in rows:
        if r.metric == "play_rate":
            print(
                f"{r.algorithm} loc={r.budget_loc:g}: delta play rate "
                f"{r.delta_mean:+.4f} [{r.ci_low:+.4f}, {r.ci_high:+.4f}] "
                f"(sign test p={r.p_value:.4g}, n={r.n_pairs})"
            )
    return 0


_COMMANDS = {
    "gen-catalog": _cmd_gen_catalog,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SlatesimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
