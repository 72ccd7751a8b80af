"""Sweeps over (algorithm x gamma x budget location x seed) and the metrics
read off them.

Metrics per evaluation episode set:

* play rate — average number of clicks per slate;
* effective slate size — slate prefix length until the first slot whose
  item cost exceeded the budget available at that slot;
* abandon rate — fraction of episodes with zero clicks.

Every sweep cell derives its own random streams from (master_seed, cell
label, seed), so results are identical for any worker count and any
execution order. The results CSV is byte-reproducible: the wall-time column
is written as 0 unless timing output is explicitly requested (measured
times stay available on the in-memory result).
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from math import comb
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .agents import TrainConfig, evaluate_policy, train
from .catalog import (
    BudgetDistribution,
    CostDistribution,
    ItemCatalog,
    RelevanceParams,
    generate_synthetic_catalog,
    load_catalog,
    sample_initial_budget,
)
from .config import RunConfig
from .env import EpisodeLog, write_episode_logs
from .errors import ValidationError
from .rng import derive_stream

__all__ = [
    "SweepConfig",
    "CellResult",
    "SweepResult",
    "DeltaRow",
    "play_rate",
    "effective_slate_size",
    "abandon_rate",
    "build_catalog_for_config",
    "run_sweep",
    "delta_report",
    "sign_test",
    "write_delta_report_csv",
]

RESULTS_HEADER = (
    "algorithm",
    "gamma",
    "budget_loc",
    "seed",
    "play_rate",
    "effective_slate_size",
    "abandon_rate",
    "episodes",
    "wall_time_s",
)

DELTA_METRICS = ("play_rate", "effective_slate_size")


def play_rate(logs: Sequence[EpisodeLog]) -> float:
    """Average clicks per slate over the episode set."""
    if not logs:
        raise ValueError("play_rate needs at least one episode")
    return sum(log.total_clicks() for log in logs) / len(logs)


def effective_slate_size(log: EpisodeLog) -> int:
    """Slots that fit the budget available at their turn, stopping at the
    first slot that did not."""
    count = 0
    for j in range(len(log.actions)):
        if log.costs[j] > log.budget_path[j]:
            break
        count += 1
    return count


def abandon_rate(logs: Sequence[EpisodeLog]) -> float:
    """Fraction of episodes with zero clicks."""
    if not logs:
        raise ValueError("abandon_rate needs at least one episode")
    return sum(1 for log in logs if log.total_clicks() == 0) / len(logs)


@dataclass(frozen=True)
class SweepConfig:
    """Grid of cells plus the base parameters shared by all of them."""

    algorithms: tuple[str, ...]
    gammas: tuple[float, ...]
    budget_locs: tuple[float, ...]
    seeds: tuple[int, ...]
    base: RunConfig

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "SweepConfig":
        return cls(
            algorithms=cfg.algorithms,
            gammas=cfg.gammas,
            budget_locs=cfg.budget_locs,
            seeds=cfg.seeds,
            base=cfg,
        )

    def cells(self) -> list[tuple[str, float, float, int]]:
        return [
            (alg, gamma, loc, seed)
            for alg in self.algorithms
            for gamma in self.gammas
            for loc in self.budget_locs
            for seed in self.seeds
        ]


@dataclass(frozen=True)
class CellResult:
    algorithm: str
    gamma: float
    budget_loc: float
    seed: int
    play_rate: float
    effective_slate_size: float
    abandon_rate: float
    episodes: int
    wall_time_s: float
    error: str | None = None

    def sort_key(self) -> tuple:
        return (self.algorithm, self.gamma, self.budget_loc, self.seed)


@dataclass
class SweepResult:
    rows: list[CellResult]

    def __post_init__(self) -> None:
        self.rows = sorted(self.rows, key=CellResult.sort_key)

    @property
    def errors(self) -> list[CellResult]:
        return [r for r in self.rows if r.error is not None]

    def total_wall_time(self) -> float:
        return sum(r.wall_time_s for r in self.rows)

    def cell(self, algorithm: str, gamma: float, budget_loc: float, seed: int) -> CellResult:
        for r in self.rows:
            if (r.algorithm, r.gamma, r.budget_loc, r.seed) == (algorithm, gamma, budget_loc, seed):
                return r
        raise KeyError((algorithm, gamma, budget_loc, seed))

    def metric_by_seed(
        self, metric: str, algorithm: str, gamma: float, budget_loc: float
    ) -> dict[int, float]:
        out: dict[int, float] = {}
        for r in self.rows:
            if r.error is None and (r.algorithm, r.gamma, r.budget_loc) == (algorithm, gamma, budget_loc):
                out[r.seed] = getattr(r, metric)
        return out

    def to_csv(self, path: str | Path, include_timing: bool = False) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULTS_HEADER)
            for r in self.rows:
                wall = r.wall_time_s if include_timing else 0.0
                writer.writerow(
                    [
                        r.algorithm,
                        format(r.gamma, ".9g"),
                        format(r.budget_loc, ".9g"),
                        r.seed,
                        format(r.play_rate, ".9g"),
                        format(r.effective_slate_size, ".9g"),
                        format(r.abandon_rate, ".9g"),
                        r.episodes,
                        format(wall, ".9g"),
                    ]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "SweepResult":
        rows: list[CellResult] = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != RESULTS_HEADER:
                raise ValidationError(f"{path}: expected header {','.join(RESULTS_HEADER)}")
            for rec in reader:
                if not rec:
                    continue
                rows.append(
                    CellResult(
                        algorithm=rec[0],
                        gamma=float(rec[1]),
                        budget_loc=float(rec[2]),
                        seed=int(rec[3]),
                        play_rate=float(rec[4]),
                        effective_slate_size=float(rec[5]),
                        abandon_rate=float(rec[6]),
                        episodes=int(rec[7]),
                        wall_time_s=float(rec[8]),
                        error="nan-row" if math.isnan(float(rec[4])) else None,
                    )
                )
        return cls(rows=rows)


_CATALOG_CACHE: dict[tuple, ItemCatalog] = {}


def build_catalog_for_config(cfg: RunConfig) -> ItemCatalog:
    """The catalog a config describes: loaded from file, or synthesized
    deterministically from the master seed."""
    if cfg.catalog_path is not None:
        return load_catalog(cfg.catalog_path)
    rng = derive_stream(cfg.master_seed, "catalog", 0)
    return generate_synthetic_catalog(
        cfg.num_items,
        RelevanceParams(cfg.relevance_alpha, cfg.relevance_beta),
        CostDistribution(cfg.cost_low, cfg.cost_high),
        rng,
        cost_floor=cfg.cost_floor,
    )


def _cached_catalog(cfg: RunConfig) -> ItemCatalog:
    key = (
        cfg.catalog_path,
        cfg.num_items,
        cfg.relevance_alpha,
        cfg.relevance_beta,
        cfg.cost_low,
        cfg.cost_high,
        cfg.cost_floor,
        cfg.master_seed,
    )
    if key not in _CATALOG_CACHE:
        _CATALOG_CACHE.clear()  # one catalog per worker is plenty
        _CATALOG_CACHE[key] = build_catalog_for_config(cfg)
    return _CATALOG_CACHE[key]


def _cell_label(algorithm: str, gamma: float, budget_loc: float) -> str:
    return f"cell/{algorithm}/gamma={gamma:g}/loc={budget_loc:g}"


def run_cell(
    cfg: RunConfig,
    algorithm: str,
    gamma: float,
    budget_loc: float,
    seed: int,
    episode_dir: str | None = None,
) -> CellResult:
    """Train one policy and evaluate it greedily; one row of the sweep."""
    start = time.perf_counter()
    catalog = _cached_catalog(cfg)
    label = _cell_label(algorithm, gamma, budget_loc)
    pop_rng = derive_stream(cfg.master_seed, label + "/users", seed)
    population = np.asarray(
        sample_initial_budget(
            BudgetDistribution(budget_loc, cfg.user_budget_scale), pop_rng, size=cfg.num_users
        ),
        dtype=np.float64,
    )
    train_cfg = TrainConfig.from_run_config(cfg, algorithm=algorithm, gamma=gamma)
    train_rng = derive_stream(cfg.master_seed, label + "/train", seed)
    policy, _ = train(catalog, None, train_cfg, train_rng, user_budgets=population)
    eval_rng = derive_stream(cfg.master_seed, label + "/eval", seed)
    logs = evaluate_policy(
        policy,
        catalog,
        population,
        cfg.eval_episodes,
        eval_rng,
        response_mode=cfg.response_mode,
        charge_mode=cfg.charge_mode,
        epsilon=0.0,
        no_choice_weight=cfg.no_choice_weight,
        seed_tag=seed,
    )
    if episode_dir is not None:
        out = Path(episode_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = f"{algorithm}_gamma{gamma:g}_loc{budget_loc:g}_seed{seed}.jsonl"
        write_episode_logs(logs, out / name)
    return CellResult(
        algorithm=algorithm,
        gamma=gamma,
        budget_loc=budget_loc,
        seed=seed,
        play_rate=play_rate(logs),
        effective_slate_size=float(np.mean([effective_slate_size(log) for log in logs])),
        abandon_rate=abandon_rate(logs),
        episodes=len(logs),
        wall_time_s=time.perf_counter() - start,
    )


def _run_cell_safe(args: tuple) -> CellResult:
    cfg, algorithm, gamma, budget_loc, seed, episode_dir = args
    try:
        return run_cell(cfg, algorithm, gamma, budget_loc, seed, episode_dir)
    except Exception as exc:  # record the failure, keep the sweep going
        return CellResult(
            algorithm=algorithm,
            gamma=gamma,
            budget_loc=budget_loc,
            seed=seed,
            play_rate=float("nan"),
            effective_slate_size=float("nan"),
            abandon_rate=float("nan"),
            episodes=0,
            wall_time_s=0.0,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(
    config: SweepConfig | RunConfig,
    workers: int | None = None,
    episode_dir: str | None = None,
) -> SweepResult:
    """Run every (algorithm, gamma, budget_loc, seed) cell; rows come back
    sorted and identical for any worker count."""
    sweep = SweepConfig.from_run_config(config) if isinstance(config, RunConfig) else config
    n_workers = workers if workers is not None else sweep.base.workers
    tasks = [
        (sweep.base, alg, gamma, loc, seed, episode_dir)
        for (alg, gamma, loc, seed) in sweep.cells()
    ]
    if n_workers <= 1:
        rows = [_run_cell_safe(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_run_cell_safe, tasks, chunksize=1))
    return SweepResult(rows=rows)


def sign_test(paired_a: Sequence[float], paired_b: Sequence[float]) -> float:
    """Two-sided exact binomial sign test on paired differences; ties drop."""
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    if a.size < 5:
        raise ValueError("sign test needs at least 5 pairs")
    diff = a - b
    pos = int((diff > 0).sum())
    neg = int((diff < 0).sum())
    n = pos + neg
    if n == 0:
        raise ValueError("all pairs tie; the sign test is undefined")
    k = min(pos, neg)
    tail = sum(comb(n, j) for j in range(k + 1)) / 2.0**n
    return min(1.0, 2.0 * tail)


@dataclass(frozen=True)
class DeltaRow:
    algorithm: str
    budget_loc: float
    metric: str
    gamma_a: float
    gamma_b: float
    delta_mean: float
    ci_low: float
    ci_high: float
    p_value: float  # nan when the sign test is undefined (all ties)
    n_pairs: int


def delta_report(
    result: SweepResult,
    gamma_a: float,
    gamma_b: float,
    metrics: Sequence[str] = DELTA_METRICS,
    n_bootstrap: int = 10000,
    bootstrap_seed: int = 0,
) -> list[DeltaRow]:
    """Per-(algorithm, budget) mean metric difference gamma_b minus gamma_a,
    paired by seed, with a bootstrap 95% interval and a sign-test p-value."""
    gammas_present = {r.gamma for r in result.rows}
    for g in (gamma_a, gamma_b):
        if g not in gammas_present:
            raise ValueError(f"gamma {g} not present in the sweep result")
    algorithms = sorted({r.algorithm for r in result.rows})
    budget_locs = sorted({r.budget_loc for r in result.rows})
    rng = np.random.default_rng(bootstrap_seed)
    report: list[DeltaRow] = []
    for algorithm in algorithms:
        for loc in budget_locs:
            for metric in metrics:
                by_seed_a = result.metric_by_seed(metric, algorithm, gamma_a, loc)
                by_seed_b = result.metric_by_seed(metric, algorithm, gamma_b, loc)
                seeds = sorted(set(by_seed_a) & set(by_seed_b))
                if not seeds:
                    continue
                a = np.array([by_seed_a[s] for s in seeds])
                b = np.array([by_seed_b[s] for s in seeds])
                deltas = b - a
                mean = float(deltas.mean())
                if len(seeds) > 1:
                    idx = rng.integers(0, len(seeds), size=(n_bootstrap, len(seeds)))
                    boot = deltas[idx].mean(axis=1)
                    ci_low, ci_high = (float(q) for q in np.percentile(boot, [2.5, 97.5]))
                else:
                    ci_low = ci_high = mean
                try:
                    p = sign_test(b, a)
                except ValueError:
                    p = float("nan")
                report.append(
                    DeltaRow(
                        algorithm=algorithm,
                        budget_loc=loc,
                        metric=metric,
                        gamma_a=gamma_a,
                        gamma_b=gamma_b,
                        delta_mean=mean,
                        ci_low=ci_low,
                        ci_high=ci_high,
                        p_value=p,
                        n_pairs=len(seeds),
                    )
                )
    return report


def write_delta_report_csv(rows: Iterable[DeltaRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "algorithm",
                "budget_loc",
                "metric",
                "gamma_a",
                "gamma_b",
                "delta_mean",
                "ci_low",
                "ci_high",
                "p_value",
                "n_pairs",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r.algorithm,
                    format(r.budget_loc, ".9g"),
                    r.metric,
                    format(r.gamma_a, ".9g"),
                    format(r.gamma_b, ".9g"),
                    format(r.delta_mean, ".9g"),
                    format(r.ci_low, ".9g"),
                    format(r.ci_high, ".9g"),
                    format(r.p_value, ".9g"),
                    r.n_pairs,
                ]
            )
