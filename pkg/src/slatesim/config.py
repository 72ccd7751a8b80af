"""Run configuration: a flat, JSON-compatible key-value document.

Simulation keys carry their conventional names (``num_users``, ``num_items``,
``slate_size``, ``cost_low``, ``cost_high``, ``user_budget``,
``user_budget_scale``, ``epsilon``, ``discount_factor``); the remaining keys
configure the artifact itself (response/charge modes, candidate generation,
regressor, loop sizes, sweep grids). Resolution order for a value:
command-line flag > ``SLATESIM_<KEY>`` environment variable > config file >
built-in default.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

__all__ = ["RunConfig", "load_config", "save_config", "ENV_PREFIX"]

ENV_PREFIX = "SLATESIM_"

RESPONSE_MODES = ("bernoulli_per_slot", "categorical_per_slate")
CHARGE_MODES = ("charge_on_click", "charge_on_examination")
ALGORITHMS = ("sarsa", "qlearning", "montecarlo")
REGRESSORS = ("gbrt", "ridge", "lookup")


@dataclass(frozen=True)
class RunConfig:
    """All knobs for a single run or a sweep. Immutable after construction."""

    # simulation parameters
    num_users: int = 150
    num_items: int = 142998
    slate_size: int = 30
    cost_low: float = 0.0
    cost_high: float = 100.0
    user_budget: float = 100.0
    user_budget_scale: float = 0.5
    epsilon: float = 0.1
    discount_factor: float = 0.8

    # environment behaviour
    response_mode: str = "bernoulli_per_slot"
    # experiments charge budget when an item is examined, so that slate
    # composition actually competes for user time; the environment API's
    # literal transition (charge only on click) stays available.
    charge_mode: str = "charge_on_examination"
    cost_floor: float = 0.01
    no_choice_weight: float | None = None  # None -> cascade abandon mass

    # synthetic catalog
    relevance_alpha: float = 2.0
    relevance_beta: float = 8.0
    catalog_path: str | None = None  # load scores from CSV instead of sampling

    # agent / training loop
    algorithm: str = "qlearning"
    regressor: str = "gbrt"
    iterations: int = 8
    episodes_per_iteration: int = 50
    eval_episodes: int = 500
    diag_episodes: int = 16
    candidate_top_m: int = 50
    candidate_random_r: int = 10
    gbrt_rounds: int = 100
    gbrt_max_depth: int = 3
    gbrt_learning_rate: float = 0.1
    gbrt_min_samples_leaf: int = 1
    gbrt_max_bins: int = 256
    ridge_alpha: float = 1.0

    # knapsack oracle
    resolution: float = 0.1

    # sweep grids
    algorithms: tuple[str, ...] = ("sarsa", "qlearning", "montecarlo")
    gammas: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    budget_locs: tuple[float, ...] = (100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0)
    seeds: tuple[int, ...] = tuple(range(20))
    workers: int = 1

    master_seed: int = 0

    def __post_init__(self) -> None:
        _check(self.num_users >= 1, "num_users", "must be >= 1")
        _check(self.num_items >= 1, "num_items", "must be >= 1")
        _check(self.slate_size >= 1, "slate_size", "must be >= 1")
        _check(self.cost_low >= 0, "cost_low", "must be >= 0")
        _check(self.cost_high > self.cost_low, "cost_high", "must exceed cost_low")
        _check(self.user_budget > 0, "user_budget", "must be > 0")
        _check(self.user_budget_scale >= 0, "user_budget_scale", "must be >= 0")
        _check(0.0 <= self.epsilon <= 1.0, "epsilon", "must be in [0, 1]")
        _check(0.0 <= self.discount_factor <= 1.0, "discount_factor", "must be in [0, 1]")
        _check(self.response_mode in RESPONSE_MODES, "response_mode", f"must be one of {RESPONSE_MODES}")
        _check(self.charge_mode in CHARGE_MODES, "charge_mode", f"must be one of {CHARGE_MODES}")
        _check(self.cost_floor > 0, "cost_floor", "must be > 0")
        if self.no_choice_weight is not None:
            _check(self.no_choice_weight >= 0, "no_choice_weight", "must be >= 0")
        _check(self.relevance_alpha >= 0, "relevance_alpha", "must be >= 0")
        _check(self.relevance_beta >= 0, "relevance_beta", "must be >= 0")
        _check(
            self.relevance_alpha + self.relevance_beta > 0,
            "relevance_alpha",
            "relevance_alpha and relevance_beta cannot both be 0",
        )
        _check(self.algorithm in ALGORITHMS, "algorithm", f"must be one of {ALGORITHMS}")
        _check(self.regressor in REGRESSORS, "regressor", f"must be one of {REGRESSORS}")
        _check(self.iterations >= 1, "iterations", "must be >= 1")
        _check(self.episodes_per_iteration >= 1, "episodes_per_iteration", "must be >= 1")
        _check(self.eval_episodes >= 1, "eval_episodes", "must be >= 1")
        _check(self.diag_episodes >= 0, "diag_episodes", "must be >= 0")
        _check(
            self.candidate_top_m >= 0 and self.candidate_random_r >= 0,
            "candidate_top_m",
            "candidate counts must be >= 0",
        )
        _check(
            self.candidate_top_m + self.candidate_random_r >= 1,
            "candidate_top_m",
            "candidate_top_m + candidate_random_r must be >= 1",
        )
        _check(self.gbrt_rounds >= 1, "gbrt_rounds", "must be >= 1")
        _check(self.gbrt_max_depth >= 1, "gbrt_max_depth", "must be >= 1")
        _check(self.gbrt_learning_rate > 0, "gbrt_learning_rate", "must be > 0")
        _check(self.gbrt_min_samples_leaf >= 1, "gbrt_min_samples_leaf", "must be >= 1")
        _check(2 <= self.gbrt_max_bins <= 256, "gbrt_max_bins", "must be in [2, 256]")
        _check(self.ridge_alpha >= 0, "ridge_alpha", "must be >= 0")
        _check(self.resolution > 0, "resolution", "must be > 0")
        algos = tuple(self.algorithms)
        _check(len(algos) >= 1, "algorithms", "must be nonempty")
        for a in algos:
            _check(a in ALGORITHMS, "algorithms", f"unknown algorithm {a!r}")
        gammas = tuple(float(g) for g in self.gammas)
        _check(len(gammas) >= 1, "gammas", "must be nonempty")
        for g in gammas:
            _check(0.0 <= g <= 1.0, "gammas", "every gamma must be in [0, 1]")
        locs = tuple(float(b) for b in self.budget_locs)
        _check(len(locs) >= 1, "budget_locs", "must be nonempty")
        for b in locs:
            _check(b > 0, "budget_locs", "every budget location must be > 0")
        seeds = tuple(int(s) for s in self.seeds)
        _check(len(seeds) >= 1, "seeds", "must be nonempty")
        _check(len(set(seeds)) == len(seeds), "seeds", "must be unique")
        _check(self.workers >= 1, "workers", "must be >= 1")
        # normalize sequence fields to tuples so configs hash/compare cleanly
        object.__setattr__(self, "algorithms", algos)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "budget_locs", locs)
        object.__setattr__(self, "seeds", seeds)

    def replace(self, **changes: Any) -> "RunConfig":
        """Return a copy with the given fields changed (re-validated)."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = set(cls.field_names())
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key: {key!r}")
        return cls(**data)


def _check(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConfigError(f"config key {key!r}: {message}")


def _coerce(key: str, raw: str) -> Any:
    """Parse an environment-variable override with JSON semantics."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings (e.g. SLATESIM_ALGORITHM=sarsa)


def _env_overrides(environ: dict[str, str]) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for name in RunConfig.field_names():
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            overrides[name] = _coerce(name, raw)
    return overrides


def load_config(
    path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    use_env: bool = True,
) -> RunConfig:
    """Build a RunConfig from a JSON file plus env-var and explicit overrides.

    An empty or missing document yields the built-in defaults. Unknown keys
    and out-of-range values raise ConfigError naming the key.
    """
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8").strip()
        if text:
            try:
                loaded = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
            if not isinstance(loaded, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
            data.update(loaded)
    if use_env:
        data.update(_env_overrides(dict(os.environ)))
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
