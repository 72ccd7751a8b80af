"""Item universe: relevance scores, evaluation costs, and user budgets.

A catalog row is (item_id, sigma, cost): sigma is the probability the user
engages with the item when they examine it, cost is the seconds it takes to
evaluate the item. Initial user budgets come from a median-parameterized
log-normal: u0 = loc * exp(scale * Z) with Z standard normal, so the stated
location is the distribution's median and stays on the same scale as costs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, ValidationError

__all__ = [
    "CostDistribution",
    "BudgetDistribution",
    "RelevanceParams",
    "ItemCatalog",
    "sample_costs",
    "sample_initial_budget",
    "generate_synthetic_catalog",
    "load_catalog",
    "save_catalog",
    "DEFAULT_COST_FLOOR",
]

# Uniform(0, high) cost draws can land arbitrarily close to 0, which makes
# utility-per-second ratios blow up; draws below the floor are clamped to it.
DEFAULT_COST_FLOOR = 0.01

CSV_HEADER = ("item_id", "sigma", "cost")


@dataclass(frozen=True)
class CostDistribution:
    """Uniform(low, high) evaluation-cost model, both bounds in seconds."""

    low: float = 0.0
    high: float = 100.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ConfigError("cost distribution bounds must be finite")
        if self.low < 0:
            raise ConfigError("cost_low must be >= 0")
        if self.low >= self.high:
            raise ConfigError(f"cost_low ({self.low}) must be < cost_high ({self.high})")


@dataclass(frozen=True)
class BudgetDistribution:
    """Initial-budget model: u0 = loc * exp(scale * Z), median = loc seconds."""

    loc: float = 100.0
    scale: float = 0.5

    def __post_init__(self) -> None:
        if not (self.loc > 0 and math.isfinite(self.loc)):
            raise ConfigError("budget loc must be > 0 and finite")
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ConfigError("budget scale must be >= 0 and finite")


@dataclass(frozen=True)
class RelevanceParams:
    """Beta(alpha, beta) relevance model.

    alpha == 0 or beta == 0 select the degenerate limits (all-zero /
    all-one relevance), which the tests use to force deterministic clicks.
    """

    alpha: float = 2.0
    beta: float = 8.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("relevance params must be >= 0")
        if self.alpha == 0 and self.beta == 0:
            raise ConfigError("relevance alpha and beta cannot both be 0")

    @property
    def mean(self) -> float:
        if self.alpha == 0:
            return 0.0
        if self.beta == 0:
            return 1.0
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class ItemCatalog:
    """Immutable item universe; safe to share across parallel workers.

    Rows are kept in construction (file) order. ``sigma_by_id`` / the
    other ``*_by_id`` arrays are indexed by item id regardless of row order.
    """

    item_ids: np.ndarray
    sigmas: np.ndarray
    costs: np.ndarray

    def __post_init__(self) -> None:
        ids = np.asarray(self.item_ids, dtype=np.int64)
        sigmas = np.asarray(self.sigmas, dtype=np.float64)
        costs = np.asarray(self.costs, dtype=np.float64)
        n = ids.shape[0]
        if sigmas.shape != (n,) or costs.shape != (n,):
            raise ValidationError("item_ids, sigmas and costs must have equal length")
        if n == 0:
            raise ValidationError("catalog must contain at least one item")
        order = np.sort(ids)
        if not np.array_equal(order, np.arange(n)):
            dup = ids[np.unique(ids, return_index=True)[1]]
            raise ValidationError(
                "item ids must be unique and contiguous from 0; got "
                f"{n} rows with id range [{ids.min()}, {ids.max()}], {len(np.unique(ids))} distinct"
                + ("" if len(dup) == n else " (duplicates present)")
            )
        bad_sigma = np.flatnonzero(~((sigmas >= 0.0) & (sigmas <= 1.0)))
        if bad_sigma.size:
            r = int(bad_sigma[0])
            raise ValidationError(f"row {r}: sigma {sigmas[r]} outside [0, 1]")
        bad_cost = np.flatnonzero(~((costs > 0.0) & np.isfinite(costs)))
        if bad_cost.size:
            r = int(bad_cost[0])
            raise ValidationError(f"row {r}: cost {costs[r]} must be > 0 and finite")
        for name, arr in (("item_ids", ids), ("sigmas", sigmas), ("costs", costs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        sigma_by_id = np.empty(n, dtype=np.float64)
        cost_by_id = np.empty(n, dtype=np.float64)
        sigma_by_id[ids] = sigmas
        cost_by_id[ids] = costs
        sigma_by_id.setflags(write=False)
        cost_by_id.setflags(write=False)
        object.__setattr__(self, "_sigma_by_id", sigma_by_id)
        object.__setattr__(self, "_cost_by_id", cost_by_id)
        object.__setattr__(self, "_order_cache", {})

    @property
    def n_items(self) -> int:
        return int(self.item_ids.shape[0])

    @property
    def sigma_by_id(self) -> np.ndarray:
        return self._sigma_by_id  # type: ignore[attr-defined]

    @property
    def cost_by_id(self) -> np.ndarray:
        return self._cost_by_id  # type: ignore[attr-defined]

    def items(self) -> Iterator[tuple[int, float, float]]:
        """Yield (item_id, sigma, cost) in row order."""
        for i in range(self.n_items):
            yield int(self.item_ids[i]), float(self.sigmas[i]), float(self.costs[i])

    def sigma_of(self, item_id: int) -> float:
        return float(self._sigma_by_id[item_id])  # type: ignore[attr-defined]

    def cost_of(self, item_id: int) -> float:
        return float(self._cost_by_id[item_id])  # type: ignore[attr-defined]

    def ratio_order(self, cost_floor: float = DEFAULT_COST_FLOOR) -> np.ndarray:
        """Item ids by relevance-per-second descending; ties keep the lower id."""
        cache = self._order_cache  # type: ignore[attr-defined]
        key = ("ratio", float(cost_floor))
        if key not in cache:
            ratio = self.sigma_by_id / np.maximum(self.cost_by_id, cost_floor)
            order = np.argsort(-ratio, kind="stable").astype(np.int32)
            order.setflags(write=False)
            cache[key] = order
        return cache[key]

    def cost_order(self) -> tuple[np.ndarray, np.ndarray]:
        """(item ids by cost ascending, the sorted costs); ties keep the lower id."""
        cache = self._order_cache  # type: ignore[attr-defined]
        if "cost" not in cache:
            order = np.argsort(self.cost_by_id, kind="stable").astype(np.int32)
            sorted_costs = self.cost_by_id[order]
            order.setflags(write=False)
            sorted_costs.setflags(write=False)
            cache["cost"] = (order, sorted_costs)
        return cache["cost"]


def sample_costs(
    n: int,
    dist: CostDistribution,
    rng: np.random.Generator,
    cost_floor: float = DEFAULT_COST_FLOOR,
) -> np.ndarray:
    """Draw n evaluation costs from Uniform(low, high), clamped below at the floor."""
    if n < 0:
        raise ConfigError("n must be >= 0")
    draws = rng.uniform(dist.low, dist.high, size=n)
    return np.maximum(draws, cost_floor)


def sample_initial_budget(
    dist: BudgetDistribution,
    rng: np.random.Generator,
    size: int | None = None,
) -> float | np.ndarray:
    """Draw initial budgets u0 = loc * exp(scale * Z); scalar when size is None."""
    z = rng.standard_normal() if size is None else rng.standard_normal(size)
    u0 = dist.loc * np.exp(dist.scale * z)
    return float(u0) if size is None else u0


def generate_synthetic_catalog(
    n: int,
    relevance: RelevanceParams,
    cost_dist: CostDistribution,
    rng: np.random.Generator,
    cost_floor: float = DEFAULT_COST_FLOOR,
) -> ItemCatalog:
    """Build an n-item catalog with Beta relevances and Uniform costs."""
    if n < 1:
        raise ConfigError("catalog size must be >= 1")
    if relevance.alpha == 0:
        sigmas = np.zeros(n)
    elif relevance.beta == 0:
        sigmas = np.ones(n)
    else:
        sigmas = rng.beta(relevance.alpha, relevance.beta, size=n)
    costs = sample_costs(n, cost_dist, rng, cost_floor=cost_floor)
    return ItemCatalog(item_ids=np.arange(n, dtype=np.int64), sigmas=sigmas, costs=costs)


def save_catalog(catalog: ItemCatalog, path: str | Path) -> None:
    """Write the catalog as CSV (header item_id,sigma,cost; 9 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for item_id, sigma, cost in catalog.items():
            writer.writerow([item_id, format(sigma, ".9g"), format(cost, ".9g")])


def load_catalog(path: str | Path) -> ItemCatalog:
    """Read and validate a catalog CSV; rows keep file order."""
    path = Path(path)
    ids: list[int] = []
    sigmas: list[float] = []
    costs: list[float] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValidationError(
                f"{path}: expected header {','.join(CSV_HEADER)}, got {header}"
            )
        for row_no, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}: row {row_no}: expected 3 columns, got {len(row)}")
            try:
                item_id = int(row[0])
                sigma = float(row[1])
                cost = float(row[2])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {row_no}: {exc}") from exc
            if not 0.0 <= sigma <= 1.0:
                raise ValidationError(f"{path}: row {row_no}: sigma {sigma} outside [0, 1]")
            if not (cost > 0.0 and math.isfinite(cost)):
                raise ValidationError(f"{path}: row {row_no}: cost {cost} must be > 0 and finite")
            ids.append(item_id)
            sigmas.append(sigma)
            costs.append(cost)
    if not ids:
        raise ValidationError(f"{path}: catalog has no rows")
    id_arr = np.asarray(ids, dtype=np.int64)
    seen: dict[int, int] = {}
    for row_no, item_id in enumerate(ids):
        if item_id in seen:
            raise ValidationError(
                f"{path}: row {row_no}: duplicate item_id {item_id} (first at row {seen[item_id]})"
            )
        seen[item_id] = row_no
    try:
        return ItemCatalog(item_ids=id_arr, sigmas=np.asarray(sigmas), costs=np.asarray(costs))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
