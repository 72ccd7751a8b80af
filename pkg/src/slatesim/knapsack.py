"""Exact 0/1 knapsack solvers used as a static reference for slate building.

The static relaxation of budgeted slate construction: pick the item subset
maximizing total utility subject to total evaluation cost <= budget. The
brute-force enumerator is the ground truth for small n; the dynamic program
handles real-valued costs by rounding them *up* to a resolution grid, so a
returned subset never violates the true budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import DEFAULT_COST_FLOOR, ItemCatalog
from .errors import ValidationError

__all__ = [
    "KnapsackInstance",
    "KnapsackSolution",
    "solve_bruteforce",
    "solve_dp",
    "greedy_ratio_slate",
    "instance_to_json",
    "instance_from_json",
    "solution_to_json",
]

BRUTEFORCE_MAX_ITEMS = 25
DP_MAX_CELLS = 50_000_000


@dataclass(frozen=True)
class KnapsackInstance:
    utilities: np.ndarray
    costs: np.ndarray
    budget: float

    def __post_init__(self) -> None:
        utilities = np.asarray(self.utilities, dtype=np.float64)
        costs = np.asarray(self.costs, dtype=np.float64)
        if utilities.ndim != 1 or costs.shape != utilities.shape:
            raise ValidationError("utilities and costs must be equal-length vectors")
        if not (np.all(np.isfinite(utilities)) and np.all(utilities >= 0)):
            raise ValidationError("utilities must be finite and >= 0")
        if not (np.all(np.isfinite(costs)) and np.all(costs > 0)):
            raise ValidationError("costs must be finite and > 0")
        if not (self.budget >= 0 and math.isfinite(self.budget)):
            raise ValidationError("budget must be finite and >= 0")
        utilities.setflags(write=False)
        costs.setflags(write=False)
        object.__setattr__(self, "utilities", utilities)
        object.__setattr__(self, "costs", costs)

    @property
    def n(self) -> int:
        return int(self.utilities.shape[0])


@dataclass(frozen=True)
class KnapsackSolution:
    selected: tuple[int, ...]
    total_utility: float
    total_cost: float


def _solution_from_indices(instance: KnapsackInstance, indices: tuple[int, ...]) -> KnapsackSolution:
    sel = np.asarray(indices, dtype=np.int64)
    return KnapsackSolution(
        selected=tuple(int(i) for i in indices),
        total_utility=float(instance.utilities[sel].sum()) if sel.size else 0.0,
        total_cost=float(instance.costs[sel].sum()) if sel.size else 0.0,
    )


def _mask_indices(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def solve_bruteforce(instance: KnapsackInstance) -> KnapsackSolution:
    """Enumerate all subsets; ties prefer lower cost, then the
    lexicographically smallest index set."""
    n = instance.n
    if n > BRUTEFORCE_MAX_ITEMS:
        raise ValidationError(
            f"brute force caps at {BRUTEFORCE_MAX_ITEMS} items (2^n subsets); got {n}"
        )
    best: tuple[float, float, tuple[int, ...]] | None = None  # (util, cost, indices)
    chunk = 1 << 20
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        total_cost = np.zeros(masks.shape[0])
        total_util = np.zeros(masks.shape[0])
        for i in range(n):
            bit = ((masks >> i) & 1).astype(np.float64)
            total_cost += bit * instance.costs[i]
            total_util += bit * instance.utilities[i]
        feasible = total_cost <= instance.budget
        if not feasible.any():
            continue
        chunk_util = total_util[feasible].max()
        util_ok = feasible & (total_util == chunk_util)
        chunk_cost = total_cost[util_ok].min()
        ties = masks[util_ok & (total_cost == chunk_cost)]
        chunk_sel = min((_mask_indices(int(m), n) for m in ties))
        if (
            best is None
            or chunk_util > best[0]
            or (chunk_util == best[0] and chunk_cost < best[1])
            or (chunk_util == best[0] and chunk_cost == best[1] and chunk_sel < best[2])
        ):
            best = (chunk_util, chunk_cost, chunk_sel)
    assert best is not None  # the empty subset is always feasible (budget >= 0)
    return _solution_from_indices(instance, best[2])


def solve_dp(instance: KnapsackInstance, resolution: float = 0.1) -> KnapsackSolution:
    """Dynamic program over costs rounded up to multiples of ``resolution``.

    Conservative by construction: scaled costs round up and the capacity
    rounds down, so the returned subset always fits the true budget. Exact
    whenever all costs are already integer multiples of the resolution.
    Ties prefer lower true cost, then earlier items (reconstruction skips a
    later item whenever skipping preserves the achievable optimum).
    """
    if not resolution > 0:
        raise ValidationError("resolution must be > 0")
    n = instance.n
    # guard against float noise in c/res for exact multiples
    scaled = np.ceil(instance.costs / resolution - 1e-9).astype(np.int64)
    scaled = np.maximum(scaled, 1)
    capacity = int(np.floor(instance.budget / resolution + 1e-9))
    if (n + 1) * (capacity + 1) > DP_MAX_CELLS:
        raise ValidationError(
            f"DP table would need {(n + 1) * (capacity + 1)} cells "
            f"(cap {DP_MAX_CELLS}); use a coarser resolution"
        )
    # value tables per item layer, for reconstruction: utility then min true cost
    util = np.full((n + 1, capacity + 1), 0.0)
    cost = np.full((n + 1, capacity + 1), 0.0)
    for i in range(1, n + 1):
        w = scaled[i - 1]
        ui = instance.utilities[i - 1]
        ci = instance.costs[i - 1]
        util[i] = util[i - 1]
        cost[i] = cost[i - 1]
        if w <= capacity:
            take_util = util[i - 1, : capacity - w + 1] + ui
            take_cost = cost[i - 1, : capacity - w + 1] + ci
            dest_util = util[i, w:]
            dest_cost = cost[i, w:]
            better = (take_util > dest_util) | (
                (take_util == dest_util) & (take_cost < dest_cost)
            )
            util[i, w:] = np.where(better, take_util, dest_util)
            cost[i, w:] = np.where(better, take_cost, dest_cost)
    # reconstruct, preferring to skip later items when value allows it
    selected: list[int] = []
    w = capacity
    for i in range(n, 0, -1):
        if util[i, w] == util[i - 1, w] and cost[i, w] == cost[i - 1, w]:
            continue
        selected.append(i - 1)
        w -= scaled[i - 1]
    selected.reverse()
    return _solution_from_indices(instance, tuple(selected))


def greedy_ratio_slate(
    catalog: ItemCatalog,
    budget: float,
    slate_size: int,
    cost_floor: float = DEFAULT_COST_FLOOR,
) -> list[int]:
    """Slate baseline: walk items by relevance-per-second, adding while the
    cumulative cost stays within budget, up to ``slate_size`` items."""
    if slate_size < 1:
        raise ValidationError("slate_size must be >= 1")
    order = catalog.ratio_order(cost_floor)
    slate: list[int] = []
    spent = 0.0
    for item in order:
        if len(slate) == slate_size:
            break
        c = catalog.cost_by_id[item]
        if spent + c > budget:
            break
        slate.append(int(item))
        spent += c
    return slate


def instance_to_json(instance: KnapsackInstance) -> str:
    return json.dumps(
        {
            "utilities": instance.utilities.tolist(),
            "costs": instance.costs.tolist(),
            "budget": instance.budget,
        }
    )


def instance_from_json(text: str | Path, from_path: bool = False) -> KnapsackInstance:
    raw = Path(text).read_text(encoding="utf-8") if from_path else str(text)
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad knapsack instance JSON: {exc}") from exc
    for key in ("utilities", "costs", "budget"):
        if key not in data:
            raise ValidationError(f"knapsack instance is missing {key!r}")
    return KnapsackInstance(
        utilities=np.asarray(data["utilities"], dtype=np.float64),
        costs=np.asarray(data["costs"], dtype=np.float64),
        budget=float(data["budget"]),
    )


def solution_to_json(solution: KnapsackSolution) -> str:
    return json.dumps(
        {
            "selected": list(solution.selected),
            "total_utility": solution.total_utility,
            "total_cost": solution.total_cost,
        }
    )
