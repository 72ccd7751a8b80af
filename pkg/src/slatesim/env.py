"""The slate MDP: states, budget-gated rewards, and episode rollouts.

One episode builds one slate, slot by slot. The state tracks the remaining
user budget, the item prefix placed so far, and the cascade survival
probability of the prefix. A slot's reward can only be 1 if the item was
affordable (cost <= remaining budget) at its turn.

Two response modes:

* ``bernoulli_per_slot`` — each examined slot draws an independent click
  with probability sigma; several slots may click in one slate.
* ``categorical_per_slate`` — the slate is built first, then a single
  observation (one clicked slot, or nothing) is drawn from the cascade
  selection probabilities plus a no-choice mass.

Two charge modes:

* ``charge_on_click`` — budget drops by the item cost only when it clicks.
* ``charge_on_examination`` — every affordable (hence examined) item costs
  its evaluation time whether or not it clicks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from .catalog import ItemCatalog
from .choice import selection_probabilities
from .errors import ContractError, ValidationError

__all__ = [
    "SlateState",
    "StepOutcome",
    "EpisodeLog",
    "reset",
    "affordable_items",
    "step",
    "rollout_slate",
    "write_episode_logs",
    "read_episode_logs",
]

RESPONSE_MODES = ("bernoulli_per_slot", "categorical_per_slate")
CHARGE_MODES = ("charge_on_click", "charge_on_examination")

PolicyFn = Callable[["SlateState", ItemCatalog, np.random.Generator], "int | None"]


@dataclass(frozen=True)
class SlateState:
    """MDP state before choosing the item for slot ``slot``."""

    budget_remaining: float
    prefix: tuple[int, ...]
    slot: int
    survival: float
    prefix_cost: float = 0.0  # summed evaluation cost of the prefix

    def __post_init__(self) -> None:
        if self.budget_remaining < 0:
            raise ValueError("budget_remaining must be >= 0")
        if self.slot != len(self.prefix):
            raise ValueError("slot index must equal prefix length")
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError("survival must be in [0, 1]")
        if len(set(self.prefix)) != len(self.prefix):
            raise ValueError("prefix must not contain duplicate items")


@dataclass(frozen=True)
class StepOutcome:
    next_state: SlateState
    reward: int
    clicked: bool
    affordable: bool

    def __post_init__(self) -> None:
        if self.reward == 1 and not (self.clicked and self.affordable):
            raise ValueError("reward 1 requires a click on an affordable item")
        if not self.affordable and self.reward != 0:
            raise ValueError("unaffordable items cannot be rewarded")


@dataclass
class EpisodeLog:
    """Full record of one slate episode."""

    user_id: int
    initial_budget: float
    actions: list[int]
    sigmas: list[float]
    costs: list[float]
    rewards: list[int]
    click_vector: list[int]
    budget_path: list[float]
    response_mode: str
    charge_mode: str
    seed: int

    def total_clicks(self) -> int:
        return int(sum(self.rewards))

    def validate(self) -> None:
        """Check internal consistency; raises ValidationError on any breach."""
        k = len(self.actions)
        if not (len(self.sigmas) == len(self.costs) == len(self.rewards) == len(self.click_vector) == k):
            raise ValidationError("per-slot fields must have equal length")
        if len(self.budget_path) != k + 1:
            raise ValidationError("budget_path must have one more entry than slots")
        if len(set(self.actions)) != k:
            raise ValidationError("episode repeats an item")
        if self.budget_path[0] != self.initial_budget:
            raise ValidationError("budget_path must start at the initial budget")
        if self.response_mode == "categorical_per_slate" and sum(self.rewards) > 1:
            raise ValidationError("categorical episodes allow at most one click")
        for j in range(k):
            r = self.rewards[j]
            if r not in (0, 1) or self.click_vector[j] != r:
                raise ValidationError(f"slot {j}: bad reward/click pair ({r}, {self.click_vector[j]})")
            u = self.budget_path[j]
            affordable = self.costs[j] <= u
            if r == 1 and not affordable:
                raise ValidationError(f"slot {j}: reward without affordability (cost {self.costs[j]} > {u})")
            if self.charge_mode == "charge_on_click":
                expected = u - self.costs[j] * r
            else:
                expected = u - self.costs[j] * (1 if affordable else 0)
            if self.budget_path[j + 1] != expected:
                raise ValidationError(
                    f"slot {j}: budget transition mismatch ({self.budget_path[j + 1]} != {expected})"
                )

    def to_json_line(self) -> str:
        payload = {
            "user_id": self.user_id,
            "initial_budget": self.initial_budget,
            "actions": self.actions,
            "sigmas": self.sigmas,
            "costs": self.costs,
            "rewards": self.rewards,
            "click_vector": self.click_vector,
            "budget_path": self.budget_path,
            "response_mode": self.response_mode,
            "charge_mode": self.charge_mode,
            "seed": self.seed,
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "EpisodeLog":
        data = json.loads(line)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(f"bad episode record: {exc}") from exc


def write_episode_logs(logs: Iterable[EpisodeLog], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.to_json_line() + "\n")


def read_episode_logs(path: str | Path) -> Iterator[EpisodeLog]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EpisodeLog.from_json_line(line)


def reset(u0: float, rng: np.random.Generator | None = None) -> SlateState:
    """Fresh state for a user with initial budget u0 > 0."""
    if not u0 > 0:
        raise ValueError(f"initial budget must be > 0, got {u0}")
    return SlateState(budget_remaining=float(u0), prefix=(), slot=0, survival=1.0, prefix_cost=0.0)


def affordable_items(state: SlateState, catalog: ItemCatalog) -> set[int]:
    """Ids of items the user can still evaluate: cost <= budget, not yet shown."""
    mask = catalog.cost_by_id <= state.budget_remaining
    ids = set(np.flatnonzero(mask).tolist())
    ids.difference_update(state.prefix)
    return ids


def step(
    state: SlateState,
    item_id: int,
    catalog: ItemCatalog,
    rng: np.random.Generator,
    response_mode: str = "bernoulli_per_slot",
    charge_mode: str = "charge_on_click",
    slate_size: int | None = None,
) -> StepOutcome:
    """Place ``item_id`` at the current slot and resolve its reward.

    In categorical mode the reward is always 0 here; the single click is
    drawn once per slate by rollout_slate after the slate is complete.
    """
    if response_mode not in RESPONSE_MODES:
        raise ValueError(f"unknown response_mode {response_mode!r}")
    if charge_mode not in CHARGE_MODES:
        raise ValueError(f"unknown charge_mode {charge_mode!r}")
    if item_id in state.prefix:
        raise ContractError(f"item {item_id} already placed in this slate")
    if slate_size is not None and state.slot >= slate_size:
        raise ContractError(f"slot {state.slot} overflows slate of size {slate_size}")
    if not 0 <= item_id < catalog.n_items:
        raise ContractError(f"item {item_id} not in catalog")
    sigma = catalog.sigma_by_id[item_id]
    cost = catalog.cost_by_id[item_id]
    u = state.budget_remaining
    affordable = bool(cost <= u)
    if response_mode == "bernoulli_per_slot":
        reward = int(affordable and rng.random() < sigma)
    else:
        reward = 0
    if charge_mode == "charge_on_click":
        u_next = u - cost * reward
    else:
        u_next = u - cost * (1 if affordable else 0)
    next_state = SlateState(
        budget_remaining=float(u_next),
        prefix=state.prefix + (int(item_id),),
        slot=state.slot + 1,
        survival=float(state.survival * (1.0 - sigma)),
        prefix_cost=float(state.prefix_cost + cost),
    )
    return StepOutcome(next_state=next_state, reward=reward, clicked=bool(reward), affordable=affordable)


def _sample_slate_click(
    betas: np.ndarray,
    abandon: float,
    eligible: np.ndarray,
    no_choice_weight: float | None,
    rng: np.random.Generator,
) -> int | None:
    """One categorical draw over eligible slots plus the no-choice outcome."""
    weights = np.where(eligible, betas, 0.0)
    nc = abandon if no_choice_weight is None else float(no_choice_weight)
    full = np.concatenate((weights, [nc]))
    total = full.sum()
    if total <= 0:
        return None  # nothing selectable and no abandon mass: treat as no choice
    k = int(rng.choice(full.shape[0], p=full / total))
    return None if k == betas.shape[0] else k


def rollout_slate(
    policy: PolicyFn,
    u0: float,
    catalog: ItemCatalog,
    slate_size: int,
    rng: np.random.Generator,
    response_mode: str = "bernoulli_per_slot",
    charge_mode: str = "charge_on_click",
    no_choice_weight: float | None = None,
    user_id: int = 0,
    seed: int = 0,
) -> EpisodeLog:
    """Roll one episode: up to ``slate_size`` policy picks, then the log.

    The policy returns the next item id, or None once it has nothing left
    to place (e.g. no affordable candidates). In categorical mode the click
    is drawn after the slate is built and the budget path is rebuilt from
    the realized click.
    """
    if slate_size < 1:
        raise ValueError("slate_size must be >= 1")
    state = reset(u0)
    actions: list[int] = []
    sigmas: list[float] = []
    costs: list[float] = []
    rewards: list[int] = []
    afford_flags: list[bool] = []
    budget_path: list[float] = [state.budget_remaining]
    while state.slot < slate_size:
        item = policy(state, catalog, rng)
        if item is None:
            break
        outcome = step(
            state,
            item,
            catalog,
            rng,
            response_mode=response_mode,
            charge_mode=charge_mode,
            slate_size=slate_size,
        )
        actions.append(int(item))
        sigmas.append(float(catalog.sigma_by_id[item]))
        costs.append(float(catalog.cost_by_id[item]))
        rewards.append(outcome.reward)
        afford_flags.append(outcome.affordable)
        state = outcome.next_state
        budget_path.append(state.budget_remaining)

    if response_mode == "categorical_per_slate" and actions:
        profile = selection_probabilities(np.asarray(sigmas))
        clicked_slot = _sample_slate_click(
            profile.betas, profile.abandon, np.asarray(afford_flags), no_choice_weight, rng
        )
        if clicked_slot is not None:
            rewards[clicked_slot] = 1
        if charge_mode == "charge_on_click":
            # rebuild the path now that the single click is known
            budget_path = [float(u0)]
            for j in range(len(actions)):
                budget_path.append(budget_path[j] - costs[j] * rewards[j])

    return EpisodeLog(
        user_id=user_id,
        initial_budget=float(u0),
        actions=actions,
        sigmas=sigmas,
        costs=costs,
        rewards=rewards,
        click_vector=list(rewards),
        budget_path=budget_path,
        response_mode=response_mode,
        charge_mode=charge_mode,
        seed=seed,
    )
