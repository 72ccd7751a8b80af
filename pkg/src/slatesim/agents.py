"""Value-based slate controllers.

The training loop is batch fitted value iteration: roll out episodes under
the current epsilon-greedy policy (uniform-random on the first iteration),
store every transition, recompute targets for the whole replay with the
latest value model, and refit the model from scratch. Targets come in three
flavours: on-policy one-step (uses the action actually taken next),
off-policy one-step (max over the next state's candidate actions), and
full discounted returns.

Episodes are rolled in lockstep batches (one numpy/numba call per slot for
the whole batch), which is what makes desk-scale sweeps affordable; the
single-episode API in ``env`` implements the same dynamics step by step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ._kernels import build_candidates
from .catalog import DEFAULT_COST_FLOOR, BudgetDistribution, ItemCatalog, sample_initial_budget
from .choice import selection_probabilities
from .config import RunConfig
from .env import EpisodeLog, SlateState
from .errors import ContractError, TrainingError
from .regressors import GradientBoostedTrees, make_regressor, regressor_from_payload, regressor_to_payload

__all__ = [
    "ALGORITHMS",
    "FEATURE_NAMES",
    "featurize",
    "featurize_item",
    "candidate_actions",
    "epsilon_greedy_select",
    "sarsa_target",
    "qlearning_target",
    "monte_carlo_returns",
    "TrainConfig",
    "TrainedPolicy",
    "IterationDiagnostics",
    "train",
    "evaluate_policy",
    "predict_q",
    "save_policy",
    "load_policy",
    "write_diagnostics_csv",
]

ALGORITHMS = ("sarsa", "qlearning", "montecarlo")

FEATURE_NAMES = (
    "budget_remaining",
    "slot",
    "survival",
    "prefix_cost",
    "sigma",
    "cost",
    "conditional_beta",
    "utility_per_second",
)


def featurize(
    state: SlateState,
    sigma: float,
    cost: float,
    cost_floor: float = DEFAULT_COST_FLOOR,
) -> np.ndarray:
    """Fixed 8-component feature vector for a (state, item) pair."""
    return np.array(
        [
            state.budget_remaining,
            float(state.slot),
            state.survival,
            state.prefix_cost,
            sigma,
            cost,
            sigma * state.survival,
            sigma / max(cost, cost_floor),
        ],
        dtype=np.float64,
    )


def featurize_item(
    state: SlateState,
    item_id: int,
    catalog: ItemCatalog,
    cost_floor: float = DEFAULT_COST_FLOOR,
) -> np.ndarray:
    return featurize(state, catalog.sigma_by_id[item_id], catalog.cost_by_id[item_id], cost_floor)


def _draw_random_affordable(
    u: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
    cost_order: np.ndarray,
    sorted_costs: np.ndarray,
) -> np.ndarray:
    """Uniform draws (with replacement) from each row's affordable item set."""
    n = u.shape[0]
    if n_draws == 0:
        return np.empty((n, 0), dtype=np.int32)
    m = np.searchsorted(sorted_costs, u, side="right")
    unif = rng.random((n, n_draws))
    j = np.minimum((unif * m[:, None]).astype(np.int64), np.maximum(m - 1, 0)[:, None])
    ids = cost_order[j].astype(np.int32)
    ids[m == 0] = -1
    return ids


def candidate_actions(
    state: SlateState,
    catalog: ItemCatalog,
    top_m: int,
    random_r: int,
    rng: np.random.Generator,
    cost_floor: float = DEFAULT_COST_FLOOR,
) -> np.ndarray:
    """Candidate items for the current slot, ordered; empty when none affordable.

    The union of the best ``top_m`` affordable items by relevance-per-second
    and ``random_r`` uniform draws from the affordable set, minus anything
    already placed. An empty result signals a terminal state.
    """
    if top_m < 0 or random_r < 0 or top_m + random_r < 1:
        raise ContractError("top_m and random_r must be >= 0 and sum to >= 1")
    u = np.array([state.budget_remaining], dtype=np.float64)
    plen = np.array([len(state.prefix)], dtype=np.int64)
    prefix = np.full((1, max(1, len(state.prefix))), -1, dtype=np.int32)
    if state.prefix:
        prefix[0, : len(state.prefix)] = state.prefix
    cost_order, sorted_costs = catalog.cost_order()
    rand_ids = _draw_random_affordable(u, random_r, rng, cost_order, sorted_costs)
    out = np.full((1, top_m + random_r), -1, dtype=np.int32)
    counts = build_candidates(
        u, prefix, plen, catalog.ratio_order(cost_floor), catalog.cost_by_id, top_m, rand_ids, out
    )
    return out[0, : counts[0]].astype(np.int64)


def epsilon_greedy_select(
    q_values: Sequence[float],
    candidates: Sequence[int],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Argmax of q over candidates (ties: lowest item id), exploring w.p. epsilon."""
    q = np.asarray(q_values, dtype=np.float64)
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0:
        raise ContractError("candidate set is empty")
    if q.shape != cand.shape:
        raise ContractError(f"q_values shape {q.shape} != candidates shape {cand.shape}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(cand[rng.integers(cand.size)])
    best = q.max()
    return int(cand[q == best].min())


def sarsa_target(reward: float, gamma: float, q_next_taken: float, terminal: bool) -> float:
    """On-policy one-step backup: r + gamma * Q(s', a_taken')."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    return float(reward) if terminal else float(reward + gamma * q_next_taken)


def qlearning_target(reward: float, gamma: float, q_next_max: float, terminal: bool) -> float:
    """Off-policy one-step backup: r + gamma * max_a Q(s', a)."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    return float(reward) if terminal else float(reward + gamma * q_next_max)


def monte_carlo_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Discounted suffix returns G_k = r_k + gamma * G_{k+1}."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    r = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(r)
    acc = 0.0
    for k in range(r.size - 1, -1, -1):
        acc = r[k] + gamma * acc
        out[k] = acc
    return out


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run (a single sweep cell)."""

    algorithm: str = "qlearning"
    gamma: float = 0.8
    epsilon: float = 0.1
    iterations: int = 8
    episodes_per_iteration: int = 50
    slate_size: int = 30
    response_mode: str = "bernoulli_per_slot"
    charge_mode: str = "charge_on_examination"
    top_m: int = 50
    random_r: int = 10
    num_users: int = 150
    regressor: str = "gbrt"
    regressor_params: Mapping[str, Any] = field(default_factory=dict)
    diag_episodes: int = 16
    cost_floor: float = DEFAULT_COST_FLOOR
    no_choice_weight: float | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.iterations < 1 or self.episodes_per_iteration < 1:
            raise ValueError("iterations and episodes_per_iteration must be >= 1")
        if self.slate_size < 1 or self.num_users < 1:
            raise ValueError("slate_size and num_users must be >= 1")
        if self.top_m < 0 or self.random_r < 0 or self.top_m + self.random_r < 1:
            raise ValueError("top_m + random_r must be >= 1")

    @classmethod
    def from_run_config(cls, cfg: RunConfig, **overrides: Any) -> "TrainConfig":
        params = dict(
            algorithm=cfg.algorithm,
            gamma=cfg.discount_factor,
            epsilon=cfg.epsilon,
            iterations=cfg.iterations,
            episodes_per_iteration=cfg.episodes_per_iteration,
            slate_size=cfg.slate_size,
            response_mode=cfg.response_mode,
            charge_mode=cfg.charge_mode,
            top_m=cfg.candidate_top_m,
            random_r=cfg.candidate_random_r,
            num_users=cfg.num_users,
            regressor=cfg.regressor,
            regressor_params=_regressor_params(cfg),
            diag_episodes=cfg.diag_episodes,
            cost_floor=cfg.cost_floor,
            no_choice_weight=cfg.no_choice_weight,
        )
        params.update(overrides)
        return cls(**params)


def _regressor_params(cfg: RunConfig) -> dict[str, Any]:
    if cfg.regressor == "gbrt":
        return {
            "rounds": cfg.gbrt_rounds,
            "max_depth": cfg.gbrt_max_depth,
            "learning_rate": cfg.gbrt_learning_rate,
            "min_samples_leaf": cfg.gbrt_min_samples_leaf,
            "max_bins": cfg.gbrt_max_bins,
        }
    if cfg.regressor == "ridge":
        return {"alpha": cfg.ridge_alpha}
    return {}


@dataclass
class TrainedPolicy:
    """A fitted value model plus the selection rule around it."""

    regressor: Any
    algorithm: str
    gamma: float
    epsilon: float
    top_m: int
    random_r: int
    slate_size: int
    cost_floor: float = DEFAULT_COST_FLOOR

    def predict_q(self, state: SlateState, item_id: int, catalog: ItemCatalog) -> float:
        x = featurize_item(state, item_id, catalog, self.cost_floor)
        return float(self.regressor.predict(x.reshape(1, -1))[0])

    def select_action(
        self,
        state: SlateState,
        catalog: ItemCatalog,
        rng: np.random.Generator,
        epsilon: float | None = None,
    ) -> int | None:
        """Pick the next item, or None when nothing is affordable."""
        cand = candidate_actions(state, catalog, self.top_m, self.random_r, rng, self.cost_floor)
        if cand.size == 0:
            return None
        X = np.stack([featurize_item(state, i, catalog, self.cost_floor) for i in cand])
        q = self.regressor.predict(X)
        eps = self.epsilon if epsilon is None else epsilon
        return epsilon_greedy_select(q, cand, eps, rng)

    def as_policy(self, epsilon: float | None = None):
        """Adapter for env.rollout_slate."""

        def policy(state: SlateState, catalog: ItemCatalog, rng: np.random.Generator) -> int | None:
            return self.select_action(state, catalog, rng, epsilon=epsilon)

        return policy


def predict_q(policy: TrainedPolicy, state: SlateState, item_id: int, catalog: ItemCatalog) -> float:
    return policy.predict_q(state, item_id, catalog)


POLICY_FORMAT = "slatesim-policy"
POLICY_VERSION = 1


def save_policy(policy: TrainedPolicy, path: str | Path) -> None:
    payload = {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "algorithm": policy.algorithm,
        "gamma": policy.gamma,
        "epsilon": policy.epsilon,
        "candidate_params": {"top_m": policy.top_m, "random_r": policy.random_r},
        "slate_size": policy.slate_size,
        "cost_floor": policy.cost_floor,
        "regressor": regressor_to_payload(policy.regressor),
    }
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_policy(path: str | Path) -> TrainedPolicy:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != POLICY_FORMAT or payload.get("version") != POLICY_VERSION:
        raise ValueError(f"{path}: not a version-{POLICY_VERSION} {POLICY_FORMAT} file")
    return TrainedPolicy(
        regressor=regressor_from_payload(payload["regressor"]),
        algorithm=payload["algorithm"],
        gamma=payload["gamma"],
        epsilon=payload["epsilon"],
        top_m=payload["candidate_params"]["top_m"],
        random_r=payload["candidate_params"]["random_r"],
        slate_size=payload["slate_size"],
        cost_floor=payload["cost_floor"],
    )


@dataclass
class IterationDiagnostics:
    iteration: int
    mean_target: float
    td_mse: float
    eval_play_rate: float


def write_diagnostics_csv(diags: Sequence[IterationDiagnostics], path: str | Path) -> None:
    lines = ["iteration,mean_target,td_mse,eval_play_rate"]
    for d in diags:
        lines.append(
            f"{d.iteration},{d.mean_target:.9g},{d.td_mse:.9g},{d.eval_play_rate:.9g}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class _Batch:
    """Flat per-transition arrays for one rollout batch (slot-major order)."""

    episode: np.ndarray      # episode index within the batch
    slot: np.ndarray         # slot index, float for featurization
    u: np.ndarray            # budget before the slot
    surv: np.ndarray         # survival before the slot
    pcost: np.ndarray        # prefix cost before the slot
    cand: np.ndarray         # (n, C) candidate ids, -1 padded
    chosen: np.ndarray       # chosen item id
    sigma: np.ndarray        # chosen item relevance
    cost: np.ndarray         # chosen item cost
    reward: np.ndarray       # realized reward
    next_index: np.ndarray   # flat index of the next transition, -1 if terminal
    X: np.ndarray            # (n, 8) features of the (state, chosen) pair
    mc_return: np.ndarray    # discounted suffix returns

    @property
    def n(self) -> int:
        return int(self.episode.shape[0])


class _BatchEngine:
    """Lockstep batched episode roller over one catalog."""

    def __init__(
        self,
        catalog: ItemCatalog,
        slate_size: int,
        top_m: int,
        random_r: int,
        response_mode: str,
        charge_mode: str,
        cost_floor: float,
        no_choice_weight: float | None,
    ):
        self.catalog = catalog
        self.slate_size = slate_size
        self.top_m = top_m
        self.random_r = random_r
        self.response_mode = response_mode
        self.charge_mode = charge_mode
        self.cost_floor = cost_floor
        self.no_choice_weight = no_choice_weight
        self.ratio_order = catalog.ratio_order(cost_floor)
        self.cost_order, self.sorted_costs = catalog.cost_order()
        self.n_cand = top_m + random_r

    def _candidate_q(self, regressor, u, slot, surv, pcost, cand) -> np.ndarray:
        """(n, C) q-values; padding columns are -inf."""
        if isinstance(regressor, GradientBoostedTrees):
            return regressor.predict_candidates(
                u, slot, surv, pcost, cand,
                self.catalog.sigma_by_id, self.catalog.cost_by_id, self.cost_floor,
            )
        valid = cand >= 0
        ids = np.where(valid, cand, 0)
        sig = self.catalog.sigma_by_id[ids]
        cst = self.catalog.cost_by_id[ids]
        X = np.empty(cand.shape + (8,), dtype=np.float64)
        X[..., 0] = u[:, None]
        X[..., 1] = slot[:, None]
        X[..., 2] = surv[:, None]
        X[..., 3] = pcost[:, None]
        X[..., 4] = sig
        X[..., 5] = cst
        X[..., 6] = sig * surv[:, None]
        X[..., 7] = sig / np.maximum(cst, self.cost_floor)
        q = regressor.predict(X.reshape(-1, 8)).reshape(cand.shape)
        return np.where(valid, q, -np.inf)

    def rollout(
        self,
        u0s: np.ndarray,
        rng: np.random.Generator,
        epsilon: float,
        regressor,
        gamma: float,
        user_ids: np.ndarray | None = None,
        seed_tag: int = 0,
        collect_logs: bool = False,
    ) -> tuple[_Batch | None, list[EpisodeLog]]:
        """Roll a batch of episodes in lockstep; returns transitions and logs."""
        E = int(u0s.shape[0])
        K = self.slate_size
        cat = self.catalog
        u = np.asarray(u0s, dtype=np.float64).copy()
        surv = np.ones(E)
        pcost = np.zeros(E)
        prefix = np.full((E, K), -1, dtype=np.int32)
        plen = np.zeros(E, dtype=np.int64)
        active = np.arange(E)

        blocks: list[dict[str, np.ndarray]] = []
        for k in range(K):
            if active.size == 0:
                break
            ua = u[active]
            rand_ids = _draw_random_affordable(ua, self.random_r, rng, self.cost_order, self.sorted_costs)
            cand = np.full((active.size, self.n_cand), -1, dtype=np.int32)
            counts = build_candidates(
                ua, prefix[active], plen[active], self.ratio_order,
                cat.cost_by_id, self.top_m, rand_ids, cand,
            )
            has = counts > 0
            active = active[has]
            if active.size == 0:
                break
            cand = cand[has]
            counts = counts[has]
            ua = u[active]

            eps_eff = 1.0 if regressor is None else epsilon
            slot_arr = np.full(active.size, float(k))
            if regressor is None:
                q = np.zeros(cand.shape)
            else:
                q = self._candidate_q(regressor, ua, slot_arr, surv[active], pcost[active], cand)

            explore_u = rng.random(active.size)
            pick_u = rng.random(active.size)
            explore_col = np.minimum((pick_u * counts).astype(np.int64), counts - 1)
            chosen_explore = cand[np.arange(active.size), explore_col]
            qmax = q.max(axis=1)
            ties = (q == qmax[:, None]) & (cand >= 0)
            chosen_exploit = np.where(ties, cand, np.iinfo(np.int32).max).min(axis=1).astype(np.int32)
            chosen = np.where(explore_u < eps_eff, chosen_explore, chosen_exploit)

            sig = cat.sigma_by_id[chosen]
            cst = cat.cost_by_id[chosen]
            afford = cst <= ua  # true by construction of the candidate set
            if self.response_mode == "bernoulli_per_slot":
                reward = (afford & (rng.random(active.size) < sig)).astype(np.float64)
            else:
                reward = np.zeros(active.size)

            blocks.append(
                {
                    "episode": active.copy(),
                    "slot": slot_arr,
                    "u": ua.copy(),
                    "surv": surv[active].copy(),
                    "pcost": pcost[active].copy(),
                    "cand": cand,
                    "chosen": chosen,
                    "sigma": sig,
                    "cost": cst,
                    "reward": reward,
                    "afford": afford,
                }
            )

            if self.charge_mode == "charge_on_click":
                u[active] = ua - cst * reward
            else:
                u[active] = ua - cst * afford.astype(np.float64)
            surv[active] = surv[active] * (1.0 - sig)
            pcost[active] = pcost[active] + cst
            prefix[active, k] = chosen
            plen[active] += 1

        if self.response_mode == "categorical_per_slate":
            self._finalize_categorical(blocks, E, rng)

        logs: list[EpisodeLog] = []
        if collect_logs:
            logs = self._assemble_logs(blocks, u0s, u, user_ids, seed_tag)
        batch = self._flatten(blocks, gamma)
        return batch, logs

    def _finalize_categorical(self, blocks: list[dict], E: int, rng: np.random.Generator) -> None:
        """Draw the single click per episode and write it into the blocks."""
        choice_u = rng.random(E)
        rows_of: list[list[tuple[int, int]]] = [[] for _ in range(E)]
        for bi, blk in enumerate(blocks):
            for pos, e in enumerate(blk["episode"]):
                rows_of[e].append((bi, pos))
        for e in range(E):
            rows = rows_of[e]
            if not rows:
                continue
            sigmas = np.array([blocks[bi]["sigma"][pos] for bi, pos in rows])
            eligible = np.array([blocks[bi]["afford"][pos] for bi, pos in rows])
            profile = selection_probabilities(sigmas)
            weights = np.where(eligible, profile.betas, 0.0)
            nc = profile.abandon if self.no_choice_weight is None else self.no_choice_weight
            full = np.concatenate((weights, [nc]))
            total = full.sum()
            if total <= 0:
                continue
            cdf = np.cumsum(full / total)
            k = int(np.searchsorted(cdf, choice_u[e], side="right"))
            if k < len(rows):
                bi, pos = rows[k]
                blocks[bi]["reward"][pos] = 1.0

    def _assemble_logs(
        self,
        blocks: list[dict],
        u0s: np.ndarray,
        final_u: np.ndarray,
        user_ids: np.ndarray | None,
        seed_tag: int,
    ) -> list[EpisodeLog]:
        E = int(u0s.shape[0])
        per_ep: list[dict[str, list]] = [
            {"actions": [], "sigmas": [], "costs": [], "rewards": [], "u": []} for _ in range(E)
        ]
        for blk in blocks:
            for pos, e in enumerate(blk["episode"]):
                rec = per_ep[e]
                rec["actions"].append(int(blk["chosen"][pos]))
                rec["sigmas"].append(float(blk["sigma"][pos]))
                rec["costs"].append(float(blk["cost"][pos]))
                rec["rewards"].append(int(blk["reward"][pos]))
                rec["u"].append(float(blk["u"][pos]))
        logs = []
        for e in range(E):
            rec = per_ep[e]
            if self.response_mode == "categorical_per_slate" and self.charge_mode == "charge_on_click":
                path = [float(u0s[e])]
                for j in range(len(rec["actions"])):
                    path.append(path[j] - rec["costs"][j] * rec["rewards"][j])
            else:
                path = rec["u"] + [float(final_u[e])]
                if not rec["actions"]:
                    path = [float(u0s[e])]
            logs.append(
                EpisodeLog(
                    user_id=int(user_ids[e]) if user_ids is not None else e,
                    initial_budget=float(u0s[e]),
                    actions=rec["actions"],
                    sigmas=rec["sigmas"],
                    costs=rec["costs"],
                    rewards=rec["rewards"],
                    click_vector=list(rec["rewards"]),
                    budget_path=path,
                    response_mode=self.response_mode,
                    charge_mode=self.charge_mode,
                    seed=seed_tag,
                )
            )
        return logs

    def _flatten(self, blocks: list[dict], gamma: float) -> _Batch | None:
        if not blocks:
            return None
        offsets = np.zeros(len(blocks) + 1, dtype=np.int64)
        for i, blk in enumerate(blocks):
            offsets[i + 1] = offsets[i] + blk["episode"].shape[0]
        next_index_parts = []
        for i, blk in enumerate(blocks):
            if i + 1 < len(blocks):
                nxt_eps = blocks[i + 1]["episode"]
                idx = np.searchsorted(nxt_eps, blk["episode"])
                idx_c = np.minimum(idx, nxt_eps.size - 1)
                found = nxt_eps[idx_c] == blk["episode"]
                next_index_parts.append(np.where(found, offsets[i + 1] + idx_c, -1))
            else:
                next_index_parts.append(np.full(blk["episode"].shape[0], -1, dtype=np.int64))
        episode = np.concatenate([b["episode"] for b in blocks])
        slot = np.concatenate([b["slot"] for b in blocks])
        u = np.concatenate([b["u"] for b in blocks])
        surv = np.concatenate([b["surv"] for b in blocks])
        pcost = np.concatenate([b["pcost"] for b in blocks])
        cand = np.concatenate([b["cand"] for b in blocks])
        chosen = np.concatenate([b["chosen"] for b in blocks])
        sigma = np.concatenate([b["sigma"] for b in blocks])
        cost = np.concatenate([b["cost"] for b in blocks])
        reward = np.concatenate([b["reward"] for b in blocks])
        next_index = np.concatenate(next_index_parts)
        X = np.column_stack(
            [u, slot, surv, pcost, sigma, cost, sigma * surv, sigma / np.maximum(cost, self.cost_floor)]
        )
        mc = np.zeros_like(reward)
        for i in range(len(blocks) - 1, -1, -1):
            lo, hi = offsets[i], offsets[i + 1]
            nxt = next_index[lo:hi]
            g_next = np.where(nxt >= 0, mc[np.maximum(nxt, 0)], 0.0)
            mc[lo:hi] = reward[lo:hi] + gamma * g_next
        return _Batch(
            episode=episode, slot=slot, u=u, surv=surv, pcost=pcost, cand=cand,
            chosen=chosen, sigma=sigma, cost=cost, reward=reward,
            next_index=next_index, X=np.ascontiguousarray(X), mc_return=mc,
        )

    def batch_targets(self, batch: _Batch, algorithm: str, gamma: float, regressor) -> np.ndarray:
        """Recompute this batch's regression targets under the given value model."""
        if algorithm == "montecarlo":
            return batch.mc_return
        if gamma == 0.0 or regressor is None:
            return batch.reward.copy()
        nxt = batch.next_index
        nonterminal = nxt >= 0
        if algorithm == "sarsa":
            q_chosen = regressor.predict(batch.X)
            q_next = np.where(nonterminal, q_chosen[np.maximum(nxt, 0)], 0.0)
        else:
            q_cand = self._candidate_q(regressor, batch.u, batch.slot, batch.surv, batch.pcost, batch.cand)
            q_max = q_cand.max(axis=1)
            q_next = np.where(nonterminal, q_max[np.maximum(nxt, 0)], 0.0)
        return batch.reward + gamma * q_next


def _population(
    budget_dist: BudgetDistribution | None,
    user_budgets: np.ndarray | None,
    num_users: int,
    rng: np.random.Generator,
) -> np.ndarray:
    if user_budgets is not None:
        pop = np.asarray(user_budgets, dtype=np.float64)
        if pop.ndim != 1 or pop.size == 0 or np.any(pop <= 0):
            raise ValueError("user_budgets must be a nonempty vector of positive budgets")
        return pop
    if budget_dist is None:
        raise ValueError("either budget_dist or user_budgets is required")
    return np.asarray(sample_initial_budget(budget_dist, rng, size=num_users), dtype=np.float64)


def train(
    catalog: ItemCatalog,
    budget_dist: BudgetDistribution | None,
    config: TrainConfig,
    rng: np.random.Generator,
    user_budgets: np.ndarray | None = None,
) -> tuple[TrainedPolicy, list[IterationDiagnostics]]:
    """Fitted-iteration training loop.

    Iteration 0 rolls episodes under a uniform-random policy; every
    iteration refits the value model on all transitions collected so far,
    with targets recomputed under the latest model.
    """
    population = _population(budget_dist, user_budgets, config.num_users, rng)
    engine = _BatchEngine(
        catalog,
        slate_size=config.slate_size,
        top_m=config.top_m,
        random_r=config.random_r,
        response_mode=config.response_mode,
        charge_mode=config.charge_mode,
        cost_floor=config.cost_floor,
        no_choice_weight=config.no_choice_weight,
    )
    history: list[_Batch] = []
    regressor = None
    diagnostics: list[IterationDiagnostics] = []
    for it in range(config.iterations):
        user_idx = rng.integers(0, population.size, size=config.episodes_per_iteration)
        batch, _ = engine.rollout(
            population[user_idx], rng,
            epsilon=config.epsilon, regressor=regressor, gamma=config.gamma,
        )
        if batch is not None:
            history.append(batch)
        if not history:
            raise TrainingError(
                "no transitions collected: every episode terminated before placing an item"
            )
        targets = [engine.batch_targets(b, config.algorithm, config.gamma, regressor) for b in history]
        X = np.vstack([b.X for b in history])
        y = np.concatenate(targets)
        regressor = make_regressor(config.regressor, **dict(config.regressor_params)).fit(X, y)
        td_mse = float(np.mean((regressor.predict(X) - y) ** 2))
        policy = TrainedPolicy(
            regressor=regressor,
            algorithm=config.algorithm,
            gamma=config.gamma,
            epsilon=config.epsilon,
            top_m=config.top_m,
            random_r=config.random_r,
            slate_size=config.slate_size,
            cost_floor=config.cost_floor,
        )
        if config.diag_episodes > 0:
            diag_idx = rng.integers(0, population.size, size=config.diag_episodes)
            diag_batch, _ = engine.rollout(
                population[diag_idx], rng, epsilon=0.0, regressor=regressor, gamma=config.gamma,
            )
            n_eps = config.diag_episodes
            eval_play_rate = float(diag_batch.reward.sum() / n_eps) if diag_batch is not None else 0.0
        else:
            eval_play_rate = float("nan")
        diagnostics.append(
            IterationDiagnostics(
                iteration=it,
                mean_target=float(y.mean()),
                td_mse=td_mse,
                eval_play_rate=eval_play_rate,
            )
        )
    return policy, diagnostics


def evaluate_policy(
    policy: TrainedPolicy,
    catalog: ItemCatalog,
    user_budgets: np.ndarray | BudgetDistribution,
    episodes: int,
    rng: np.random.Generator,
    response_mode: str = "bernoulli_per_slot",
    charge_mode: str = "charge_on_examination",
    epsilon: float = 0.0,
    no_choice_weight: float | None = None,
    seed_tag: int = 0,
) -> list[EpisodeLog]:
    """Roll fresh episodes under the policy (greedy by default), returning logs."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    engine = _BatchEngine(
        catalog,
        slate_size=policy.slate_size,
        top_m=policy.top_m,
        random_r=policy.random_r,
        response_mode=response_mode,
        charge_mode=charge_mode,
        cost_floor=policy.cost_floor,
        no_choice_weight=no_choice_weight,
    )
    if isinstance(user_budgets, BudgetDistribution):
        u0s = np.asarray(sample_initial_budget(user_budgets, rng, size=episodes), dtype=np.float64)
        user_ids = np.arange(episodes)
    else:
        pop = np.asarray(user_budgets, dtype=np.float64)
        user_idx = rng.integers(0, pop.size, size=episodes)
        u0s = pop[user_idx]
        user_ids = user_idx
    _, logs = engine.rollout(
        u0s, rng, epsilon=epsilon, regressor=policy.regressor, gamma=policy.gamma,
        user_ids=user_ids, seed_tag=seed_tag, collect_logs=True,
    )
    return logs
