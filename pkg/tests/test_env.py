import numpy as np
import pytest

from slatesim.catalog import ItemCatalog
from slatesim.env import (
    EpisodeLog,
    SlateState,
    affordable_items,
    read_episode_logs,
    reset,
    rollout_slate,
    step,
    write_episode_logs,
)
from slatesim.errors import ContractError, ValidationError
from slatesim.rng import derive_stream

from oracles import affordable_bruteforce


def fixed_policy(sequence):
    """Policy that plays a predetermined item sequence, then stops."""

    def policy(state, catalog, rng):
        return sequence[state.slot] if state.slot < len(sequence) else None

    return policy


def cheapest_affordable_policy(state, catalog, rng):
    best = None
    for item_id, _sigma, cost in catalog.items():
        if item_id in state.prefix or cost > state.budget_remaining:
            continue
        if best is None or cost < catalog.cost_of(best):
            best = item_id
    return best


class TestReset:
    def test_basic(self):
        state = reset(100.0)
        assert state == SlateState(100.0, (), 0, 1.0, 0.0)

    def test_zero_budget_rejected(self):
        with pytest.raises(ValueError):
            reset(0.0)

    def test_from_sampler_reproducible(self):
        from slatesim.catalog import BudgetDistribution, sample_initial_budget

        a = reset(sample_initial_budget(BudgetDistribution(100, 0.5), derive_stream(3, "u0", 1)))
        b = reset(sample_initial_budget(BudgetDistribution(100, 0.5), derive_stream(3, "u0", 1)))
        assert a == b


class TestAffordableItems:
    def test_simple_filter(self):
        cat = ItemCatalog(np.arange(2), np.array([0.5, 0.5]), np.array([30.0, 60.0]))
        assert affordable_items(reset(50.0), cat) == {0}

    def test_excludes_prefix(self):
        cat = ItemCatalog(np.arange(2), np.array([0.5, 0.5]), np.array([30.0, 60.0]))
        state = SlateState(100.0, (0,), 1, 0.5, 30.0)
        assert affordable_items(state, cat) == {1}

    def test_matches_bruteforce(self, small_catalog):
        state = SlateState(50.0, (3, 10, 4), 3, 0.5, 12.0)
        assert affordable_items(state, small_catalog) == affordable_bruteforce(
            small_catalog, 50.0, (3, 10, 4)
        )


class TestStep:
    def make_catalog(self, sigmas, costs):
        return ItemCatalog(np.arange(len(sigmas)), np.array(sigmas), np.array(costs))

    def test_click_charges_budget(self, rng):
        cat = self.make_catalog([1.0], [30.0])  # certain click
        out = step(reset(100.0), 0, cat, rng)
        assert out.reward == 1
        assert out.next_state.budget_remaining == 70.0
        assert out.next_state.prefix == (0,)
        assert out.next_state.slot == 1

    def test_unaffordable_forces_zero(self, rng):
        cat = self.make_catalog([1.0], [30.0])
        out = step(reset(10.0), 0, cat, rng)
        assert out.reward == 0
        assert not out.affordable
        assert out.next_state.budget_remaining == 10.0

    def test_no_click_keeps_budget(self, rng):
        cat = self.make_catalog([0.0], [30.0])  # never clicks
        out = step(reset(100.0), 0, cat, rng)
        assert out.reward == 0
        assert out.next_state.budget_remaining == 100.0

    def test_charge_on_examination(self, rng):
        cat = self.make_catalog([0.0], [30.0])
        out = step(reset(100.0), 0, cat, rng, charge_mode="charge_on_examination")
        assert out.reward == 0
        assert out.next_state.budget_remaining == 70.0

    def test_survival_update(self, rng):
        cat = self.make_catalog([0.4], [1.0])
        out = step(reset(100.0), 0, cat, rng)
        assert out.next_state.survival == pytest.approx(0.6)

    def test_duplicate_item_rejected(self, rng):
        cat = self.make_catalog([0.5, 0.5], [10.0, 10.0])
        state = SlateState(100.0, (0,), 1, 0.5, 10.0)
        with pytest.raises(ContractError):
            step(state, 0, cat, rng)

    def test_slot_overflow_rejected(self, rng):
        cat = self.make_catalog([0.5, 0.5], [10.0, 10.0])
        state = SlateState(100.0, (0,), 1, 0.5, 10.0)
        with pytest.raises(ContractError):
            step(state, 1, cat, rng, slate_size=1)


class TestRolloutSlate:
    def test_full_slate_when_budget_never_binds(self, small_catalog):
        log = rollout_slate(
            cheapest_affordable_policy, 1e9, small_catalog, 10, derive_stream(0, "r", 0)
        )
        assert len(log.actions) == 10
        log.validate()

    def test_budget_below_every_cost(self, tiny_catalog):
        log = rollout_slate(
            fixed_policy([0, 1, 2]), 1.0, tiny_catalog, 3, derive_stream(0, "r", 1)
        )
        assert log.rewards == [0, 0, 0]
        assert log.budget_path == [1.0, 1.0, 1.0, 1.0]
        log.validate()

    def test_deterministic_given_seed(self, small_catalog):
        def run():
            return rollout_slate(
                cheapest_affordable_policy, 200.0, small_catalog, 8,
                derive_stream(11, "det", 5), response_mode="bernoulli_per_slot",
            )

        assert run().to_json_line() == run().to_json_line()

    def test_policy_stop_ends_episode(self, tiny_catalog, rng):
        log = rollout_slate(fixed_policy([2]), 100.0, tiny_catalog, 4, rng)
        assert len(log.actions) == 1
        log.validate()

    def test_examination_charging_conservation(self, small_catalog):
        log = rollout_slate(
            cheapest_affordable_policy, 80.0, small_catalog, 12,
            derive_stream(4, "exam", 0), charge_mode="charge_on_examination",
        )
        log.validate()
        spent = sum(
            c for c, u in zip(log.costs, log.budget_path[:-1]) if c <= u
        )
        assert log.budget_path[-1] == pytest.approx(80.0 - spent, abs=1e-9)

    def test_categorical_single_click(self, small_catalog):
        for seed in range(30):
            log = rollout_slate(
                cheapest_affordable_policy, 150.0, small_catalog, 6,
                derive_stream(5, "cat", seed), response_mode="categorical_per_slate",
            )
            assert sum(log.rewards) <= 1
            log.validate()

    def test_categorical_click_distribution(self, rng):
        # one fixed 3-slot slate; empirical click frequencies match the cascade
        cat = ItemCatalog(np.arange(3), np.array([0.2, 0.3, 0.5]), np.array([1.0, 1.0, 1.0]))
        n = 100_000
        counts = np.zeros(4)
        stream = derive_stream(0, "cat-mc", 0)
        for _ in range(n):
            log = rollout_slate(
                fixed_policy([0, 1, 2]), 1e6, cat, 3, stream,
                response_mode="categorical_per_slate",
            )
            clicked = log.rewards.index(1) if 1 in log.rewards else 3
            counts[clicked] += 1
        assert np.allclose(counts / n, [0.2, 0.24, 0.28, 0.28], atol=0.01)

    def test_categorical_expected_clicks_equals_slate_prob(self):
        # mode-level equivalence: E[#clicks] = sum of betas (exact value 0.72)
        cat = ItemCatalog(np.arange(3), np.array([0.2, 0.3, 0.5]), np.array([1.0, 1.0, 1.0]))
        n = 100_000
        stream = derive_stream(0, "cat-eq", 0)
        total = 0
        for _ in range(n):
            log = rollout_slate(
                fixed_policy([0, 1, 2]), 1e6, cat, 3, stream,
                response_mode="categorical_per_slate",
            )
            total += sum(log.rewards)
        assert abs(total / n - 0.72) <= 0.01


class TestEpisodeLog:
    def make_log(self, **overrides):
        base = dict(
            user_id=0,
            initial_budget=100.0,
            actions=[0, 1],
            sigmas=[0.5, 0.2],
            costs=[30.0, 40.0],
            rewards=[1, 0],
            click_vector=[1, 0],
            budget_path=[100.0, 70.0, 70.0],
            response_mode="bernoulli_per_slot",
            charge_mode="charge_on_click",
            seed=0,
        )
        base.update(overrides)
        return EpisodeLog(**base)

    def test_valid(self):
        self.make_log().validate()

    def test_duplicate_item_rejected(self):
        with pytest.raises(ValidationError, match="repeats"):
            self.make_log(actions=[0, 0]).validate()

    def test_budget_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="transition"):
            self.make_log(budget_path=[100.0, 60.0, 60.0]).validate()

    def test_reward_without_affordability_rejected(self):
        with pytest.raises(ValidationError, match="affordability"):
            self.make_log(
                costs=[300.0, 40.0], budget_path=[100.0, -200.0, -200.0]
            ).validate()

    def test_jsonl_round_trip(self, tmp_path, small_catalog):
        logs = [
            rollout_slate(
                cheapest_affordable_policy, 100.0, small_catalog, 5, derive_stream(0, "jl", i)
            )
            for i in range(5)
        ]
        path = tmp_path / "episodes.jsonl"
        write_episode_logs(logs, path)
        loaded = list(read_episode_logs(path))
        assert loaded == logs
