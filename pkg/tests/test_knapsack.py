import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slatesim.catalog import ItemCatalog
from slatesim.errors import ValidationError
from slatesim.knapsack import (
    KnapsackInstance,
    greedy_ratio_slate,
    instance_from_json,
    instance_to_json,
    solution_to_json,
    solve_bruteforce,
    solve_dp,
)
from slatesim.rng import derive_stream

from oracles import knapsack_best_by_enumeration


def random_instance(rng, n, integer_costs=False):
    utilities = rng.integers(1, 1000, size=n) / 1024.0  # dyadic: exact float sums
    if integer_costs:
        costs = rng.integers(1, 20, size=n).astype(np.float64)
    else:
        costs = rng.random(n) * 20 + 0.1
    budget = float(rng.random() * costs.sum())
    return KnapsackInstance(utilities=utilities, costs=costs, budget=budget)


class TestBruteforce:
    def test_three_item_example(self):
        inst = KnapsackInstance(np.array([0.4, 0.5, 0.6]), np.array([3.0, 4.0, 5.0]), 7.0)
        sol = solve_bruteforce(inst)
        assert sol.selected == (0, 1)
        assert sol.total_utility == pytest.approx(0.9)

    def test_zero_budget(self):
        inst = KnapsackInstance(np.array([0.4]), np.array([3.0]), 0.0)
        sol = solve_bruteforce(inst)
        assert sol.selected == ()
        assert sol.total_utility == 0.0

    def test_all_unaffordable(self):
        inst = KnapsackInstance(np.array([0.4, 0.9]), np.array([30.0, 40.0]), 10.0)
        assert solve_bruteforce(inst).selected == ()

    def test_against_recursive_enumeration(self):
        rng = derive_stream(0, "knap-brute", 0)
        for trial in range(40):
            inst = random_instance(rng, int(rng.integers(1, 11)))
            sol = solve_bruteforce(inst)
            best = knapsack_best_by_enumeration(
                inst.utilities.tolist(), inst.costs.tolist(), inst.budget
            )
            assert sol.total_utility == pytest.approx(best, abs=1e-12), trial

    def test_tie_prefers_lower_cost(self):
        inst = KnapsackInstance(np.array([0.5, 0.5]), np.array([2.0, 1.0]), 5.0)
        # taking both is optimal; equal-utility singletons would tie otherwise
        assert solve_bruteforce(inst).selected == (0, 1)
        inst2 = KnapsackInstance(np.array([0.5, 0.5]), np.array([2.0, 1.0]), 2.0)
        sol2 = solve_bruteforce(inst2)
        assert sol2.selected == (1,)  # same utility, cheaper

    def test_size_cap(self):
        n = 26
        inst = KnapsackInstance(np.ones(n), np.ones(n), 5.0)
        with pytest.raises(ValidationError):
            solve_bruteforce(inst)


class TestDP:
    def test_single_item(self):
        inst = KnapsackInstance(np.array([0.4]), np.array([3.0]), 5.0)
        assert solve_dp(inst, resolution=1.0).selected == (0,)

    def test_duplicate_items_lexicographic(self):
        inst = KnapsackInstance(np.array([0.5, 0.5]), np.array([4.0, 4.0]), 5.0)
        assert solve_dp(inst, resolution=1.0).selected == (0,)
        assert solve_bruteforce(inst).selected == (0,)

    def test_matches_bruteforce_on_integer_costs(self):
        rng = derive_stream(0, "knap-dp", 0)
        for trial in range(200):
            inst = random_instance(rng, int(rng.integers(1, 16)), integer_costs=True)
            dp = solve_dp(inst, resolution=1.0)
            brute = solve_bruteforce(inst)
            assert dp.total_utility == brute.total_utility, trial
            assert dp.selected == brute.selected, trial

    def test_real_costs_stay_feasible(self):
        rng = derive_stream(0, "knap-real", 0)
        for trial in range(100):
            inst = random_instance(rng, int(rng.integers(1, 13)))
            sol = solve_dp(inst, resolution=0.1)
            assert sol.total_cost <= inst.budget + 1e-12, trial
            # conservative rounding can only lose utility, never gain it
            brute = solve_bruteforce(inst)
            assert sol.total_utility <= brute.total_utility + 1e-12, trial

    def test_budget_monotonicity(self):
        rng = derive_stream(0, "knap-mono", 0)
        inst = random_instance(rng, 10, integer_costs=True)
        last = -1.0
        for budget in np.linspace(0, float(inst.costs.sum()), 15):
            sol = solve_dp(
                KnapsackInstance(inst.utilities, inst.costs, float(budget)), resolution=1.0
            )
            assert sol.total_utility >= last - 1e-12
            last = sol.total_utility

    def test_table_cap(self):
        inst = KnapsackInstance(np.ones(10), np.full(10, 5.0), 1e9)
        with pytest.raises(ValidationError, match="resolution"):
            solve_dp(inst, resolution=1e-4)

    def test_bad_resolution(self):
        inst = KnapsackInstance(np.ones(2), np.ones(2), 1.0)
        with pytest.raises(ValidationError):
            solve_dp(inst, resolution=0.0)


class TestGreedyRatioSlate:
    def test_stops_at_budget(self):
        cat = ItemCatalog(np.arange(2), np.array([0.6, 0.5]), np.array([10.0, 100.0]))
        assert greedy_ratio_slate(cat, 50.0, 5) == [0]

    def test_unlimited_budget_top_k_by_ratio(self, small_catalog):
        slate = greedy_ratio_slate(small_catalog, 1e12, 8)
        assert slate == list(small_catalog.ratio_order()[:8])

    def test_never_beats_bruteforce(self):
        rng = derive_stream(0, "greedy-dom", 0)
        for trial in range(30):
            n = int(rng.integers(2, 13))
            sigmas = rng.random(n)
            costs = rng.random(n) * 20 + 0.1
            budget = float(rng.random() * costs.sum())
            cat = ItemCatalog(np.arange(n), sigmas, costs)
            slate = greedy_ratio_slate(cat, budget, n)
            greedy_util = float(sigmas[slate].sum()) if slate else 0.0
            brute = solve_bruteforce(KnapsackInstance(sigmas, costs, budget))
            assert greedy_util <= brute.total_utility + 1e-12, trial

    def test_k_cap(self, small_catalog):
        assert len(greedy_ratio_slate(small_catalog, 1e12, 3)) == 3


class TestJsonInterface:
    def test_instance_round_trip(self):
        inst = KnapsackInstance(np.array([0.4, 0.5]), np.array([3.0, 4.0]), 7.0)
        clone = instance_from_json(instance_to_json(inst))
        assert np.array_equal(clone.utilities, inst.utilities)
        assert np.array_equal(clone.costs, inst.costs)
        assert clone.budget == inst.budget

    def test_solution_json(self):
        sol = solve_bruteforce(
            KnapsackInstance(np.array([0.4, 0.5, 0.6]), np.array([3.0, 4.0, 5.0]), 7.0)
        )
        text = solution_to_json(sol)
        assert '"selected": [0, 1]' in text

    def test_missing_field(self):
        with pytest.raises(ValidationError):
            instance_from_json('{"utilities": [1.0], "costs": [1.0]}')


@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=10),
    st.data(),
)
@settings(max_examples=60, deadline=None)
def test_dp_never_violates_budget(utilities, data):
    n = len(utilities)
    costs = data.draw(
        st.lists(
            st.floats(min_value=0.1, max_value=30.0), min_size=n, max_size=n
        )
    )
    budget = data.draw(st.floats(min_value=0.0, max_value=100.0))
    inst = KnapsackInstance(np.array(utilities), np.array(costs), budget)
    sol = solve_dp(inst, resolution=0.1)
    assert sol.total_cost <= budget + 1e-9
