import numpy as np
import pytest

from slatesim.catalog import (
    BudgetDistribution,
    CostDistribution,
    ItemCatalog,
    RelevanceParams,
    generate_synthetic_catalog,
    load_catalog,
    sample_costs,
    sample_initial_budget,
    save_catalog,
)
from slatesim.errors import ConfigError, ValidationError
from slatesim.rng import derive_stream


class TestSampleCosts:
    def test_degenerate_interval(self, rng):
        costs = sample_costs(3, CostDistribution(5.0, 5.0 + 1e-9), rng)
        assert np.allclose(costs, 5.0, atol=1e-8)

    def test_empty(self, rng):
        assert sample_costs(0, CostDistribution(0, 100), rng).shape == (0,)

    def test_monte_carlo_mean(self):
        costs = sample_costs(100_000, CostDistribution(0, 100), derive_stream(5, "mc", 0))
        assert 49.0 <= costs.mean() <= 51.0

    def test_bounds_and_floor(self):
        costs = sample_costs(50_000, CostDistribution(0, 100), derive_stream(5, "floor", 0))
        assert costs.min() >= 0.01
        assert costs.max() <= 100.0

    def test_reproducible(self):
        a = sample_costs(1000, CostDistribution(0, 100), derive_stream(9, "c", 3))
        b = sample_costs(1000, CostDistribution(0, 100), derive_stream(9, "c", 3))
        assert np.array_equal(a, b)

    def test_invalid_distribution(self):
        with pytest.raises(ConfigError):
            CostDistribution(10.0, 10.0)
        with pytest.raises(ConfigError):
            CostDistribution(-1.0, 5.0)


class TestSampleInitialBudget:
    def test_scale_zero_is_exact(self, rng):
        assert sample_initial_budget(BudgetDistribution(100.0, 0.0), rng) == 100.0

    def test_median_parameterization(self):
        draws = sample_initial_budget(
            BudgetDistribution(100.0, 0.5), derive_stream(5, "budget", 0), size=100_000
        )
        assert 97.0 <= np.median(draws) <= 103.0
        assert np.all(draws > 0)

    def test_reference_loc_grid_valid(self):
        for loc in range(100, 501, 50):
            BudgetDistribution(float(loc), 0.5)

    def test_reproducible(self):
        a = sample_initial_budget(BudgetDistribution(250, 0.5), derive_stream(2, "b", 1), size=100)
        b = sample_initial_budget(BudgetDistribution(250, 0.5), derive_stream(2, "b", 1), size=100)
        assert np.array_equal(a, b)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            BudgetDistribution(0.0, 0.5)
        with pytest.raises(ConfigError):
            BudgetDistribution(100.0, -0.1)


class TestGenerateSyntheticCatalog:
    def test_degenerate_all_ones(self, rng):
        cat = generate_synthetic_catalog(50, RelevanceParams(2, 0), CostDistribution(0, 10), rng)
        assert np.all(cat.sigmas == 1.0)

    def test_degenerate_all_zeros(self, rng):
        cat = generate_synthetic_catalog(50, RelevanceParams(0, 3), CostDistribution(0, 10), rng)
        assert np.all(cat.sigmas == 0.0)

    def test_count_contract(self, rng):
        cat = generate_synthetic_catalog(5000, RelevanceParams(2, 8), CostDistribution(0, 100), rng)
        assert cat.n_items == 5000
        assert np.array_equal(cat.item_ids, np.arange(5000))

    def test_beta_mean_within_three_se(self):
        n = 100_000
        params = RelevanceParams(2, 8)
        cat = generate_synthetic_catalog(
            n, params, CostDistribution(0, 100), derive_stream(5, "beta", 0)
        )
        se = np.sqrt(params.mean * (1 - params.mean) * (1 / 11)) / np.sqrt(n)
        assert abs(cat.sigmas.mean() - params.mean) <= 3 * se

    def test_zero_items_rejected(self, rng):
        with pytest.raises(ConfigError):
            generate_synthetic_catalog(0, RelevanceParams(2, 8), CostDistribution(0, 100), rng)


class TestCatalogValidation:
    def test_sigma_out_of_range(self):
        with pytest.raises(ValidationError, match="row 1"):
            ItemCatalog(np.arange(2), np.array([0.5, 1.5]), np.array([1.0, 2.0]))

    def test_nonpositive_cost(self):
        with pytest.raises(ValidationError, match="cost"):
            ItemCatalog(np.arange(2), np.array([0.5, 0.5]), np.array([1.0, 0.0]))

    def test_noncontiguous_ids(self):
        with pytest.raises(ValidationError, match="contiguous"):
            ItemCatalog(np.array([0, 2]), np.array([0.5, 0.5]), np.array([1.0, 2.0]))

    def test_by_id_lookup_with_permuted_rows(self):
        cat = ItemCatalog(np.array([1, 0]), np.array([0.2, 0.7]), np.array([5.0, 9.0]))
        assert cat.sigma_of(1) == 0.2
        assert cat.sigma_of(0) == 0.7
        assert cat.cost_of(0) == 9.0

    def test_immutable(self, tiny_catalog):
        with pytest.raises(ValueError):
            tiny_catalog.sigmas[0] = 0.9


class TestCatalogIO:
    def test_basic_load(self, tmp_path):
        path = tmp_path / "cat.csv"
        path.write_text("item_id,sigma,cost\n0,0.2,30.0\n1,0.5,10.0\n")
        cat = load_catalog(path)
        assert cat.n_items == 2
        assert cat.sigma_of(1) == 0.5

    def test_validation_error_names_row(self, tmp_path):
        rows = ["item_id,sigma,cost"] + [f"{i},0.1,1.0" for i in range(7)] + ["7,1.5,1.0"]
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(ValidationError, match="row 7"):
            load_catalog(path)

    def test_duplicate_id_names_row(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("item_id,sigma,cost\n0,0.2,30.0\n0,0.5,10.0\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_catalog(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("id,sigma,cost\n0,0.2,30.0\n")
        with pytest.raises(ValidationError, match="header"):
            load_catalog(path)

    def test_round_trip(self, tmp_path, rng):
        cat = generate_synthetic_catalog(300, RelevanceParams(2, 8), CostDistribution(0, 100), rng)
        path = tmp_path / "cat.csv"
        save_catalog(cat, path)
        loaded = load_catalog(path)
        assert np.array_equal(loaded.item_ids, cat.item_ids)
        # writer emits 9 significant digits
        assert np.allclose(loaded.sigmas, cat.sigmas, rtol=1e-8, atol=1e-12)
        assert np.allclose(loaded.costs, cat.costs, rtol=1e-8)

    def test_round_trip_is_stable(self, tmp_path, rng):
        # a second save/load cycle reproduces the file exactly
        cat = generate_synthetic_catalog(100, RelevanceParams(2, 8), CostDistribution(0, 100), rng)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_catalog(cat, p1)
        save_catalog(load_catalog(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestOrderings:
    def test_ratio_order_matches_bruteforce(self, small_catalog):
        order = small_catalog.ratio_order()
        ratio = small_catalog.sigma_by_id / np.maximum(small_catalog.cost_by_id, 0.01)
        expected = sorted(range(small_catalog.n_items), key=lambda i: (-ratio[i], i))
        assert list(order) == expected

    def test_cost_order_sorted(self, small_catalog):
        order, sorted_costs = small_catalog.cost_order()
        assert np.all(np.diff(sorted_costs) >= 0)
        assert np.array_equal(small_catalog.cost_by_id[order], sorted_costs)
