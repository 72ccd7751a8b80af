import json

import numpy as np
import pytest
from scipy import stats

from slatesim.config import ENV_PREFIX, RunConfig, load_config, save_config
from slatesim.errors import ConfigError
from slatesim.rng import derive_stream


def test_same_triple_same_stream():
    a = derive_stream(42, "episode", 7).random(1000)
    b = derive_stream(42, "episode", 7).random(1000)
    assert np.array_equal(a, b)


def test_index_separation():
    a = derive_stream(42, "episode", 7).random(1000)
    b = derive_stream(42, "episode", 8).random(1000)
    assert not np.array_equal(a, b)


def test_label_separation():
    a = derive_stream(42, "episode", 7).random(1000)
    b = derive_stream(42, "costs", 7).random(1000)
    assert not np.array_equal(a, b)


def test_master_seed_separation():
    a = derive_stream(0, "episode", 7).random(1000)
    b = derive_stream(1, "episode", 7).random(1000)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("label,index", [("alpha", 0), ("beta", 3), ("episode", 12345)])
def test_stream_uniformity_chi_squared(label, index):
    draws = derive_stream(99, label, index).random(100_000)
    counts, _ = np.histogram(draws, bins=100, range=(0.0, 1.0))
    _, p = stats.chisquare(counts)
    assert p > 0.001


def test_defaults_match_reference_parameters():
    cfg = RunConfig()
    assert cfg.num_users == 150
    assert cfg.num_items == 142998
    assert cfg.slate_size == 30
    assert cfg.cost_low == 0.0
    assert cfg.cost_high == 100.0
    assert cfg.user_budget_scale == 0.5
    assert cfg.epsilon == 0.1
    assert cfg.gammas == (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    assert cfg.budget_locs == tuple(float(b) for b in range(100, 501, 50))
    assert len(cfg.seeds) == 20


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert load_config(path, use_env=False) == RunConfig()


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epsilonn": 0.2}))
    with pytest.raises(ConfigError, match="epsilonn"):
        load_config(path, use_env=False)


def test_out_of_range_value_names_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epsilon": 1.5}))
    with pytest.raises(ConfigError, match="epsilon"):
        load_config(path, use_env=False)


def test_round_trip(tmp_path):
    cfg = RunConfig(num_items=500, epsilon=0.25, gammas=(0.0, 0.5), seeds=(3, 4))
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    assert load_config(path, use_env=False) == cfg


def test_env_var_override(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_PREFIX + "EPSILON", "0.3")
    cfg = load_config(None)
    assert cfg.epsilon == 0.3


def test_explicit_override_beats_env(monkeypatch):
    monkeypatch.setenv(ENV_PREFIX + "EPSILON", "0.3")
    cfg = load_config(None, overrides={"epsilon": 0.4})
    assert cfg.epsilon == 0.4


def test_duplicate_seeds_rejected():
    with pytest.raises(ConfigError, match="seeds"):
        RunConfig(seeds=(1, 1))


def test_replace_revalidates():
    cfg = RunConfig()
    with pytest.raises(ConfigError):
        cfg.replace(discount_factor=1.5)
