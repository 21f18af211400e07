import pytest

from listingdedup.blocking import BlockingParams
from listingdedup.config import ConfigError, RunConfig, config_from_dict, load_config
from listingdedup.time_machine import DedupParams

EXAMPLE = """
seed = 7
threshold = 0.6

[blocking]
radius_m = 300.0

[tree]
min_leaf = 4.0
boosting_trials = 3

[dedup]
min_units_per_city = 10
density = [3, 4]

[generator]
weeks = 12
"""


def test_defaults():
    cfg = load_config(None)
    assert cfg == RunConfig()
    assert cfg.blocking == BlockingParams() and cfg.threshold == 0.5
    assert cfg.dedup.density == (5, 6)


def test_example_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(EXAMPLE)
    cfg = load_config(p)
    assert cfg.seed == 7 and cfg.threshold == 0.6
    assert cfg.blocking.radius_m == 300.0 and cfg.blocking.max_rel_gap == 0.25
    # blocking is shared with the weekly pipeline, the seed with boosting
    assert cfg.dedup.blocking == cfg.blocking
    assert cfg.tree.seed == 7 and cfg.tree.boosting_trials == 3 and cfg.tree.min_leaf == 4.0
    assert cfg.dedup.density == (3, 4) and cfg.dedup.min_units_per_city == 10
    assert cfg.generator.weeks == 12


@pytest.mark.parametrize("bad", [
    {"colour": 1},
    {"blocking": {"radius": 10}},
    {"blocking": 5},
    {"threshold": 1.0},
    {"threshold": 0.0},
    {"blocking": {"radius_m": -1.0}},
    {"dedup": {"density": [7, 6]}},
    {"dedup": {"density": [0.5, 1]}},
    {"dedup": {"ratio_low": 2.0}},
    {"tree": {"max_depth": 0}},
    {"generator": {"weeks": 0}},
])
def test_bad_values_raise_config_error(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_unparseable_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("seed = = 3\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(p)


def test_direct_construction_validates():
    with pytest.raises(ConfigError):
        RunConfig(dedup=DedupParams(density=(0, 6)))
