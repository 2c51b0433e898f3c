import pytest

from oppsim import scenario
from oppsim.scenario import (ConfigError, ValidationError, default_scenario,
                             dump_config, load_config)


def test_empty_document_gives_canonical_defaults():
    cfg = load_config("")
    assert cfg.node_count == 150
    assert cfg.radio.range_m == 100.0
    assert cfg.radio.bandwidth_bps == 11e6
    assert cfg.traffic.ttl == 24 * 3600
    assert cfg.traffic.buffer_capacity == 2_000_000
    assert cfg.sim_duration == 12 * 86400
    assert cfg.warmup == 2 * 86400
    assert cfg.runs == 10
    assert cfg == default_scenario()


def test_default_scenario_shape():
    cfg = default_scenario()
    assert len(cfg.group_specs) == 17
    vehicles = sum(g.size for g in cfg.group_specs if g.kind in ("bus", "patrol"))
    people = sum(g.size for g in cfg.group_specs if g.kind == "person")
    assert vehicles == 26  # 10 patrol + 8 bus groups of 2
    assert people == 124
    sizes = sorted(g.size for g in cfg.group_specs if g.kind == "person")
    assert sizes == [15, 15, 15, 15, 16, 16, 16, 16]
    for g in cfg.group_specs:
        if g.kind == "person":
            assert g.evening_prob == 0.5
            assert (g.speed_min, g.speed_max) == (0.8, 1.4)
        if g.kind == "patrol":
            assert (g.pause_min, g.pause_max) == (100.0, 300.0)
            assert (g.speed_min, g.speed_max) == (7.0, 10.0)
        if g.kind == "bus":
            assert (g.pause_min, g.pause_max) == (10.0, 30.0)


def test_group_sum_invariant_violation_is_named():
    doc = """
[scenario]
node_count = 150

[group:a]
kind = patrol
size = 149
"""
    with pytest.raises(ValidationError, match="group sizes must sum"):
        load_config(doc)


def test_negative_ttl_rejected():
    with pytest.raises(ValidationError, match="ttl"):
        load_config("[traffic]\nttl = -1\n")


@pytest.mark.parametrize("doc,needle", [
    ("[scenario]\nruns = 0\n", "runs"),
    ("[scenario]\ntick = 0\n", "tick"),
    ("[scenario]\nwarmup = 2000000\n", "warmup"),
    ("[radio]\nbeacon_interval = 0.5\n", "beacon_interval"),
    ("[radio]\nrange_m = -5\n", "range"),
    ("[traffic]\nbuffer_capacity = 50000\n", "buffer_capacity"),
    ("[traffic]\nsize_min = 0\n", "size"),
    ("[protocol]\nname = flooding\n", "flooding"),
])
def test_invariant_violations_rejected(doc, needle):
    with pytest.raises(ValidationError, match=needle):
        load_config(doc)


def test_syntax_error_reports_position():
    with pytest.raises(ConfigError, match="line"):
        load_config("[scenario\nnode_count = 5\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="nodecount"):
        load_config("[scenario]\nnodecount = 5\n")


def test_roundtrip_is_structural_identity():
    cfg = default_scenario()
    text = dump_config(cfg)
    again = load_config(text)
    assert again == cfg
    assert dump_config(again) == text


def test_roundtrip_of_modified_config():
    doc = """
[scenario]
node_count = 12
sim_duration = 7200
warmup = 100
runs = 3

[protocol]
name = prophet
gamma = 0.99

[group:walkers]
kind = person
size = 8

[group:cars]
kind = bus
size = 4
"""
    cfg = load_config(doc)
    assert cfg.protocol == "prophet"
    assert cfg.protocol_params.gamma == 0.99
    assert [g.name for g in cfg.group_specs] == ["walkers", "cars"]
    assert load_config(dump_config(cfg)) == cfg


def test_apply_overrides():
    cfg = default_scenario()
    cfg2 = scenario.apply_overrides(cfg, {"traffic.pair_count": "0",
                                          "scenario.runs": "2"})
    assert cfg2.traffic.pair_count == 0
    assert cfg2.runs == 2
    with pytest.raises(ConfigError):
        scenario.apply_overrides(cfg, {"nosuch.key": "1"})
    with pytest.raises(ConfigError):
        scenario.apply_overrides(cfg, {"badkey": "1"})


def test_seed_derivations_are_decoupled():
    cfg = default_scenario()
    seeds = {scenario.map_seed(cfg), scenario.pair_seed(cfg),
             scenario.schedule_seed(cfg), cfg.base_seed}
    assert len(seeds) == 4
