"""Config schema strictness, echo round-trips, and CLI behavior."""

import json
import os

import pytest

from conftest import asset_path, load_asset_obj
from dbesim import cli
from dbesim.config import (
    ConfigError,
    config_from_obj,
    config_to_obj,
    parse_config,
    serialize_config,
    serialize_snapshot,
)
from dbesim.engine import run as engine_run


def minimal_obj():
    return {
        "seed": 1,
        "epochs": 2,
        "scenario": {
            "habitats": [
                {"id": "h0",
                 "catalog": [{"id": "s0", "attrs": ["a"], "in_port": "x",
                              "out_port": "y", "price": 1.0, "reliability": 1.0}],
                 "profile": [{"request": {"id": "r0", "req_attrs": ["a"],
                                          "source_port": "x", "sink_port": "y",
                                          "max_len": 1}}]},
                {"id": "h1",
                 "catalog": [{"id": "s1", "attrs": ["b"], "in_port": "x",
                              "out_port": "y", "price": 1.0, "reliability": 1.0}],
                 "profile": [{"request": {"id": "r1", "req_attrs": ["b"],
                                          "source_port": "x", "sink_port": "y",
                                          "max_len": 1}}]},
            ],
        },
    }


def write_config(tmp_path, obj, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj), encoding="utf-8")
    return str(p)


# --- schema ---

def test_minimal_config_gets_defaults():
    cfg = config_from_obj(minimal_obj())
    assert cfg.evolution.population_size == 100
    assert cfg.evolution.tournament_size == 3
    assert cfg.generation_budget_per_epoch == 20
    assert cfg.ecosystem.p_mig == 0.2
    assert cfg.ecosystem.w_min == 0.01
    assert cfg.topology.m == 2
    assert cfg.scenario.initial_topology == ("ring",)
    assert cfg.failures == ()
    assert [t.weight for t in cfg.scenario.habitats[0].profile] == [1.0]


def test_unknown_top_level_key_named_in_error():
    obj = minimal_obj()
    obj["epochz"] = 5
    with pytest.raises(ConfigError, match="epochz"):
        config_from_obj(obj)


def test_unknown_nested_key_named_in_error():
    obj = minimal_obj()
    obj["evolution"] = {"population_sizes": 10}
    with pytest.raises(ConfigError, match="population_sizes"):
        config_from_obj(obj)


def test_wrong_types_rejected():
    obj = minimal_obj()
    obj["epochs"] = "many"
    with pytest.raises(ConfigError, match="epochs"):
        config_from_obj(obj)


def test_echo_round_trip_identity():
    for source in (minimal_obj(), load_asset_obj("two_communities.json"),
                   load_asset_obj("topology_experiment.json"),
                   load_asset_obj("catalog8.json")):
        cfg = config_from_obj(source)
        echoed = config_to_obj(cfg)
        cfg2 = config_from_obj(echoed)
        assert cfg2 == cfg
        assert config_to_obj(cfg2) == echoed


def test_parse_config_range_violations_reported(tmp_path):
    obj = minimal_obj()
    obj["ecosystem"] = {"decay_lambda": 0.0}
    path = write_config(tmp_path, obj)
    with pytest.raises(ConfigError, match="decay out of range"):
        parse_config(path)


def test_parse_config_malformed_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(str(p))


def test_parse_config_seed_override(tmp_path):
    path = write_config(tmp_path, minimal_obj())
    cfg, _ = parse_config(path, seed_override=777)
    assert cfg.master_seed == 777
    assert config_to_obj(cfg)["seed"] == 777


def test_parse_snapshot_form(tmp_path):
    cfg = config_from_obj(minimal_obj())
    result = engine_run(cfg)
    snap_path = tmp_path / "snap.json"
    snap_path.write_text(serialize_snapshot(cfg, result.final_state()),
                         encoding="utf-8")
    cfg2, state = parse_config(str(snap_path))
    assert state is not None
    assert cfg2 == cfg
    assert state["epoch"] == 2


def test_failures_parse_and_echo():
    obj = minimal_obj()
    obj["epochs"] = 5
    obj["failures"] = [{"epoch": 3, "victims": ["h0"]}]
    cfg = config_from_obj(obj)
    assert cfg.failures[0].epoch == 3
    assert cfg.failures[0].victims == ("h0",)
    assert config_to_obj(cfg)["failures"] == [{"epoch": 3, "victims": ["h0"]}]


# --- CLI ---

def test_cli_validate_reference_configs():
    for name in ("catalog8.json", "two_communities.json", "topology_experiment.json"):
        assert cli.main(["validate", "--config", asset_path(name)]) == 0


def test_cli_validate_bad_config(tmp_path, capsys):
    obj = minimal_obj()
    obj["epochs"] = 0
    path = write_config(tmp_path, obj)
    assert cli.main(["validate", "--config", path]) == 1
    assert "epochs" in capsys.readouterr().err


def test_cli_validate_missing_file(tmp_path, capsys):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_cli_run_writes_outputs(tmp_path):
    path = write_config(tmp_path, minimal_obj())
    out = str(tmp_path / "out")
    assert cli.main(["run", "--config", path, "--out", out, "--quiet"]) == 0
    names = sorted(os.listdir(out))
    assert names == ["business.dot", "ecosystem.dot", "events.jsonl", "flows.csv",
                     "metrics.csv", "resolved_config.json", "snapshot.json"]


def test_cli_run_twice_identical_outputs(tmp_path):
    path = write_config(tmp_path, minimal_obj())
    outs = []
    for name in ("out_a", "out_b"):
        out = str(tmp_path / name)
        assert cli.main(["run", "--config", path, "--out", out, "--quiet"]) == 0
        with open(os.path.join(out, "events.jsonl"), "rb") as f:
            events = f.read()
        with open(os.path.join(out, "metrics.csv"), "rb") as f:
            metrics = f.read()
        outs.append((events, metrics))
    assert outs[0] == outs[1]


def test_cli_run_resumes_from_snapshot(tmp_path):
    obj = minimal_obj()
    obj["epochs"] = 4
    path = write_config(tmp_path, obj)
    out1 = str(tmp_path / "first")
    assert cli.main(["run", "--config", path, "--out", out1, "--quiet"]) == 0

    # extend the snapshot's horizon and resume from it
    with open(os.path.join(out1, "snapshot.json"), "r", encoding="utf-8") as f:
        snap = json.load(f)
    snap["config"]["epochs"] = 6
    snap_path = write_config(tmp_path, snap, name="snap.json")
    out2 = str(tmp_path / "second")
    assert cli.main(["run", "--config", snap_path, "--out", out2, "--quiet"]) == 0
    with open(os.path.join(out2, "metrics.csv"), "r", encoding="utf-8") as f:
        lines = f.read().strip().split("\n")
    assert [ln.split(",")[0] for ln in lines[1:]] == ["5", "6"]


def test_cli_seed_override_recorded(tmp_path):
    path = write_config(tmp_path, minimal_obj())
    out = str(tmp_path / "out")
    assert cli.main(["run", "--config", path, "--out", out, "--seed", "99",
                     "--quiet"]) == 0
    with open(os.path.join(out, "resolved_config.json"), "r", encoding="utf-8") as f:
        echoed = json.load(f)
    assert echoed["seed"] == 99


def test_cli_lock_file_blocks_concurrent_use(tmp_path, capsys):
    path = write_config(tmp_path, minimal_obj())
    out = str(tmp_path / "out")
    os.makedirs(out)
    lock = os.path.join(out, cli.LOCK_NAME)
    with open(lock, "w", encoding="utf-8"):
        pass
    assert cli.main(["run", "--config", path, "--out", out, "--quiet"]) == 2
    assert "locked" in capsys.readouterr().err
    os.remove(lock)
    assert cli.main(["run", "--config", path, "--out", out, "--quiet"]) == 0
    assert not os.path.exists(lock)


def test_cli_oracle_and_evolve_agree_on_reference_catalog(capsys):
    assert cli.main(["oracle", "--config", asset_path("catalog8.json"),
                     "--quiet"]) == 0
    oracle_out = capsys.readouterr().out
    assert cli.main(["evolve", "--config", asset_path("catalog8.json"),
                     "--quiet"]) == 0
    evolve_out = capsys.readouterr().out

    def fitness_of(text):
        for line in text.splitlines():
            if line.startswith("best_fitness="):
                return float(line.split("=", 1)[1])
        raise AssertionError(f"no fitness line in {text!r}")

    assert fitness_of(oracle_out) == fitness_of(evolve_out) == 1.0


def test_cli_evolve_writes_trace(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert cli.main(["evolve", "--config", asset_path("catalog8.json"),
                     "--out", out, "--quiet"]) == 0
    with open(os.path.join(out, "trace.csv"), "r", encoding="utf-8") as f:
        lines = f.read().strip().split("\n")
    assert lines[0] == "generation,best_fitness,mean_fitness"
    assert len(lines) >= 2


def test_cli_topology_writes_experiment_outputs(tmp_path, capsys):
    obj = load_asset_obj("topology_experiment.json")
    obj["topology"]["steps"] = 200
    obj["topology"]["inject"]["at_step"] = 100
    path = write_config(tmp_path, obj)
    out = str(tmp_path / "out")
    assert cli.main(["topology", "--config", path, "--out", out, "--quiet"]) == 0
    names = sorted(os.listdir(out))
    assert names == ["business.dot", "degrees.csv", "resolved_config.json",
                     "trajectory.csv"]
    with open(os.path.join(out, "trajectory.csv"), "r", encoding="utf-8") as f:
        lines = f.read().strip().split("\n")
    assert lines[0] == "step,rank"
    assert lines[-1].startswith("200,")


def test_cli_writes_only_inside_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_config(tmp_path, minimal_obj())
    before = set(os.listdir(tmp_path))
    out = str(tmp_path / "only_here")
    assert cli.main(["run", "--config", path, "--out", out, "--quiet"]) == 0
    after = set(os.listdir(tmp_path))
    assert after - before == {"only_here"}
