import json

import numpy as np
import pytest
import yaml

from hillgate import ConfigError
from hillgate.cli import main
from hillgate.config import ExperimentConfig, ResultRecord, parse_config, reference_config

VALID = """
format_version: 1
seed: 3
field: {potential: double_well_1d, params: {a: 1.0, height: 1.0}}
regions:
  A: {shape: ball, center: [-1.0], radius: 0.3}
  B: {shape: ball, center: [1.0], radius: 0.3}
thermo: {gamma: 1.0, beta: 1.0}
sim: {dt: 2.0e-3}
estimator: {n_samples: 300, n_events: 200, observable: {name: speed_above, value: 1.0}}
ams: {n_replicas: 10, n_runs: 2}
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(VALID)
    return path


def _write(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    return path


def test_parse_valid(cfg_file):
    cfg = parse_config(cfg_file)
    assert cfg.seed == 3 and cfg.thermo.beta == 1.0 and cfg.sim_params.dt == 2e-3
    assert cfg.data["sim"]["scheme"] == "baoab"
    assert cfg.observable is not None and cfg.n_samples == 300


def test_missing_beta(tmp_path):
    with pytest.raises(ConfigError, match="thermo.beta"):
        parse_config(_write(tmp_path, VALID.replace("gamma: 1.0, beta: 1.0", "gamma: 1.0")))


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="dtt"):
        parse_config(_write(tmp_path, VALID.replace("dt: 2.0e-3", "dtt: 2.0e-3")))


def test_overlapping_regions(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, VALID.replace("center: [1.0]", "center: [-0.8]")))


def test_dimension_mismatch(tmp_path):
    with pytest.raises(ConfigError, match="dimension"):
        parse_config(_write(tmp_path, VALID.replace("[-1.0]", "[-1.0, 0.0]")
                            .replace("[1.0]", "[1.0, 0.0]")))


@pytest.mark.parametrize("text", ["[1, 2]", "thermo: {gamma: 1.0, beta: 1.0", "seed: 1.5"])
def test_malformed(tmp_path, text):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, text))


def test_round_trip_and_hash(cfg_file, tmp_path):
    cfg = parse_config(cfg_file)
    cfg.dump(tmp_path / "again.yaml")
    back = parse_config(tmp_path / "again.yaml")
    assert back == cfg and back.config_hash() == cfg.config_hash()
    assert cfg.replace(output={"dir": "elsewhere"}).config_hash() == cfg.config_hash()
    assert cfg.replace(seed=4).config_hash() != cfg.config_hash()


def test_reference_config():
    cfg = reference_config()
    assert cfg.pair.dimension == 1 and cfg.thermo.gamma == 1.0
    assert ExperimentConfig.from_dict(yaml.safe_load(cfg.to_yaml())) == cfg


def test_result_record_round_trip(tmp_path):
    rec = ResultRecord("x", "abc", 1, estimates=[{"value": np.float64(1.5)}], counters={"n": 3})
    rec.write(tmp_path / "s.json")
    back = ResultRecord.read(tmp_path / "s.json")
    assert back.same_result(rec)
    assert list(json.loads((tmp_path / "s.json").read_text())) == list(rec.to_dict())


# ------------------------------------------------------------------------ CLI

def _summary(out):
    return ResultRecord.read(out / "summary.json")


def test_cli_oracle(tmp_path, capsys):
    assert main(["oracle", "--out-dir", str(tmp_path), "--random", "20"]) == 0
    rec = _summary(tmp_path)
    assert rec.extra["passed"]


@pytest.mark.parametrize("cmd", ["sample-boundary", "simulate-direct", "estimate-hill",
                                 "estimate-ams"])
def test_cli_commands_reproducible(cmd, cfg_file, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([cmd, "--config", str(cfg_file), "--out-dir", str(a)]) == 0
    assert main([cmd, "--config", str(cfg_file), "--out-dir", str(b), "--threads", "2"]) == 0
    ra, rb = _summary(a), _summary(b)
    assert ra.command == cmd and ra.seed == 3
    assert ra.same_result(rb)
    assert (a / "config.yaml").exists()
    assert parse_config(a / "config.yaml").config_hash() == ra.config_hash


def test_cli_seed_changes_result(cfg_file, tmp_path, capsys):
    main(["estimate-hill", "--config", str(cfg_file), "--out-dir", str(tmp_path / "a")])
    main(["estimate-hill", "--config", str(cfg_file), "--out-dir", str(tmp_path / "b"),
          "--seed", "4"])
    assert not _summary(tmp_path / "a").same_result(_summary(tmp_path / "b"))


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    bad = _write(tmp_path, VALID.replace("dt: 2.0e-3", "dtt: 2.0e-3"))
    assert main(["estimate-hill", "--config", str(bad)]) == 2
    assert main(["estimate-hill", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["oracle", "--threads", "0", "--out-dir", str(tmp_path)]) == 2
    monkeypatch.setenv("HILLGATE_THREADS", "many")
    assert main(["oracle", "--out-dir", str(tmp_path)]) == 2
    monkeypatch.setenv("HILLGATE_THREADS", "2")
    assert main(["oracle", "--random", "5", "--out-dir", str(tmp_path)]) == 0
    assert "error" in capsys.readouterr().err


def test_cli_oracle_with_chain_file(tmp_path, capsys):
    from hillgate.harris_oracle import FiniteChain
    FiniteChain([[0.7, 0.3], [0.1, 0.9]], ["A", "B"]).to_json(tmp_path / "c.json")
    assert main(["oracle", "--random", "3", "--chain", str(tmp_path / "c.json"),
                 "--out-dir", str(tmp_path)]) == 0


def test_cli_validate_quick(tmp_path, capsys):
    code = main(["validate", "--quick", "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    rec = _summary(tmp_path)
    assert len(rec.extra["checks"]) == 11
    assert sum(line.startswith("[") for line in out.splitlines()) == 11
    assert code == (0 if rec.extra["passed"] else 1)
