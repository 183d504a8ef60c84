import json

import pytest
import torch

from hsidiff.checkpoint import load_checkpoint, save_checkpoint, state_dict_digest
from hsidiff.config import (
    OUTPUT_ROOT_ENV,
    apply_overrides,
    config_from_dict,
    config_hash,
    config_to_dict,
    default_config,
    load_config,
    write_config,
)
from hsidiff.errors import ConfigError


def test_defaults_follow_reported_settings():
    cfg = default_config()
    assert (cfg.grouping.n_subs, cfg.grouping.n_ovls) == (16, 4)
    assert (cfg.loss.lambda1, cfg.loss.lambda2, cfg.loss.lambda3) == (0.3, 0.1, 0.001)
    assert cfg.train.stage1.lr == 1e-4
    assert cfg.train.stage2.lr == 1e-5
    assert cfg.train.stage2.lr <= cfg.train.stage1.lr
    assert (cfg.train.stage1.beta1, cfg.train.stage1.beta2) == (0.9, 0.999)
    assert cfg.diffusion.T == 100


def test_round_trip_and_hash_stability(tmp_path):
    cfg = default_config()
    path = tmp_path / "cfg.json"
    write_config(cfg, path)
    loaded = load_config(path)
    assert loaded == cfg
    assert config_hash(loaded) == config_hash(cfg)


def test_overrides_dotted_paths(tmp_path):
    cfg = default_config()
    path = tmp_path / "cfg.json"
    write_config(cfg, path)
    loaded = load_config(path, ["diffusion.T=7", "grouping.n_subs=8", "grouping.n_ovls=2",
                                "gae.enc_widths=[16, 24]", "output_dir=\"elsewhere\""])
    assert loaded.diffusion.T == 7
    assert loaded.grouping.n_subs == 8
    assert loaded.gae.enc_widths == (16, 24)
    assert loaded.output_dir == "elsewhere"
    assert config_hash(loaded) != config_hash(cfg)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"nonsense": 1})
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"grouping": {"n_subs": 8, "bogus": 2}})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"scale": 5})
    with pytest.raises(ConfigError):
        config_from_dict({"grouping": {"n_subs": 8, "n_ovls": 8}})
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides({}, ["no-equals-sign"])


def test_missing_config_file():
    with pytest.raises(ConfigError, match="no such config"):
        load_config("/nope/missing.json")


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)


def test_output_root_env(tmp_path, monkeypatch):
    cfg = default_config()
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert str(cfg.resolved_output_dir()).startswith(str(tmp_path))
    monkeypatch.delenv(OUTPUT_ROOT_ENV)
    assert not str(cfg.resolved_output_dir()).startswith(str(tmp_path))


def test_checkpoint_round_trip(tmp_path):
    lin = torch.nn.Linear(3, 3)
    path = tmp_path / "ck.pt"
    save_checkpoint(path, "gae", lin.state_dict(), {"steps": 5}, extras={"x": 1})
    payload = load_checkpoint(path, expect_kind="gae")
    assert payload["manifest"]["steps"] == 5
    assert payload["extras"]["x"] == 1
    assert torch.equal(payload["state"]["weight"], lin.state_dict()["weight"])
    with pytest.raises(ConfigError, match="kind"):
        load_checkpoint(path, expect_kind="diffusion")
    with pytest.raises(ConfigError, match="no such checkpoint"):
        load_checkpoint(tmp_path / "missing.pt")


def test_state_dict_digest_tracks_changes():
    lin = torch.nn.Linear(3, 3)
    d1 = state_dict_digest(lin.state_dict())
    assert d1 == state_dict_digest(lin.state_dict())
    with torch.no_grad():
        lin.weight += 1.0
    assert d1 != state_dict_digest(lin.state_dict())
