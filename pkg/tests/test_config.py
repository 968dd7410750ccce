import json

import pytest

from helpers import BUNDLE_CONFIG
from roiedge.config import RunConfig
from roiedge.errors import ConfigError


def test_defaults_validate_and_round_trip(tmp_path):
    cfg = RunConfig()
    cfg.save(tmp_path / "c.json")
    again = RunConfig.load(tmp_path / "c.json")
    assert again.to_dict() == cfg.to_dict()
    assert "base_dir" not in cfg.to_dict()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="roi"):
        RunConfig.from_dict({"roi": {"sigma": 0.5}})
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(["roi.nope=1"])
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(["novalue"])


def test_overrides_parse_json_values():
    cfg = RunConfig().with_overrides(["roi.sigma_m=0.4", "frequency.enabled=false", "policy.solver=brute_force", "cam.target_classes=[0,2]"])
    assert cfg.roi.sigma_m == 0.4 and cfg.frequency.enabled is False
    assert cfg.policy.solver == "brute_force" and cfg.cam.target_classes == [0, 2]


@pytest.mark.parametrize(
    "override",
    [
        "roi.sigma_m=1.5",
        "link.loss_rate=2",
        "policy.solver=\"greedy\"",
        "policy.rates=[0.5,0.25,1.0]",
        "policy.rate_override=0.3",
        "layout.top_fraction=0",
        "cam.target_classes=[7]",
        "extractor.strides=[4,4]",
        "policy.kappa=0",
    ],
)
def test_invalid_values(override):
    with pytest.raises(ConfigError):
        RunConfig().with_overrides([override])


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.load(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "bad.json")


def test_relative_paths_resolve_against_config_dir():
    cfg = RunConfig.load(BUNDLE_CONFIG)
    assert cfg.resolve(cfg.io.ground_truth).endswith("scenario60/ground_truth.jsonl")
    with open(BUNDLE_CONFIG) as fh:
        assert json.load(fh)["io"]["ground_truth"] == "ground_truth.jsonl"
