import pytest
import yaml

from rdcdyn.config import ConfigError, RunConfig, dump_config, load_config, parse_config
from rdcdyn.scenarios import MEDIA_ARC, MEDIA_COMPLEX3
from rdcdyn.tensor import SaupeTensor, write_tensor_text


def test_defaults_complete():
    cfg = parse_config({})
    assert cfg.media == "arc" and cfg.frames() == list(MEDIA_ARC)
    assert cfg.solver.starts == 64 and cfg.noise == 1.0
    assert parse_config(yaml.safe_load(dump_config(cfg))) == cfg


def test_unknown_key_path():
    with pytest.raises(ConfigError, match=r"solver\.strats"):
        parse_config({"solver": {"strats": 3}})


def test_bad_values():
    with pytest.raises(ConfigError, match="occupancies"):
        parse_config({"model": {"occupancies": [0.5, 0.6], "states": [[], []]}})
    with pytest.raises(ConfigError, match="overlap"):
        parse_config({"domains": {"static": [1, 70], "dynamic": [60, 83]}})
    with pytest.raises(ConfigError, match=r"media\.0"):
        parse_config({"media": [{"sxx": 1e-4, "syy": 1e-4, "szz": 1e-4}]})
    with pytest.raises(ConfigError, match="vector_types"):
        parse_config({"vector_types": ["N-X"]})
    with pytest.raises(ConfigError):
        parse_config({"structure": {"file": "a.pdb", "accession": "1A1Z"}})


def test_media_forms(tmp_path):
    (tmp_path / "t.txt").write_text(write_tensor_text([SaupeTensor(1e-4, 2e-4, 0, 0, 0)]))
    cfg = parse_config({"media": [{"sxx": 3e-4, "syy": 5e-4, "szz": -8e-4}, {"file": "t.txt"}]})
    frames = cfg.frames(tmp_path)
    assert len(frames) == 2 and isinstance(frames[1], SaupeTensor)
    assert parse_config({"media": "complex3"}).frames() == list(MEDIA_COMPLEX3)


def test_load_errors(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(p)
    p.write_text("a: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(p)
    assert load_config(None) == RunConfig()
