from pathlib import Path

import pytest

from guardfs.config import ConfigError, load_config, parse_config


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg.get("mount", "mode") == "none"
    assert cfg.get("detector", "trees") == 100


def test_types_and_relative_paths(tmp_path):
    f = tmp_path / "g.ini"
    f.write_text("[mount]\nunderlay = data\nt = 2.5\nfail_closed = yes\n[detector]\ntrees = 7\n")
    cfg = load_config(f)
    assert cfg.get("mount", "underlay") == (tmp_path / "data").resolve()
    assert cfg.get("mount", "t") == 2.5 and cfg.get("mount", "fail_closed") is True
    assert cfg.get("detector", "trees") == 7
    assert cfg.section("throughput")["delta"] == 200e6


@pytest.mark.parametrize("text", [
    "[mount]\nmountpiont = /x\n",
    "[mounts]\nmode = obf\n",
    "[detector]\ntrees = many\n",
    "[mount]\nfail_closed = maybe\n",
    "not ini at all",
    "mode = obf\n",
])
def test_rejects_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/guardfs.ini")


def test_unknown_key_lookup_is_a_bug():
    with pytest.raises(KeyError):
        parse_config("").get("mount", "nope")
