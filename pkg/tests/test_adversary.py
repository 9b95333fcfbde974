import pytest

from guardfs.adversary import run_benign, run_ransomware
from guardfs.adversary.benign import BENIGN_FOUR, BenignSpec
from guardfs.adversary.corpus import CorpusSpec, generate_corpus
from guardfs.adversary.crypto import StreamEncryptor
from guardfs.adversary.ransomware import FAMILIES, NOTE_NAME, RansomSpec, preset, sleeper
from guardfs.defense import DefenseMode
from guardfs.harness.experiment import ExperimentPlan, run_experiment
from guardfs.harness.snapshot import bytes_lost, snapshot
from guardfs.telemetry import shannon_entropy


def test_cipher_is_keyed_and_high_entropy():
    data = b"a" * 65536
    e = StreamEncryptor(1)
    c = e.encrypt(data, "f1")
    assert c == StreamEncryptor(1).encrypt(data, "f1")
    assert c != StreamEncryptor(2).encrypt(data, "f1") and c != e.encrypt(data, "f2")
    assert shannon_entropy(c) > 7.99


def test_presets_cover_three_families():
    assert set(FAMILIES) == {"aggressive-parallel", "sequential-basic", "stealth-throttled"}
    assert preset("aggressive-parallel").parallelism > 1
    assert preset("sequential-basic").mode == "create-then-unlink"
    assert preset("stealth-throttled").duty is not None
    assert sleeper(1e6, 10.0).benign_phase == 10.0
    with pytest.raises(ValueError):
        preset("wannacry")


@pytest.mark.parametrize("bad", [dict(rate=0), dict(parallelism=0), dict(traversal="random"),
                                 dict(mode="wipe"), dict(duty=(0, 1))])
def test_spec_validation(bad):
    kw = dict(family="x", rate=1e6) | bad
    with pytest.raises(ValueError):
        RansomSpec(**kw)


def test_spec_dict_roundtrip():
    s = preset("stealth-throttled", suffix_filter={".txt"})
    assert RansomSpec.from_dict(s.to_dict()) == s
    b = BenignSpec("archiver", seed=3)
    assert BenignSpec.from_dict(b.to_dict()) == b
    with pytest.raises(ValueError):
        BenignSpec("miner")


def test_suffix_filter_limits_targets():
    plan = ExperimentPlan(DefenseMode.none(), corpus=CorpusSpec(4 << 20, 40, seed=2),
                          ransomware=preset("sequential-basic", rate=4e6, suffix_filter={".txt"}), cap=60)
    r = run_experiment(plan)
    assert r.loss_fraction == 1.0
    assert all(p.endswith(".txt") for p in r.loss.files_modified)
    assert r.eligible_bytes < 4 << 20


@pytest.mark.parametrize("wl", BENIGN_FOUR)
def test_benign_workloads_touch_only_their_outputs(wl):
    spec = BenignSpec(wl, duration=10.0, rate=2e6)
    plan = ExperimentPlan(DefenseMode.none(), corpus=CorpusSpec(4 << 20, 40, seed=2), benign=(spec,), cap=60)
    r = run_experiment(plan)
    assert r.loss.bytes_lost == 0
    assert r.durations[wl] > 0


@pytest.mark.slow
def test_real_processes_on_plain_directory(tmp_path):
    root = tmp_path / "root"
    generate_corpus(CorpusSpec(2 << 20, 20, seed=1), root)
    before = snapshot(root)
    h = run_ransomware(preset("aggressive-parallel", rate=20e6, max_respawn=0), root, tmp_path / "work")
    assert h.wait(60) == 0
    st = h.stats()
    assert st["processes"] >= 2 and h.tree_gone()
    assert bytes_lost(before, snapshot(root)).bytes_lost == before.total_bytes()
    assert any(p.name == NOTE_NAME for p in root.rglob("*"))
    b = run_benign(BenignSpec("sensor-logger", duration=1.0), root, tmp_path / "work2")
    assert b.wait(30) == 0 and (root / "logs").is_dir()
