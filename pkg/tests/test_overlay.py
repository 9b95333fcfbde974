import errno
import os
import random

import pytest

from guardfs.calls import CallKind
from guardfs.defense import DefenseMode, Verdict
from guardfs.harness.snapshot import snapshot
from guardfs.overlay import AlreadyAttached, MountConfig, PathEscapeError, ScriptedDriver, attach, detach, map_path

from oracles import random_ops, run_bare, run_scripted, tree_contents


class TestMapPath:
    @pytest.fixture
    def c(self, tmp_path):
        return MountConfig("/mnt/g", str(tmp_path), DefenseMode.none())

    def test_prefix_substitution(self, c, tmp_path):
        assert map_path("/mnt/g/a/b.txt", c) == f"{tmp_path}/a/b.txt"

    def test_root(self, c, tmp_path):
        assert map_path("/mnt/g/", c) == f"{tmp_path}/"

    def test_traversal_rejected(self, c):
        with pytest.raises(PathEscapeError):
            map_path("/mnt/g/../etc/passwd", c)

    def test_outside_mount_rejected(self, c):
        with pytest.raises(PathEscapeError):
            map_path("/etc/passwd", c)

    def test_config_invariants(self, tmp_path):
        with pytest.raises(ValueError):
            MountConfig("relative", str(tmp_path), DefenseMode.none())
        with pytest.raises(ValueError):
            MountConfig(str(tmp_path), str(tmp_path), DefenseMode.none())
        with pytest.raises(ValueError):
            MountConfig("/mnt/g", str(tmp_path / "missing"), DefenseMode.none())
        with pytest.raises(ValueError):
            MountConfig("/mnt/g", str(tmp_path), DefenseMode.none(), window_seconds=0)


def test_passthrough_matches_bare_directory(scripted, dirs, bare):
    s, drv, _ = scripted()
    ops = random_ops(random.Random(7), 300)
    got = run_scripted(ops, drv.process(100))
    want = run_bare(ops, bare)
    assert got == want
    assert tree_contents(dirs[1]) == tree_contents(bare)


def test_read_after_write(scripted):
    s, drv, _ = scripted()
    p = drv.process(5)
    fh = p.create("/f", os.O_RDWR).fh
    assert p.write(fh, b"hello world", 3).count == 11
    assert p.read(fh, 5, 6).data == b"lo wo"
    assert p.read(fh, 100, 0).data == b"\0\0\0hello world"
    p.release(fh)


def test_one_event_per_call(scripted):
    s, drv, _ = scripted()
    ops = random_ops(random.Random(3), 200)
    run_scripted(ops, drv.process(9))
    assert s.recorder.recorded == s.stats["events"]
    assert s.stats["events"] == sum(s.stats[k] for k in ("forwarded", "fabricated", "killed"))


def test_write_events_carry_bytes_and_entropy(scripted):
    s, drv, clock = scripted()
    p = drv.process(5)
    fh = p.create("/f").fh
    p.write(fh, bytes(range(256)))
    fh2 = p.open("/f").fh
    p.read(fh2, 100)
    ev = [e for w in s.recorder.close_until(clock.now_ms() + 10_000) for e in w.events]
    w = [e for e in ev if e.op is CallKind.WRITE][0]
    r = [e for e in ev if e.op is CallKind.READ][0]
    assert (w.bytes, w.entropy) == (256, 8.0)
    assert (r.bytes, r.entropy) == (100, None)
    assert w.path == "/f"


def test_underlay_errors_pass_through(scripted):
    s, drv, _ = scripted()
    p = drv.process(5)
    assert p.open("/missing").error == errno.ENOENT
    assert p.rmdir("/missing").error == errno.ENOENT
    assert p.read(999, 10).error == errno.EBADF
    assert p.open("/../etc/passwd").error == errno.EACCES


def test_double_attach_rejected(dirs):
    mnt, under = dirs
    c = MountConfig(str(mnt), str(under), DefenseMode.none())
    s = attach(c, ScriptedDriver())
    try:
        with pytest.raises(AlreadyAttached):
            attach(c, ScriptedDriver())
    finally:
        detach(s)
    detach(attach(c, ScriptedDriver()))


def test_attach_detach_leaves_underlay_identical(dirs):
    mnt, under = dirs
    (under / "a.txt").write_bytes(b"data")
    before = snapshot(under)
    detach(attach(MountConfig(str(mnt), str(under), DefenseMode.none()), ScriptedDriver()))
    assert snapshot(under) == before


def test_hundred_writes_land(scripted, dirs):
    s, drv, _ = scripted()
    p = drv.process(11)
    fh = p.create("/log").fh
    for i in range(100):
        assert p.write(fh, b"%03d\n" % i, i * 4).count == 4
    p.release(fh)
    detach(s)
    assert (dirs[1] / "log").read_bytes() == b"".join(b"%03d\n" % i for i in range(100))


class TestFabrication:
    def setup(self, scripted, mode=None):
        s, drv, clock = scripted(mode or DefenseMode.obf())
        s.engine.on_verdict(66, Verdict.MALICIOUS, now=clock.now())
        return s, drv, clock

    def test_malicious_write_is_fabricated(self, scripted, dirs):
        s, drv, _ = self.setup(scripted)
        (dirs[1] / "doc").write_bytes(b"original")
        bad = drv.process(66)
        fh = bad.open("/doc", os.O_RDWR).fh
        assert bad.read(fh, 100).data == b"original"  # reads are still granted
        assert bad.write(fh, b"x" * 4096).count == 4096
        assert bad.write(fh, b"").count == 0
        bad.release(fh)
        assert (dirs[1] / "doc").read_bytes() == b"original"

    def test_every_modifying_kind_succeeds_without_mutation(self, scripted, dirs):
        s, drv, _ = self.setup(scripted)
        (dirs[1] / "d").mkdir()
        (dirs[1] / "f").write_bytes(b"keep")
        before = snapshot(dirs[1])
        bad = drv.process(66)
        assert bad.unlink("/f").error == 0
        assert bad.rename("/f", "/g").error == 0
        assert bad.truncate("/f", 0).error == 0
        assert bad.rmdir("/d").error == 0
        assert bad.mkdir("/new").error == 0
        c = bad.create("/created")
        assert c.error == 0 and c.fh is not None
        assert bad.write(c.fh, b"abc").count == 3
        bad.release(c.fh)
        assert snapshot(dirs[1]) == before
        assert sorted(os.listdir(dirs[1])) == ["d", "f"]
        assert s.stats["fabricated"] == 7

    def test_fabricated_and_genuine_responses_match_field_by_field(self, scripted, dirs):
        s, drv, _ = self.setup(scripted)
        for name in ("a", "b"):
            (dirs[1] / name).write_bytes(b"0" * 100)
        good, bad = drv.process(7), drv.process(66)

        def stream(p, name):
            out = []
            fh = p.open("/" + name, os.O_WRONLY).fh
            for size in (1, 512, 4096, 0):
                r = p.write(fh, os.urandom(size))
                out.append((r.error, r.count, r.data, r.entries))
            for r in (p.release(fh), p.rename("/" + name, "/" + name + ".x")):
                out.append((r.error, r.count, r.data, r.entries, r.fh, r.attr))
            return out

        assert stream(bad, "a") == stream(good, "b")
        assert (dirs[1] / "a").exists() and (dirs[1] / "b.x").exists()

    def test_fail_open_when_engine_breaks(self, scripted, dirs):
        s, drv, _ = scripted(DefenseMode.obf())

        def boom(*a, **k):
            raise RuntimeError("engine down")

        s.engine.decide = boom
        p = drv.process(3)
        fh = p.create("/f").fh
        assert p.write(fh, b"abc").count == 3
        p.release(fh)
        assert (dirs[1] / "f").read_bytes() == b"abc"
        assert s.stats["engine_errors"] == 3

    def test_fail_closed_fabricates(self, scripted, dirs):
        s, drv, _ = scripted(DefenseMode.obf(), fail_closed=True)
        s.engine.decide = lambda *a, **k: (_ for _ in ()).throw(RuntimeError("down"))
        p = drv.process(3)
        assert p.mkdir("/x").error == 0
        assert not (dirs[1] / "x").exists()
