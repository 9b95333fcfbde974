import os
import random
import subprocess
import sys
import time

import pytest

from guardfs.defense import DefenseMode, Verdict
from guardfs.service import GuardedMount

from conftest import live
from oracles import random_ops, run_bare, tree_contents

pytestmark = [live, pytest.mark.live]


@pytest.fixture
def mounted(dirs):
    made = []

    def make(mode=None, **kw):
        mnt, under = dirs
        g = GuardedMount(mnt, under, mode or DefenseMode.none(), **kw)
        g.start()
        made.append(g)
        return g

    yield make
    for g in made:
        g.stop()


def test_real_syscalls_match_bare_directory(mounted, dirs, bare):
    mounted()
    ops = random_ops(random.Random(11), 400)
    assert run_bare(ops, dirs[0]) == run_bare(ops, bare)
    assert tree_contents(dirs[0]) == tree_contents(bare)
    assert tree_contents(dirs[1]) == tree_contents(bare)


def test_large_file_roundtrip(mounted, dirs):
    mounted()
    data = os.urandom(3 << 20)
    (dirs[0] / "big").write_bytes(data)
    assert (dirs[0] / "big").read_bytes() == data
    assert (dirs[1] / "big").read_bytes() == data
    os.rename(dirs[0] / "big", dirs[0] / "big2")
    assert sorted(os.listdir(dirs[0])) == ["big2"]


def test_events_logged(mounted, dirs, tmp_path):
    g = mounted(events=tmp_path / "ev.log")
    (dirs[0] / "f").write_bytes(b"x" * 1000)
    g.stop()
    ops = [line.split()[2] for line in (tmp_path / "ev.log").read_text().splitlines()]
    assert "create" in ops and "write" in ops


def child(code):
    return subprocess.Popen([sys.executable, "-c", code], stdout=subprocess.PIPE, text=True)


def test_flagged_process_writes_are_fabricated(mounted, dirs):
    (dirs[1] / "doc").write_bytes(b"precious")
    g = mounted(DefenseMode.obf())
    p = child("import sys,os,time\n"
              "time.sleep(0.5)\n"
              f"p={str(dirs[0] / 'doc')!r}\n"
              "open(p,'wb').write(b'ciphertext')\n"
              "os.rename(p,p+'.locked')\n"
              "print(open(p,'rb').read().decode(), os.path.exists(p+'.locked'))\n")
    g.engine.on_verdict(p.pid, Verdict.MALICIOUS)
    out, _ = p.communicate(timeout=30)
    assert p.returncode == 0
    assert (dirs[1] / "doc").read_bytes() == b"precious"
    assert not (dirs[1] / "doc.locked").exists()
    assert out.split()[0] == "precious"


def test_pkill_terminates_writer(mounted, dirs):
    g = mounted(DefenseMode.pkill())
    p = child("import time\n"
              f"f=open({str(dirs[0] / 'out')!r},'wb')\n"
              "while True:\n    f.write(b'x'*4096); f.flush(); time.sleep(0.01)\n")
    time.sleep(0.5)
    g.engine.on_verdict(p.pid, Verdict.MALICIOUS)
    p.wait(timeout=5)
    assert p.returncode == -9
    assert g.engine.kills and g.engine.kills[0].result.ok
