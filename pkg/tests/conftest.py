import os
import shutil

import pytest

from guardfs.clock import VirtualClock
from guardfs.defense import DefenseEngine, DefenseMode, VerdictStore
from guardfs.overlay import MountConfig, ScriptedDriver, attach, detach


def fuse_available() -> bool:
    return os.geteuid() == 0 and os.path.exists("/dev/fuse")


live = pytest.mark.skipif(not fuse_available(), reason="needs root and /dev/fuse")


@pytest.fixture
def dirs(tmp_path):
    under = tmp_path / "under"
    mnt = tmp_path / "mnt"
    under.mkdir()
    mnt.mkdir()
    return mnt, under


@pytest.fixture
def scripted(dirs):
    """Factory for a scripted session on a virtual clock: (session, driver, clock)."""
    made = []

    def make(mode=None, killer=None, start=1000.0, **kw):
        mnt, under = dirs
        mode = mode or DefenseMode.none()
        clock = VirtualClock(start)
        engine = DefenseEngine(mode, VerdictStore(propagate=False), killer=killer, clock=clock)
        drv = ScriptedDriver(clock)
        s = attach(MountConfig(str(mnt), str(under), mode), drv, engine=engine, clock=clock, realtime=False, **kw)
        made.append(s)
        return s, drv, clock

    yield make
    for s in made:
        detach(s)


@pytest.fixture
def bare(tmp_path):
    d = tmp_path / "bare"
    d.mkdir()
    yield d
    shutil.rmtree(d, ignore_errors=True)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
