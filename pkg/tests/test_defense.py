import itertools
import os
import subprocess
import sys
import time

import pytest

from guardfs.calls import FABRICABLE, CallContext, CallKind, SyscallRequest
from guardfs.defense import (
    ActionKind,
    AuditLog,
    AuditRecord,
    DefenseMode,
    GateBook,
    PendingGate,
    Verdict,
    VerdictStore,
    Waiter,
    decide,
    fabricate_response,
    fabrication_delay,
    gate_release,
    kill_process,
)
from guardfs.defense.actions import KillResult
from guardfs.defense.engine import gate_deadline, pid_alive


def expected(mode: DefenseMode, verdict: Verdict, kind: CallKind, inside_gate: bool) -> ActionKind:
    """The decision table written out case by case."""
    malicious = verdict is Verdict.MALICIOUS
    name = mode.kind.value
    if name == "none":
        return ActionKind.FORWARD
    if name == "pkill":
        return ActionKind.KILL if malicious else ActionKind.FORWARD
    if name == "delobf" and kind in FABRICABLE:
        return ActionKind.DELAY
    if name == "trackobf" and kind in FABRICABLE and verdict is Verdict.UNKNOWN and inside_gate:
        return ActionKind.DELAY
    if malicious and kind in FABRICABLE:
        return ActionKind.FABRICATE
    return ActionKind.FORWARD


MODES = [DefenseMode.none(), DefenseMode.pkill(), DefenseMode.obf(), DefenseMode.delobf(5), DefenseMode.trackobf(5)]


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.label())
def test_decision_table_exhaustive(mode):
    for verdict, kind, inside in itertools.product(Verdict, CallKind, (True, False)):
        store = VerdictStore(propagate=False)
        store.touch(42, 100.0)
        if verdict is not Verdict.UNKNOWN:
            store.set(42, verdict, 100.0)
        now = 101.0 if inside else 106.0
        ctx = CallContext(42, int(now * 1e9), kind)
        got = decide(ctx, kind, mode, store, now=now)
        assert got.kind is expected(mode, verdict, kind, inside), (mode.label(), verdict, kind, inside)
        if got.kind is ActionKind.DELAY:
            assert got.deadline > now
        released = decide(ctx, kind, mode, store, now=now, released=True)
        assert released.kind is not ActionKind.DELAY


def test_delobf_deadline_is_window_aligned():
    assert gate_deadline(12.3, 5) == 15
    assert gate_deadline(15.0, 5) == 20
    store = VerdictStore(propagate=False)
    a = decide(CallContext(1, 0, CallKind.WRITE), CallKind.WRITE, DefenseMode.delobf(5), store, now=11.0)
    b = decide(CallContext(2, 0, CallKind.WRITE), CallKind.WRITE, DefenseMode.delobf(5), store, now=14.9)
    assert a.deadline == b.deadline == 15


def test_trackobf_deadline_follows_first_contact():
    store = VerdictStore(propagate=False)
    store.touch(9, 50.0)
    act = decide(CallContext(9, 0, CallKind.UNLINK), CallKind.UNLINK, DefenseMode.trackobf(3), store, now=51.0)
    assert act.kind is ActionKind.DELAY and act.deadline == 53.0


def test_gate_all_calls_delays_reads():
    store = VerdictStore(propagate=False)
    m = DefenseMode.delobf(5, gate_all_calls=True)
    assert decide(CallContext(1, 0, CallKind.READ), CallKind.READ, m, store, now=1.0).kind is ActionKind.DELAY


class TestVerdictStore:
    def test_malicious_is_absorbing(self):
        s = VerdictStore(propagate=False)
        assert s.set(5, Verdict.BENIGN, 1.0)
        assert s.set(5, Verdict.MALICIOUS, 2.0)
        assert not s.set(5, Verdict.BENIGN, 3.0)
        assert s.get(5).state is Verdict.MALICIOUS and s.get(5).decided_at == 2.0
        assert s.set(5, Verdict.MALICIOUS, 4.0)
        assert s.get(5).decided_at == 2.0

    def test_unknown_cannot_be_published(self):
        with pytest.raises(ValueError):
            VerdictStore().set(5, Verdict.UNKNOWN, 1.0)

    def test_benign_can_become_malicious(self):
        s = VerdictStore(propagate=False)
        s.set(5, Verdict.BENIGN, 1.0)
        s.set(5, Verdict.MALICIOUS, 2.0)
        assert s.malicious_pids() == [5]

    def test_propagation_to_descendants(self):
        tree = {30: [20, 10], 20: [10]}
        s = VerdictStore(propagate=True, ancestry=lambda p: tree.get(p, []))
        s.set(20, Verdict.MALICIOUS, 1.0)
        assert s.effective(30).state is Verdict.MALICIOUS
        assert s.effective(10).state is Verdict.UNKNOWN
        assert s.get(30).state is Verdict.UNKNOWN

    def test_clock_stamp_after_visibility(self):
        s = VerdictStore(propagate=False)
        seen = []
        s.set(3, Verdict.MALICIOUS, lambda: seen.append(s.get(3).state) or 7.0)
        assert seen == [Verdict.MALICIOUS] and s.get(3).decided_at == 7.0

    def test_gc_expires_dead_pids(self):
        s = VerdictStore(propagate=False)
        s.set(3, Verdict.MALICIOUS, 0.0)
        s.touch(4, 0.0)
        assert s.gc(0.0, lambda p: False) == []
        assert sorted(s.gc(VerdictStore.EXPIRY_S, lambda p: p == 4)) == [3]
        assert 3 not in s and s.first_seen(4) == 0.0


class TestGates:
    def test_release_once_in_order(self):
        g = PendingGate(10.0)
        for i in range(5):
            g.add(Waiter(i, 1, 100))
        assert gate_release(g, 9.99) == []
        assert g.buffered_bytes == 500
        out = gate_release(g, 10.0)
        assert [w.call_id for w in out] == list(range(5))
        assert gate_release(g, 11.0) == [] and len(g) == 0

    def test_global_gate_waits_for_watermark_or_grace(self):
        book = GateBook(grace=1.0)
        book.park(10.0, Waiter(1, 7, 10))
        assert book.due(10.0, lambda p: False) == []
        book.mark_classified(10.0)
        assert [w.call_id for w in book.due(10.0, lambda p: False)] == [1]
        book.park(20.0, Waiter(2, 7, 0))
        assert book.due(20.5, lambda p: False) == []
        assert len(book.due(21.0, lambda p: False)) == 1

    def test_pid_gate_released_by_verdict(self):
        book = GateBook(grace=5.0)
        book.park(10.0, Waiter(1, 7, 0), pid_gate=True)
        book.park(10.0, Waiter(2, 8, 0), pid_gate=True)
        out = book.due(10.0, lambda p: p == 7)
        assert [w.pid for w in out] == [7]
        assert book.waiting() == 1 and book.next_deadline() == 10.0

    def test_drain(self):
        book = GateBook()
        book.park(30.0, Waiter(2, 1, 5))
        book.park(20.0, Waiter(1, 1, 5), pid_gate=True)
        assert book.buffered_bytes() == 10
        assert [w.call_id for w in book.drain()] == [1, 2]
        assert book.waiting() == 0


class TestSessionGating:
    def test_delobf_holds_then_fabricates_for_flagged_pid(self, scripted, dirs):
        s, drv, clock = scripted(DefenseMode.delobf(5), start=1001.0)
        p_good = drv.submit(7, CallKind.MKDIR, path="/good")
        p_bad = drv.submit(8, CallKind.MKDIR, path="/bad")
        assert not p_good.done and not p_bad.done
        assert not (dirs[1] / "good").exists()
        s.engine.on_verdict(8, Verdict.MALICIOUS, now=clock.now())
        clock.set(1005.0)
        s.engine.mark_classified(1005.0)
        assert s.tick() == 2
        assert p_good.wait(0).ok and p_bad.wait(0).ok
        assert (dirs[1] / "good").exists() and not (dirs[1] / "bad").exists()
        assert p_bad.actions == [ActionKind.DELAY, ActionKind.FABRICATE]

    def test_trackobf_gate_only_first_t_seconds(self, scripted, dirs):
        s, drv, clock = scripted(DefenseMode.trackobf(2))
        first = drv.submit(7, CallKind.MKDIR, path="/a")
        assert not first.done
        clock.advance(2.5)
        late = drv.submit(7, CallKind.MKDIR, path="/b")
        assert late.done
        s.engine.on_verdict(7, Verdict.BENIGN, now=clock.now())
        assert s.tick() == 1 and first.wait(0).ok
        assert (dirs[1] / "a").is_dir() and (dirs[1] / "b").is_dir()

    def test_detach_flushes_held_callers(self, scripted, dirs):
        from guardfs.overlay import detach

        s, drv, clock = scripted(DefenseMode.delobf(5))
        held = drv.submit(7, CallKind.MKDIR, path="/x")
        detach(s)
        assert held.wait(0).ok and (dirs[1] / "x").is_dir()

    def test_pkill_answers_then_kills(self, scripted):
        killed = []
        s, drv, clock = scripted(DefenseMode.pkill(), killer=lambda pid: killed.append(pid) or KillResult(True))
        s.engine.on_verdict(7, Verdict.MALICIOUS, now=clock.now())
        assert killed == [7]
        r = drv.call(7, CallKind.MKDIR, path="/x")
        assert r.error == 4  # EINTR
        assert killed == [7] and len(s.engine.kills) == 1

    def test_audit_records_every_decision(self, scripted, tmp_path):
        path = tmp_path / "audit.log"
        audit = AuditLog(path)
        s, drv, clock = scripted(DefenseMode.obf(), audit=audit)
        s.engine.on_verdict(8, Verdict.MALICIOUS, now=clock.now())
        drv.call(7, CallKind.MKDIR, path="/x")
        drv.call(8, CallKind.MKDIR, path="/y")
        audit.close()
        lines = path.read_text().splitlines()
        assert [AuditRecord.from_line(l).action for l in lines] == [ActionKind.FORWARD, ActionKind.FABRICATE]
        assert AuditRecord.from_line(lines[1]).to_line() == lines[1]


def test_fabricated_write_counts_full_buffer():
    req = SyscallRequest(CallContext(1, 0, CallKind.WRITE), data=b"x" * 777)
    assert fabricate_response(req).count == 777
    with pytest.raises(AssertionError):
        fabricate_response(SyscallRequest(CallContext(1, 0, CallKind.READ)))
    assert fabrication_delay(0) > 0
    assert fabrication_delay(200_000_000, 200e6) == pytest.approx(1.0)


def test_mode_parse():
    assert DefenseMode.parse("DelObf:5").label() == "delobf:5"
    assert DefenseMode.parse("track+obf", T=3).label() == "trackobf:3"
    assert DefenseMode.parse("nodefense").label() == "none"
    with pytest.raises(ValueError):
        DefenseMode.parse("bogus")
    with pytest.raises(ValueError):
        DefenseMode.delobf(0)


class TestKill:
    def test_kills_process_tree(self):
        parent = subprocess.Popen([sys.executable, "-c",
                                   "import subprocess,sys,time;"
                                   "subprocess.Popen([sys.executable,'-c','import time; time.sleep(60)']);"
                                   "time.sleep(60)"])
        time.sleep(0.5)
        from guardfs.defense.engine import proc_descendants
        kids = proc_descendants(parent.pid)
        assert kids
        t0 = time.monotonic()
        assert kill_process(parent.pid)
        assert time.monotonic() - t0 < 1.0
        parent.wait()
        assert not any(pid_alive(k) for k in kids)

    def test_refuses_self_and_init(self):
        assert kill_process(os.getpid()).reason == "permission"
        assert kill_process(1).reason == "permission"

    def test_dead_pid(self):
        p = subprocess.Popen(["true"])
        p.wait()
        assert kill_process(p.pid).reason == "already dead"


def test_delobf_buffer_stays_within_bound(scripted):
    """A writer at a known rate never has more than a window's worth of
    payload parked, plus one chunk of slack."""
    from guardfs.harness.bounds import ThroughputModel, buffer_bound

    s, drv, clock = scripted(DefenseMode.delobf(5), start=1000.0)
    eps, chunk = 1e6, 65536
    peak = 0
    for i in range(400):  # 400 chunks at 1 MB/s is about 26 s
        drv.submit(7, CallKind.WRITE, path="/out", data=b"\0" * chunk, offset=i * chunk)
        peak = max(peak, s.engine.gates.buffered_bytes())
        clock.advance(chunk / eps)
        s.engine.mark_classified(clock.now() - clock.now() % 5)
        s.tick()
    bound = buffer_bound(ThroughputModel(delta=200e6, epsilon=eps, beta=0.0, T=5)).product
    assert eps * 5 * 0.9 < peak <= bound + chunk
