import time

import numpy as np
import pytest

from guardfs.calls import CallKind
from guardfs.defense import Verdict
from guardfs.detector import (
    Dataset,
    LiveDetector,
    ModelFormatError,
    OracleDetector,
    build_dataset,
    evaluate,
    load_model,
    load_reference_model,
    loss_and_grad,
    read_csv,
    report_from_predictions,
    save_model,
    split,
    train,
    train_forest,
    train_logistic,
    unseen_family_recall,
    write_csv,
)
from guardfs.detector.modelio import dumps, loads
from guardfs.overlay.verdicts import MemoryChannel, VerdictMessage, open_consumer, open_producer
from guardfs.telemetry import FsEvent, WindowRecorder


def synthetic(n=200, seed=0) -> Dataset:
    """Benign: few low-entropy writes. Malicious: many high-entropy writes."""
    rng = np.random.default_rng(seed)
    rows, y, fam = [], [], []
    for i in range(n):
        mal = i % 2
        w = rng.integers(20, 80) if mal else rng.integers(0, 15)
        e = rng.uniform(7.6, 8.0) if mal else rng.uniform(0.0, 6.0)
        rows.append([w, rng.integers(0, 80), rng.integers(0, 10) * mal, rng.integers(0, 5),
                     rng.integers(0, 5), e - 0.1, e, min(e + 0.05, 8.0)])
        y.append(mal)
        fam.append(f"fam{i % 3}" if mal else "bench")
    return Dataset(np.array(rows, float), y, np.array(fam, dtype=object))


@pytest.fixture(scope="module")
def ds():
    return synthetic()


@pytest.mark.parametrize("kind", ["forest", "logistic", "threshold"])
def test_models_separate_synthetic_data(ds, kind):
    tr, te = split(ds, 0.8, seed=1)
    model = train(kind, tr.X, tr.y, n_trees=20) if kind == "forest" else train(kind, tr.X, tr.y)
    assert evaluate(model, te.X, te.y).accuracy >= 0.95
    label, score = model.predict(te.X[0])
    assert label in ("benign", "malicious") and 0.0 <= score <= 1.0


def test_split_is_stratified_and_seeded(ds):
    tr, te = split(ds, 0.8, seed=3)
    assert len(tr) + len(te) == len(ds)
    assert tr.class_counts() == (80, 80) and te.class_counts() == (20, 20)
    tr2, _ = split(ds, 0.8, seed=3)
    assert np.array_equal(tr.X, tr2.X)


def test_split_rejects_single_class(ds):
    with pytest.raises(ValueError):
        split(ds.subset(np.flatnonzero(ds.y == 0)))


def test_training_rejects_one_class():
    with pytest.raises(ValueError):
        train_forest(np.zeros((5, 8)), np.zeros(5))


def test_logistic_gradient_matches_finite_differences(ds):
    rng = np.random.default_rng(0)
    Xs = (ds.X - ds.X.mean(0)) / ds.X.std(0)
    for _ in range(5):
        p = rng.normal(size=9)
        _, g = loss_and_grad(p, Xs, ds.y.astype(float))
        h = 1e-6
        num = np.array([(loss_and_grad(p + h * e, Xs, ds.y)[0] - loss_and_grad(p - h * e, Xs, ds.y)[0]) / (2 * h)
                        for e in np.eye(9)])
        assert np.max(np.abs(num - g) / np.maximum(np.abs(num), 1e-8)) < 1e-5


def test_logistic_loss_decreases(ds):
    m = train_logistic(ds.X, ds.y, epochs=200)
    assert m.losses[-1] < m.losses[0]


@pytest.mark.parametrize("kind", ["forest", "logistic", "threshold"])
def test_model_file_roundtrip_is_exact(ds, kind, tmp_path):
    m = train(kind, ds.X, ds.y, n_trees=5) if kind == "forest" else train(kind, ds.X, ds.y)
    save_model(m, tmp_path / "m.txt")
    back = load_model(tmp_path / "m.txt")
    assert np.array_equal(back.predict_proba(ds.X), m.predict_proba(ds.X))
    assert dumps(back) == dumps(m)


@pytest.mark.parametrize("text", ["", "hello 1\nkind forest\nfeatures x\n",
                                  "guardfs-model 2\nkind forest\nfeatures x\n",
                                  "guardfs-model 1\nkind forest\nfeatures writes\n"])
def test_bad_model_files_rejected(text):
    with pytest.raises(ModelFormatError):
        loads(text)


def test_reference_model_loads():
    m = load_reference_model()
    assert m.kind == "forest"
    hot = [60, 60, 0, 0, 0, 7.9, 7.95, 8.0]
    cold = [2, 10, 0, 0, 0, 3.0, 3.5, 4.0]
    assert m.predict(hot)[0] == "malicious"
    assert m.predict(cold)[0] == "benign"


def test_dataset_csv_roundtrip(ds, tmp_path):
    write_csv(ds, tmp_path / "d.csv")
    back = read_csv(tmp_path / "d.csv")
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)


def test_build_dataset_labels_by_pid():
    evs = [FsEvent(100, 1, CallKind.WRITE, "/a", 10, 8.0), FsEvent(200, 2, CallKind.READ, "/b", 10),
           FsEvent(6000, 1, CallKind.WRITE, "/a", 10, 7.0)]
    d = build_dataset([(evs, {1: "malicious"}, "fam")], 5, default_label="benign")
    assert list(d.y) == [1, 0, 1] and list(d.pid) == [1, 2, 1]
    assert list(build_dataset([(evs, {1: "malicious"}, "fam")], 5).pid) == [1, 1]


def test_metrics():
    r = report_from_predictions([1, 1, 0, 0], [1, 0, 0, 1])
    assert (r.accuracy, r.precision, r.recall) == (0.5, 0.5, 0.5)
    assert r.confusion() == [[1, 1], [1, 1]]


def test_unseen_family_recall(ds):
    rec = unseen_family_recall(lambda X, y: train_forest(X, y, n_trees=10), ds)
    assert set(rec) == {"fam0", "fam1", "fam2"}
    assert all(v >= 0.9 for v in rec.values())


class TestLiveDetector:
    def feed(self, det_cls, **kw):
        rec = WindowRecorder(5)
        chan = MemoryChannel()
        det = det_cls(recorder=rec, publish=chan.publish, **kw)
        # pid 7 reads and rewrites with ciphertext; pid 8 only reads
        for i in range(50):
            rec.record(FsEvent(1000 + 2 * i, 7, CallKind.READ, "/x", 4096))
            rec.record(FsEvent(1001 + 2 * i, 7, CallKind.WRITE, "/x", 4096, 7.99))
        rec.record(FsEvent(1200, 8, CallKind.READ, "/y", 10))
        return det, chan

    def test_one_malicious_record_per_pid(self):
        marks = []
        det, chan = self.feed(LiveDetector, model=load_reference_model(), on_classified=marks.append)
        assert det.step(4999) == []
        det.step(5000)
        det.recorder.record(FsEvent(6000, 7, CallKind.WRITE, "/x", 4096, 7.99))
        det.step(10000)
        got = {(m.pid, m.verdict) for m in chan.drain()}
        assert got == {(7, Verdict.MALICIOUS), (8, Verdict.BENIGN)}
        assert marks == [5.0, 10.0] and det.flagged == {7}

    def test_oracle(self):
        det, chan = self.feed(OracleDetector, is_malicious_pid=lambda p: p == 7)
        det.step(5000)
        assert [(m.pid, m.verdict) for m in chan.drain()] == [(7, Verdict.MALICIOUS), (8, Verdict.BENIGN)]


def test_verdict_line_format():
    m = VerdictMessage(12, Verdict.MALICIOUS, 1700000000000)
    assert m.to_line() == "verdict 12 malicious 1700000000000"
    assert VerdictMessage.from_line(m.to_line()) == m
    for bad in ("verdict 12 unknown 1", "verdict 0 benign 1", "v 1 benign 1"):
        with pytest.raises(ValueError):
            VerdictMessage.from_line(bad)


@pytest.mark.parametrize("kind", ["file", "unix"])
def test_verdict_channel_delivers(tmp_path, kind):
    desc = str(tmp_path / "chan") if kind == "file" else f"unix:{tmp_path}/chan.sock"
    got = []
    cons = open_consumer(desc, got.append)
    cons.start()
    prod = open_producer(desc)
    try:
        msgs = [VerdictMessage(i, Verdict.BENIGN if i % 2 else Verdict.MALICIOUS, i) for i in range(1, 6)]
        for m in msgs:
            prod.publish(m)
        deadline = time.monotonic() + 5
        while len(got) < len(msgs) and time.monotonic() < deadline:
            time.sleep(0.01)
        assert got == msgs
    finally:
        prod.close()
        cons.stop()
