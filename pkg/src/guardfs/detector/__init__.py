"""Detection plane: datasets, classifiers, evaluation and live verdicts."""

from guardfs.detector.dataset import (
    BENIGN,
    DATASET_COLUMNS,
    MALICIOUS,
    Dataset,
    LabeledVector,
    build_dataset,
    read_csv,
    split,
    write_csv,
)
from guardfs.detector.forest import ForestModel, Tree, train_forest
from guardfs.detector.live import DetectorLoop, LiveDetector, OracleDetector, engine_sink
from guardfs.detector.logistic import LogisticModel, loss_and_grad, train_logistic
from guardfs.detector.metrics import (
    EvalReport,
    evaluate,
    per_family_recall,
    report_from_predictions,
    unseen_family_recall,
)
from guardfs.detector.modelio import ModelFormatError, load_model, load_reference_model, save_model
from guardfs.detector.threshold import ThresholdModel, train_threshold_baseline


def predict(model, vector) -> tuple[str, float]:
    """(label, score) for one feature vector."""
    return model.predict(vector)


def train(kind: str, X, y, seed: int = 0, **params):
    if kind == "forest":
        return train_forest(X, y, seed=seed, **params)
    if kind == "logistic":
        return train_logistic(X, y, seed=seed, **params)
    if kind == "threshold":
        return train_threshold_baseline(X, y, **params)
    raise ValueError(f"unknown model kind {kind!r}")


__all__ = [
    "BENIGN",
    "DATASET_COLUMNS",
    "Dataset",
    "DetectorLoop",
    "EvalReport",
    "ForestModel",
    "LabeledVector",
    "LiveDetector",
    "OracleDetector",
    "LogisticModel",
    "MALICIOUS",
    "ModelFormatError",
    "ThresholdModel",
    "Tree",
    "build_dataset",
    "engine_sink",
    "evaluate",
    "load_model",
    "load_reference_model",
    "loss_and_grad",
    "per_family_recall",
    "predict",
    "read_csv",
    "report_from_predictions",
    "save_model",
    "split",
    "train",
    "train_forest",
    "train_logistic",
    "train_threshold_baseline",
    "unseen_family_recall",
    "write_csv",
]
