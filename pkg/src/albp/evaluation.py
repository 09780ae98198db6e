"""Train/test splitting, confusion matrices and per-class one-vs-rest metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classifiers import LabeledDataset, Model


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float


def split(dataset: LabeledDataset, cfg: SplitConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded shuffle split; stratified per class by default.

    Per class, floor(fraction * count) samples go to train, the rest to test.
    """
    rng = np.random.default_rng(cfg.seed)
    n = len(dataset.labels)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    if cfg.stratified:
        for c in range(dataset.n_classes):
            members = np.flatnonzero(dataset.labels == c)
            if len(members) < 2:
                raise ValueError(
                    f"class {dataset.class_names[c]!r} has {len(members)} sample(s); "
                    "stratified split needs at least 2")
            perm = members[rng.permutation(len(members))]
            k = int(np.floor(cfg.train_fraction * len(members)))
            k = min(max(k, 1), len(members) - 1)  # both partitions nonempty
            train_idx.append(perm[:k])
            test_idx.append(perm[k:])
    else:
        perm = rng.permutation(n)
        k = int(np.floor(cfg.train_fraction * n))
        k = min(max(k, 1), n - 1)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))

    def take(idx):
        return LabeledDataset(dataset.features[idx], dataset.labels[idx], dataset.class_names)

    return take(tr), take(te)


def confusion(truth, predicted, num_classes: int) -> np.ndarray:
    """Counts matrix, rows = true class, columns = predicted class."""
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.shape != predicted.shape:
        raise ValueError(f"length mismatch: {truth.shape} truth vs {predicted.shape} predicted")
    for name, arr in (("truth", truth), ("predicted", predicted)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} label out of range [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (truth, predicted), 1)
    return cm


def class_metrics(cm: np.ndarray, positive: int) -> ClassMetrics:
    """One-vs-rest precision/recall/F1/accuracy for one positive class.

    Zero denominators yield 0 by convention.
    """
    cm = np.asarray(cm)
    tp = int(cm[positive, positive])
    fp = int(cm[:, positive].sum()) - tp
    fn = int(cm[positive, :].sum()) - tp
    total = int(cm.sum())
    tn = total - tp - fp - fn
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (tp + tn) / total if total > 0 else 0.0
    return ClassMetrics(precision, recall, f1, accuracy)


def evaluate(model: Model, test: LabeledDataset, descriptor: str = "", classifier: str = "") -> dict:
    """Full report: overall accuracy, per-class one-vs-rest metrics, confusion."""
    if len(test.labels) == 0:
        raise ValueError("empty test set")
    if model.n_classes != test.n_classes:
        raise ValueError(f"model has {model.n_classes} classes, test set {test.n_classes}")
    predicted = model.predict(test.features)
    cm = confusion(test.labels, predicted, test.n_classes)
    classes = []
    for c, name in enumerate(test.class_names):
        m = class_metrics(cm, c)
        classes.append({"name": name, "precision": m.precision, "recall": m.recall,
                        "f1": m.f1, "accuracy": m.accuracy})
    return {
        "descriptor": descriptor,
        "classifier": classifier or model.kind,
        "overall_accuracy": float(np.trace(cm) / cm.sum()),
        "classes": classes,
        "confusion": cm.tolist(),
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def report_from_json(text: str) -> dict:
    return json.loads(text)


def render_table(reports: list[dict]) -> str:
    """Aligned text table: one row per (descriptor, classifier, class)."""
    header = ("Descriptor", "Classifier", "Class", "Accuracy", "Precision", "Recall", "F1")
    rows = [header]
    for rep in reports:
        for cls in rep["classes"]:
            rows.append((
                rep["descriptor"], rep["classifier"], cls["name"],
                f"{rep['overall_accuracy']:.4f}", f"{cls['precision']:.4f}",
                f"{cls['recall']:.4f}", f"{cls['f1']:.4f}",
            ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for j, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
