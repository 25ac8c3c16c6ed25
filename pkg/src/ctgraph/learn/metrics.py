"""Ranking, classification and regression metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class MetricReport:
    values: dict[str, float] = field(default_factory=dict)
    scope: str = "test"

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def write_reports(path: str | Path, reports: list[MetricReport]) -> None:
    """One row per report scope, one column per metric (union over reports)."""
    keys: list[str] = []
    for rep in reports:
        keys += [k for k in rep.values if k not in keys]
    lines = [",".join(["scope"] + keys)]
    for rep in reports:
        lines.append(",".join([rep.scope] + [repr(rep.values[k]) if k in rep.values else "" for k in keys]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_reports(path: str | Path) -> dict[str, dict[str, float]]:
    rows = Path(path).read_text().splitlines()
    keys = rows[0].split(",")[1:]
    out: dict[str, dict[str, float]] = {}
    for line in rows[1:]:
        scope, *vals = line.split(",")
        out[scope] = {k: float(v) for k, v in zip(keys, vals) if v != ""}
    return out


def ranks(scores: np.ndarray, target: np.ndarray) -> np.ndarray:
    """1-based rank of each row's target item; ties are resolved toward lower item index."""
    scores = np.asarray(scores, dtype=np.float64)
    target = np.asarray(target, dtype=np.int64)
    own = scores[np.arange(len(target)), target][:, None]
    idx = np.arange(scores.shape[1])[None, :]
    ahead = (scores > own) | ((scores == own) & (idx < target[:, None]))
    return 1 + ahead.sum(axis=1)


def hit_rate(rank: np.ndarray, k: int) -> float:
    return float(np.mean(np.asarray(rank) <= k))


def ndcg(rank: np.ndarray, k: int) -> float:
    rank = np.asarray(rank, dtype=np.float64)
    return float(np.mean(np.where(rank <= k, 1.0 / np.log2(rank + 1.0), 0.0)))


def f1_per_class(pred: np.ndarray, truth: np.ndarray, classes: np.ndarray) -> np.ndarray:
    out = []
    for c in classes:
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        out.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return np.array(out)


def classification_metrics(pred, truth, minority: int | None = None) -> dict[str, float]:
    """Macro-F1 over classes present in either vector, F1 of the minority class, accuracy.

    The minority class defaults to the least frequent true label (smallest id on ties).
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    classes = np.union1d(np.unique(truth), np.unique(pred))
    if minority is None:
        vals, counts = np.unique(truth, return_counts=True)
        minority = int(vals[np.argmin(counts)])
    per = f1_per_class(pred, truth, classes)
    return {
        "Macro-F1": float(per.mean()),
        "Micro-F1": float(f1_per_class(pred, truth, np.array([minority]))[0]),
        "Accuracy": float(np.mean(pred == truth)),
    }


def regression_metrics(pred, truth) -> dict[str, float]:
    """MAE, RMSE and MAPE; MAPE skips entries whose truth is zero."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    err = pred - truth
    nz = truth != 0
    mape = float(np.mean(np.abs(err[nz] / truth[nz]))) if nz.any() else 0.0
    return {"MAE": float(np.mean(np.abs(err))), "RMSE": float(np.sqrt(np.mean(err**2))), "MAPE": mape}


def evaluate(kind: str, predictions, truth, ks=(10,), scope: str = "test", minority: int | None = None) -> MetricReport:
    """``link``: predictions are (n, items) scores and truth the held-out item index.
    ``node``: predicted and true class ids. ``traffic``: readings of any matching shape."""
    truth = np.asarray(truth)
    if truth.size == 0:
        raise ValueError("cannot evaluate an empty test set")
    if kind == "link":
        r = ranks(predictions, truth)
        vals = {}
        for k in ks:
            vals[f"HR@{k}"] = hit_rate(r, k)
            vals[f"NDCG@{k}"] = ndcg(r, k)
        return MetricReport(vals, scope)
    if kind == "node":
        return MetricReport(classification_metrics(predictions, truth, minority), scope)
    if kind == "traffic":
        return MetricReport(regression_metrics(predictions, truth), scope)
    raise ValueError(f"unknown task kind {kind!r}")
