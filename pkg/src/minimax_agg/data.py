"""File ingestion and persistence: prediction CSVs, constraint estimation
from labeled holdouts, and versioned model save/load.

Prediction files are UTF-8 CSVs with a mandatory header naming the p
classifiers, one data row per example (the matrix is transposed to
classifier-major on load). Holdout files are the same with a final
``label`` column in {-1, +1}. Models are JSON documents with an explicit
format version; floats round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import losses
from .losses import LossSpec

__all__ = [
    "ModelFile", "MODEL_FORMAT_VERSION",
    "load_predictions", "save_predictions", "load_holdout",
    "estimate_b", "estimate_general_loss_bounds",
    "save_model", "load_model", "loss_config_from_file",
]

MODEL_FORMAT_VERSION = 1


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows


def _parse_matrix(path, rows, width=None):
    header = rows[0]
    if width is None:
        width = len(header)
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    data = np.empty((len(rows) - 1, width))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r} has {len(row)} fields, "
                             f"expected {len(header)}")
        for c in range(width):
            try:
                data[r - 2, c] = float(row[c])
            except ValueError:
                raise ValueError(
                    f"{path}: row {r}, column {c + 1} ({header[c]!r}): "
                    f"cannot parse {row[c]!r}") from None
    return header[:width], data


def load_predictions(path, kind: str = "raw") -> np.ndarray:
    """Load an example-major prediction CSV into a p x n matrix.

    ``kind="raw"`` range-checks entries to [-1, 1]; ``kind="transformed"``
    (score-mapped matrices) only requires finite values.
    """
    if kind not in ("raw", "transformed"):
        raise ValueError("kind must be 'raw' or 'transformed'")
    rows = _read_rows(path)
    header, data = _parse_matrix(path, rows)
    if not np.all(np.isfinite(data)):
        r, c = np.argwhere(~np.isfinite(data))[0]
        raise ValueError(f"{path}: non-finite value at row {r + 2}, "
                         f"column {c + 1} ({header[c]!r})")
    if kind == "raw" and np.any(np.abs(data) > 1.0):
        r, c = np.argwhere(np.abs(data) > 1.0)[0]
        raise ValueError(
            f"{path}: value {data[r, c]!r} outside [-1, 1] at row {r + 2}, "
            f"column {c + 1} ({header[c]!r})")
    return data.T.copy()


def save_predictions(path, matrix, names=None):
    """Write a p x n matrix as an example-major prediction CSV."""
    matrix = np.asarray(matrix, dtype=float)
    p = matrix.shape[0]
    if names is None:
        names = [f"h{i + 1}" for i in range(p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for col in matrix.T:
            writer.writerow([repr(float(v)) for v in col])


def load_holdout(path):
    """Load a labeled holdout CSV (last column ``label``) as
    ``(matrix p x m, labels m)``."""
    rows = _read_rows(path)
    header = rows[0]
    if not header or header[-1].strip().lower() != "label":
        raise ValueError(f"{path}: holdout files need a final 'label' column")
    names, data = _parse_matrix(path, rows, width=len(header) - 1)
    labels = np.empty(len(rows) - 1)
    for r, row in enumerate(rows[1:], start=2):
        try:
            labels[r - 2] = float(row[-1])
        except ValueError:
            raise ValueError(f"{path}: row {r}: bad label {row[-1]!r}") from None
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        bad = int(np.argwhere(~np.isin(labels, (-1.0, 1.0)))[0, 0])
        raise ValueError(f"{path}: row {bad + 2}: labels must be -1 or +1")
    if np.any(np.abs(data) > 1.0):
        raise ValueError(f"{path}: holdout predictions outside [-1, 1]")
    return data.T.copy(), labels


def estimate_b(holdout_predictions, holdout_labels, stat_slack=0.0) -> np.ndarray:
    """Empirical correlation of each classifier with the holdout labels,
    shrunk by the caller-supplied statistical slack and clamped at -1."""
    H = np.asarray(holdout_predictions, dtype=float)
    y = np.asarray(holdout_labels, dtype=float)
    if H.ndim != 2 or y.shape != (H.shape[1],):
        raise ValueError("labels must match the holdout example count")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("holdout labels must be -1 or +1")
    slack = np.broadcast_to(np.asarray(stat_slack, dtype=float), (H.shape[0],))
    if np.any(slack < 0):
        raise ValueError("stat_slack must be nonnegative")
    b = H @ y / H.shape[1] - slack
    return np.maximum(b, -1.0)


def estimate_general_loss_bounds(holdout_predictions, holdout_labels,
                                 loss: LossSpec, stat_slack=0.0) -> np.ndarray:
    """Empirical loss of each classifier on the holdout, padded by the
    statistical slack; errors out on infinite per-cell losses."""
    H = np.asarray(holdout_predictions, dtype=float)
    y = np.asarray(holdout_labels, dtype=float)
    if H.ndim != 2 or y.shape != (H.shape[1],):
        raise ValueError("labels must match the holdout example count")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("holdout labels must be -1 or +1")
    slack = np.broadcast_to(np.asarray(stat_slack, dtype=float), (H.shape[0],))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lp = np.asarray(loss.partial_plus(H), dtype=float)
        lm = np.asarray(loss.partial_minus(H), dtype=float)
    cell = np.where(y > 0, lp, lm)
    if not np.all(np.isfinite(cell)):
        cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(~np.isfinite(cell)))]
        raise ValueError(
            f"infinite {loss.name} loss at (classifier, example) cells "
            f"{cells[:5]}{' ...' if len(cells) > 5 else ''}")
    return cell.mean(axis=1) + slack


@dataclass(frozen=True)
class ModelFile:
    """Persisted solve result: loss, variant, weights, and diagnostics."""

    loss_name: str
    variant: str
    sigma: np.ndarray
    b: np.ndarray
    epsilon: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    format_version: int = MODEL_FORMAT_VERSION


def save_model(path, model: ModelFile):
    doc = asdict(model)
    doc["sigma"] = [float(v) for v in model.sigma]
    doc["b"] = [float(v) for v in model.b]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a valid model file: {exc}") from None
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(
            f"{path}: model format version {version!r} not supported "
            f"(expected {MODEL_FORMAT_VERSION})")
    losses.get_loss(doc["loss_name"])   # fails with the registry listing
    return ModelFile(
        loss_name=doc["loss_name"],
        variant=doc["variant"],
        sigma=np.asarray(doc["sigma"], dtype=float),
        b=np.asarray(doc["b"], dtype=float),
        epsilon=float(doc.get("epsilon", 0.0)),
        diagnostics=doc.get("diagnostics", {}),
        format_version=version,
    )


def loss_config_from_file(path) -> LossSpec:
    """Build a user-defined loss from a JSON description with tabulated
    partial losses on a grid (monotone interpolation in between)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("name", "grid", "partial_minus", "partial_plus"):
        if key not in doc:
            raise ValueError(f"{path}: loss config missing {key!r}")
    return losses.loss_from_table(doc["name"], doc["grid"],
                                  doc["partial_minus"], doc["partial_plus"])
