"""Per-image failure scores and the tinted similarity-grid rendering.

The failure score of an image is the absolute gap between the classifier's
sigmoid output and the binary label, C = |y_pred - y_true|, so 0 means a
confident correct answer and 1 a confident wrong one. The renderer paints
each grid cell with its image, alpha-blended with a color encoding
correctness 1 - C: purple where the model fails, through teal-green, to
yellow where it is right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import RefModel, predict_dataset
from .dataset import Dataset
from .errors import DataError
from .grid import GridLayout
from .netpbm import write_ppm

# Anchor colors for the correctness ramp: failing, middling, correct.
ANCHORS = (
    (0.0, (68.0, 1.0, 84.0)),
    (0.5, (33.0, 145.0, 140.0)),
    (1.0, (253.0, 231.0, 37.0)),
)
EMPTY_CELL_RGB = (128, 128, 128)
DEFAULT_ALPHA = 0.4
DEFAULT_CELL_PX = 32


@dataclass
class FailureScores:
    """Aligned id -> score maps; scores[i] = |predictions[i] - label_i|."""

    scores: dict[str, float]
    predictions: dict[str, float]

    def ordered(self) -> tuple[list[str], np.ndarray]:
        ids = list(self.scores)
        return ids, np.array([self.scores[i] for i in ids], dtype=np.float64)


@dataclass
class SaliencyImage:
    pixels: np.ndarray  # (rows*cell_px, cols*cell_px, 3) uint8
    legend: dict = field(default_factory=dict)


def compute_failures(model: RefModel, dataset: Dataset) -> FailureScores:
    """Score every record: C = |sigmoid score - label|, in dataset order."""
    preds = predict_dataset(model, dataset)
    labels = dataset.labels()
    ids = dataset.ids()
    scores = np.abs(preds - labels)
    return FailureScores(
        scores={i: float(c) for i, c in zip(ids, scores)},
        predictions={i: float(p) for i, p in zip(ids, preds)},
    )


def failures_from_scores(ids: Sequence[str], predictions, labels) -> FailureScores:
    """Build FailureScores from externally computed sigmoid scores."""
    preds = np.asarray(predictions, dtype=np.float64)
    labs = np.asarray(labels, dtype=np.float64)
    if not (len(ids) == preds.shape[0] == labs.shape[0]):
        raise DataError("ids, predictions and labels must have equal length")
    if not np.all(np.isfinite(preds)) or preds.min() < 0.0 or preds.max() > 1.0:
        raise DataError("predictions must be finite and within [0, 1]")
    scores = np.abs(preds - labs)
    return FailureScores(
        scores={i: float(c) for i, c in zip(ids, scores)},
        predictions={i: float(p) for i, p in zip(ids, preds)},
    )


def colormap(correctness) -> np.ndarray:
    """Map correctness in [0, 1] to RGB uint8 via the 3-anchor ramp.

    Channels interpolate linearly between the bracketing anchors and round
    to the nearest integer (ties to even, numpy's rint).
    """
    c = np.asarray(correctness, dtype=np.float64)
    if not np.all(np.isfinite(c)) or np.any(c < 0.0) or np.any(c > 1.0):
        raise DataError("correctness values must lie in [0, 1]")
    lo = np.array(ANCHORS[0][1])
    mid = np.array(ANCHORS[1][1])
    hi = np.array(ANCHORS[2][1])
    t = c[..., None]
    low_seg = lo + (mid - lo) * (t / 0.5)
    high_seg = mid + (hi - mid) * ((t - 0.5) / 0.5)
    rgb = np.where(t <= 0.5, low_seg, high_seg)
    return np.rint(rgb).astype(np.uint8)


def _resize_nearest(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape
    rr = (np.arange(size) * h) // size
    cc = (np.arange(size) * w) // size
    return img[np.ix_(rr, cc)]


def render(
    grid: GridLayout,
    dataset: Dataset,
    failures: FailureScores,
    cell_px: int = DEFAULT_CELL_PX,
    alpha: float = DEFAULT_ALPHA,
) -> SaliencyImage:
    """Paint the grid: per cell, nearest-neighbor resized image blended with
    the correctness tint; empty cells are flat mid-gray."""
    if cell_px < 8:
        raise DataError("cell_px must be at least 8")
    if not 0.0 <= alpha <= 1.0:
        raise DataError("alpha must lie in [0, 1]")
    canvas = np.empty((grid.rows * cell_px, grid.cols * cell_px, 3), dtype=np.uint8)
    for r in range(grid.rows):
        for c in range(grid.cols):
            rec_id = grid.cells[r][c]
            ys, xs = r * cell_px, c * cell_px
            if rec_id is None:
                canvas[ys : ys + cell_px, xs : xs + cell_px] = EMPTY_CELL_RGB
                continue
            if rec_id not in failures.scores:
                raise DataError(f"no failure score for grid cell image '{rec_id}'")
            rec = dataset.record_by_id(rec_id)
            gray = np.rint(_resize_nearest(rec.pixels, cell_px) * 255.0)
            tint = colormap(1.0 - failures.scores[rec_id]).astype(np.float64)
            blended = (1.0 - alpha) * gray[:, :, None] + alpha * tint
            cell = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
            canvas[ys : ys + cell_px, xs : xs + cell_px] = cell
    legend = {
        "anchors": {f"{pos}": [int(v) for v in rgb] for pos, rgb in ANCHORS},
        "encodes": "correctness (1 - failure score)",
        "alpha": alpha,
        "cell_px": cell_px,
        "empty_cell_rgb": list(EMPTY_CELL_RGB),
    }
    return SaliencyImage(pixels=canvas, legend=legend)


def save_saliency(image: SaliencyImage, path) -> None:
    write_ppm(path, image.pixels)


def grid_sidecar(grid: GridLayout, failures: FailureScores) -> dict:
    """JSON-ready map of cell position -> {id, failure, prediction}."""
    cells: dict[str, dict] = {}
    for r in range(grid.rows):
        for c in range(grid.cols):
            rec_id = grid.cells[r][c]
            if rec_id is None:
                continue
            if rec_id not in failures.scores:
                raise DataError(f"no failure score for grid cell image '{rec_id}'")
            cells[f"{r},{c}"] = {
                "id": rec_id,
                "failure": failures.scores[rec_id],
                "prediction": failures.predictions[rec_id],
            }
    return {"rows": grid.rows, "cols": grid.cols, "cells": cells}


def save_sidecar(grid: GridLayout, failures: FailureScores, path) -> None:
    Path(path).write_text(json.dumps(grid_sidecar(grid, failures)), encoding="utf-8")


def scores_in_order(failures: FailureScores, ids: Sequence[str] | None = None) -> np.ndarray:
    """Failure scores as an array, in the given id order (or insertion order)."""
    if ids is None:
        ids = list(failures.scores)
    missing = [i for i in ids if i not in failures.scores]
    if missing:
        raise DataError(f"missing failure scores for {len(missing)} ids (first: '{missing[0]}')")
    return np.array([failures.scores[i] for i in ids], dtype=np.float64)
