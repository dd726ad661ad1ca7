"""Binary classifier contract and the linear reference implementation.

The contract any classifier must honor: a deterministic sigmoid score in
[0, 1] per image, trainable from scratch or fine-tunable from existing
parameters. The reference model is logistic regression on raw pixels
trained by mini-batch gradient descent on binary cross-entropy with an L2
penalty, with accuracy-plateau early stopping on a stop split carved from
the training data (the bias-measurement validation set is never used for
stopping).

External classifiers plug in over a subprocess protocol: the child is
invoked with a manifest path and prints one JSON object per line,
{"id": ..., "score": ...}; see SubprocessClassifier.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, save_dataset
from .errors import DataError
from .seeding import make_rng


@dataclass(frozen=True)
class TrainHyper:
    """Optimization settings for train/fine_tune.

    val_fraction is carved out of the *training* data as the early-stop
    signal. full_batch replaces mini-batches with one full gradient step
    per epoch (no shuffling), which makes per-epoch loss non-increasing at
    small enough learning rates.
    """

    learning_rate: float = 0.05
    max_epochs: int = 200
    batch_size: int = 32
    l2: float = 1e-4
    early_stop_patience: int = 25
    early_stop_min_delta: float = 0.0
    seed: int = 0
    val_fraction: float = 0.1
    full_batch: bool = False

    def validate(self) -> None:
        if self.learning_rate < 0.0:
            raise DataError("learning_rate must be >= 0")
        if self.max_epochs < 0:
            raise DataError("max_epochs must be >= 0")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.l2 < 0.0:
            raise DataError("l2 must be >= 0")
        if self.early_stop_patience < 1:
            raise DataError("early_stop_patience must be >= 1")
        if self.early_stop_min_delta < 0.0:
            raise DataError("early_stop_min_delta must be >= 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise DataError("val_fraction must be strictly inside (0, 1)")


@dataclass
class RefModel:
    """Logistic regression on flattened pixels: score = sigmoid(w . x + b)."""

    weights: np.ndarray  # (P,)
    bias: float
    trained_epochs: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)  # (train_loss, stop_acc)


def sigmoid(z):
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict(model: RefModel, image) -> float:
    """Sigmoid score for one image (any array with the model's pixel count)."""
    x = np.asarray(image, dtype=np.float64).ravel()
    if x.shape[0] != model.weights.shape[0]:
        raise DataError(
            f"dimension mismatch: image has {x.shape[0]} pixels, model expects {model.weights.shape[0]}"
        )
    return float(sigmoid(x @ model.weights + model.bias))


def predict_matrix(model: RefModel, mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[1] != model.weights.shape[0]:
        raise DataError(
            f"dimension mismatch: data has {mat.shape[1]} pixels, model expects {model.weights.shape[0]}"
        )
    return sigmoid(mat @ model.weights + model.bias)


def predict_dataset(model: RefModel, dataset: Dataset) -> np.ndarray:
    """Scores aligned with dataset record order."""
    return predict_matrix(model, dataset.matrix())


def loss_value(weights: np.ndarray, bias: float, mat: np.ndarray, labels: np.ndarray, l2: float) -> float:
    """Mean binary cross-entropy plus l2 * ||w||^2 / 2 (bias unpenalized)."""
    z = mat @ weights + bias
    # log(1 + e^z) - y*z, computed without overflow
    bce = np.mean(np.logaddexp(0.0, z) - labels * z)
    return float(bce + 0.5 * l2 * float(weights @ weights))


def loss_gradient(
    weights: np.ndarray, bias: float, mat: np.ndarray, labels: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    """Analytic gradient of loss_value w.r.t. (weights, bias)."""
    resid = sigmoid(mat @ weights + bias) - labels
    grad_w = mat.T @ resid / mat.shape[0] + l2 * weights
    grad_b = float(np.mean(resid))
    return grad_w, grad_b


def accuracy_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of scores on the right side of 0.5 (score >= 0.5 predicts label 1)."""
    return float(np.mean((scores >= 0.5) == (labels == 1)))


def accuracy(model: RefModel, dataset: Dataset) -> float:
    return accuracy_from_scores(predict_dataset(model, dataset), dataset.labels())


def _optimize(w0: np.ndarray, b0: float, dataset: Dataset, hyper: TrainHyper) -> RefModel:
    hyper.validate()
    labels = dataset.labels()
    if len(np.unique(labels)) < 2:
        raise DataError("training data must contain both labels")
    mat = dataset.matrix()
    n = mat.shape[0]

    rng = make_rng(hyper.seed)
    perm = rng.permutation(n)
    n_stop = min(n - 1, max(1, int(round(hyper.val_fraction * n))))
    stop_idx, fit_idx = perm[:n_stop], perm[n_stop:]
    stop_x, stop_y = mat[stop_idx], labels[stop_idx]
    fit_x, fit_y = mat[fit_idx], labels[fit_idx]
    n_fit = fit_x.shape[0]

    w = w0.astype(np.float64).copy()
    b = float(b0)
    best_acc = accuracy_from_scores(predict_matrix_raw(w, b, stop_x), stop_y)
    best_w, best_b = w.copy(), b
    history: list[tuple[float, float]] = []
    bad_epochs = 0

    for _ in range(hyper.max_epochs):
        if hyper.full_batch:
            batches = [np.arange(n_fit)]
        else:
            order = rng.permutation(n_fit)
            batches = [order[i : i + hyper.batch_size] for i in range(0, n_fit, hyper.batch_size)]
        for batch in batches:
            grad_w, grad_b = loss_gradient(w, b, fit_x[batch], fit_y[batch], hyper.l2)
            w -= hyper.learning_rate * grad_w
            b -= hyper.learning_rate * grad_b
        train_loss = loss_value(w, b, fit_x, fit_y, hyper.l2)
        stop_acc = accuracy_from_scores(predict_matrix_raw(w, b, stop_x), stop_y)
        history.append((train_loss, stop_acc))
        if stop_acc > best_acc + hyper.early_stop_min_delta:
            best_acc = stop_acc
            best_w, best_b = w.copy(), b
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= hyper.early_stop_patience:
                break
    return RefModel(weights=best_w, bias=best_b, trained_epochs=len(history), history=history)


def predict_matrix_raw(weights: np.ndarray, bias: float, mat: np.ndarray) -> np.ndarray:
    return sigmoid(mat @ weights + bias)


def train(dataset: Dataset, hyper: TrainHyper) -> RefModel:
    """Train from scratch: zero bias, seeded uniform +-1e-3 weights.

    Stops when stop-split accuracy has not improved by more than
    early_stop_min_delta for early_stop_patience consecutive epochs, or at
    max_epochs; returns the parameters from the best stop-split epoch seen
    (the initial parameters count as a candidate).
    """
    p = dataset.height * dataset.width
    init_rng = make_rng(hyper.seed)
    w0 = init_rng.uniform(-1e-3, 1e-3, size=p)
    return _optimize(w0, 0.0, dataset, hyper)


def fine_tune(model: RefModel, dataset: Dataset, hyper: TrainHyper) -> RefModel:
    """Continue training from the given model's parameters."""
    p = dataset.height * dataset.width
    if model.weights.shape[0] != p:
        raise DataError(
            f"dimension mismatch: model expects {model.weights.shape[0]} pixels, data has {p}"
        )
    return _optimize(model.weights, model.bias, dataset, hyper)


def save_model(model: RefModel, path) -> None:
    obj = {
        "format": "ref-model",
        "version": 1,
        "dim": int(model.weights.shape[0]),
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "trained_epochs": model.trained_epochs,
        "history": [[loss, acc] for loss, acc in model.history],
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_model(path) -> RefModel:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid model file: {exc.msg}") from exc
    if obj.get("format") != "ref-model" or obj.get("version") != 1:
        raise DataError(f"{path}: not a version-1 ref-model file")
    weights = np.asarray(obj["weights"], dtype=np.float64)
    if weights.shape[0] != obj["dim"]:
        raise DataError(f"{path}: weight count does not match declared dim")
    return RefModel(
        weights=weights,
        bias=float(obj["bias"]),
        trained_epochs=int(obj["trained_epochs"]),
        history=[(float(l), float(a)) for l, a in obj["history"]],
    )


class SubprocessClassifier:
    """Score datasets with an external classifier over a manifest protocol.

    The child process is run as `argv... <manifest_path>` and must write one
    JSON object per line to stdout: {"id": "<record id>", "score": <float>}.
    Every id in the manifest must be covered and every score must be a
    finite value in [0, 1]. This lets a real CNN replace the reference
    model without linking against this package.
    """

    def __init__(self, argv: Sequence[str], timeout: float = 300.0):
        if not argv:
            raise DataError("subprocess classifier needs a non-empty argv")
        self.argv = [str(a) for a in argv]
        self.timeout = timeout

    def score_manifest(self, manifest_path) -> dict[str, float]:
        proc = subprocess.run(
            self.argv + [str(manifest_path)],
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
            raise DataError(f"classifier subprocess failed (exit {proc.returncode}): {tail}")
        scores: dict[str, float] = {}
        for lineno, line in enumerate(proc.stdout.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"classifier output line {lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "score" not in obj:
                raise DataError(f"classifier output line {lineno}: expected {{id, score}}")
            score = float(obj["score"])
            if not np.isfinite(score) or not 0.0 <= score <= 1.0:
                raise DataError(f"classifier output line {lineno}: score {score} outside [0, 1]")
            scores[str(obj["id"])] = score
        return scores

    def score_dataset(self, dataset: Dataset) -> np.ndarray:
        """Materialize the dataset to a temp manifest, score it, align results."""
        with tempfile.TemporaryDirectory(prefix="biasgrid-scores-") as tmp:
            manifest = Path(tmp) / "score-request.jsonl"
            save_dataset(dataset, manifest)
            scores = self.score_manifest(manifest)
        missing = [rec_id for rec_id in dataset.ids() if rec_id not in scores]
        if missing:
            raise DataError(f"classifier output missing {len(missing)} ids (first: '{missing[0]}')")
        return np.array([scores[rec_id] for rec_id in dataset.ids()], dtype=np.float64)


def hyper_with(hyper: TrainHyper, **changes) -> TrainHyper:
    """Copy of a TrainHyper with some fields replaced."""
    return replace(hyper, **changes)
