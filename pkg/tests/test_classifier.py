"""Reference classifier: gradients, early stopping, fine-tuning, subprocess protocol."""

import sys

import numpy as np
import pytest

from biasgrid.classifier import (
    RefModel,
    SubprocessClassifier,
    TrainHyper,
    accuracy,
    accuracy_from_scores,
    fine_tune,
    hyper_with,
    load_model,
    loss_gradient,
    loss_value,
    predict,
    predict_matrix,
    save_model,
    sigmoid,
    train,
)
from biasgrid.dataset import Dataset, ImageRecord
from biasgrid.errors import DataError
from biasgrid.seeding import make_rng
from oracles import central_diff_grad


def toy_dataset(n=24, side=8, gap=0.5, sigma=0.02, seed=0):
    """Linearly separable brightness task: label 1 images are much darker."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        label = i % 2
        level = 0.75 - gap * label
        px = np.clip(level + rng.normal(0.0, sigma, size=(side, side)), 0.0, 1.0)
        records.append(ImageRecord(f"t{i}", px, label))
    return Dataset.from_records(records)


def test_sigmoid_is_stable_and_correct():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1000.0) == 1.0
    assert sigmoid(-1000.0) == pytest.approx(0.0, abs=1e-300)
    z = np.array([-3.0, 0.2, 5.0])
    assert np.allclose(sigmoid(z), 1.0 / (1.0 + np.exp(-z)))


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    mat = rng.normal(size=(9, 6))
    labels = (rng.random(9) > 0.5).astype(np.float64)
    w = rng.normal(size=6)
    b = 0.3
    ga_w, ga_b = loss_gradient(w, b, mat, labels, l2=0.01)
    fd_w, fd_b = central_diff_grad(lambda wv, bv: loss_value(wv, bv, mat, labels, 0.01), w, b)
    assert np.allclose(ga_w, fd_w, rtol=0, atol=1e-8)
    assert ga_b == pytest.approx(fd_b, abs=1e-8)


def test_l2_penalizes_weights_not_bias():
    w = np.array([2.0, -1.0])
    mat = np.zeros((4, 2))
    labels = np.zeros(4)
    base_w, base_b = loss_gradient(w, 0.0, mat, labels, l2=0.0)
    reg_w, reg_b = loss_gradient(w, 0.0, mat, labels, l2=0.5)
    assert np.allclose(reg_w - base_w, 0.5 * w)
    assert reg_b == base_b


def test_separable_toy_reaches_full_training_accuracy():
    # val_fraction widens the stop split: on a tiny one the random init can
    # score perfectly and the best-snapshot rule would then keep it.
    ds = toy_dataset()
    hyper = TrainHyper(learning_rate=0.5, max_epochs=120, batch_size=8, l2=0.0, seed=2, val_fraction=0.25)
    model = train(ds, hyper)
    assert accuracy(model, ds) == 1.0


def test_training_is_deterministic():
    ds = toy_dataset()
    hyper = TrainHyper(learning_rate=0.2, max_epochs=10, seed=5)
    a = train(ds, hyper)
    b = train(ds, hyper)
    assert np.array_equal(a.weights, b.weights)
    assert a.bias == b.bias
    assert a.history == b.history


def test_zero_learning_rate_fine_tune_is_identity():
    ds = toy_dataset()
    model = train(ds, TrainHyper(max_epochs=5, seed=1))
    frozen = fine_tune(model, ds, TrainHyper(learning_rate=0.0, max_epochs=50, early_stop_patience=4, seed=9))
    assert np.array_equal(frozen.weights, model.weights)
    assert frozen.bias == model.bias
    # no epoch can improve the stop metric, so patience bounds the epoch count
    assert frozen.trained_epochs == 4


def test_best_snapshot_includes_initial_parameters():
    ds = toy_dataset()
    model = train(ds, TrainHyper(max_epochs=0, seed=3))
    assert model.trained_epochs == 0
    assert model.history == []
    assert np.all(np.abs(model.weights) <= 1e-3)  # untouched init draw
    assert model.bias == 0.0


def test_full_batch_loss_descends_at_small_rate():
    ds = toy_dataset()
    model = train(
        ds,
        TrainHyper(learning_rate=1e-3, max_epochs=30, l2=0.0, full_batch=True, seed=4),
    )
    losses = [loss for loss, _ in model.history]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_early_stopping_cannot_exceed_max_epochs():
    ds = toy_dataset()
    model = train(ds, TrainHyper(learning_rate=0.3, max_epochs=40, early_stop_patience=3, seed=6))
    assert model.trained_epochs <= 40
    assert len(model.history) == model.trained_epochs


def test_train_rejects_single_label_data():
    recs = [ImageRecord(f"s{i}", np.full((4, 4), 0.5), 1) for i in range(6)]
    with pytest.raises(DataError, match="both labels"):
        train(Dataset.from_records(recs), TrainHyper())


def test_predict_dimension_mismatch():
    model = RefModel(weights=np.zeros(4), bias=0.0)
    with pytest.raises(DataError, match="9 pixels.*expects 4"):
        predict(model, np.zeros((3, 3)))
    with pytest.raises(DataError, match="expects 4"):
        predict_matrix(model, np.zeros((2, 5)))


def test_fine_tune_dimension_mismatch():
    model = RefModel(weights=np.zeros(4), bias=0.0)
    with pytest.raises(DataError, match="dimension mismatch"):
        fine_tune(model, toy_dataset(side=8), TrainHyper())


def test_accuracy_threshold_maps_half_to_label_one():
    scores = np.array([0.5, 0.49999, 0.5])
    labels = np.array([1.0, 0.0, 0.0])
    assert accuracy_from_scores(scores, labels) == pytest.approx(2.0 / 3.0)


def test_hyper_validation_errors():
    cases = [
        {"learning_rate": -0.1},
        {"max_epochs": -1},
        {"batch_size": 0},
        {"l2": -1e-9},
        {"early_stop_patience": 0},
        {"early_stop_min_delta": -0.1},
        {"val_fraction": 0.0},
        {"val_fraction": 1.0},
    ]
    for bad in cases:
        with pytest.raises(DataError):
            hyper_with(TrainHyper(), **bad).validate()


def test_hyper_with_copies():
    base = TrainHyper()
    changed = hyper_with(base, learning_rate=9.0, seed=77)
    assert changed.learning_rate == 9.0 and changed.seed == 77
    assert base.learning_rate == 0.05 and base.seed == 0


def test_model_round_trip_is_exact(tmp_path):
    model = RefModel(
        weights=make_rng(0).normal(size=5),
        bias=-0.123456789,
        trained_epochs=7,
        history=[(0.5, 0.75), (0.4, 0.875)],
    )
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.weights, model.weights)
    assert back.bias == model.bias
    assert back.trained_epochs == 7
    assert back.history == model.history


def test_load_model_rejects_bad_files(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"format": "ref-model", "version": 1, "dim": 3, "weights": [1.0], "bias": 0, "trained_epochs": 0, "history": []}')
    with pytest.raises(DataError, match="does not match declared dim"):
        load_model(path)
    path.write_text('{"format": "other", "version": 1}')
    with pytest.raises(DataError, match="ref-model"):
        load_model(path)


def write_stub(tmp_path, body):
    script = tmp_path / "scorer.py"
    script.write_text("import json, sys\nfrom biasgrid.dataset import load_manifest\n" + body)
    return [sys.executable, str(script)]


def test_subprocess_classifier_scores_align(tmp_path):
    ds = toy_dataset(n=8)
    argv = write_stub(
        tmp_path,
        "ds = load_manifest(sys.argv[1])\n"
        "for rec in ds.records:\n"
        "    print(json.dumps({'id': rec.id, 'score': float(rec.pixels.mean())}))\n",
    )
    scores = SubprocessClassifier(argv).score_dataset(ds)
    # save/load quantizes pixels to 8 bits, so means match only approximately
    assert np.allclose(scores, ds.matrix().mean(axis=1), atol=1e-2)


def test_subprocess_classifier_missing_id(tmp_path):
    ds = toy_dataset(n=4)
    argv = write_stub(
        tmp_path,
        "ds = load_manifest(sys.argv[1])\n"
        "for rec in ds.records[1:]:\n"
        "    print(json.dumps({'id': rec.id, 'score': 0.5}))\n",
    )
    with pytest.raises(DataError, match="missing 1 ids"):
        SubprocessClassifier(argv).score_dataset(ds)


def test_subprocess_classifier_rejects_out_of_range_score(tmp_path):
    ds = toy_dataset(n=4)
    argv = write_stub(
        tmp_path,
        "ds = load_manifest(sys.argv[1])\n"
        "for rec in ds.records:\n"
        "    print(json.dumps({'id': rec.id, 'score': 1.5}))\n",
    )
    with pytest.raises(DataError, match="outside"):
        SubprocessClassifier(argv).score_dataset(ds)


def test_subprocess_classifier_reports_child_failure(tmp_path):
    ds = toy_dataset(n=4)
    argv = write_stub(tmp_path, "sys.exit('scorer exploded')\n")
    with pytest.raises(DataError, match=r"exit 1.*scorer exploded"):
        SubprocessClassifier(argv).score_dataset(ds)


def test_subprocess_classifier_rejects_malformed_output(tmp_path):
    ds = toy_dataset(n=4)
    argv = write_stub(tmp_path, "print('not json at all')\n")
    with pytest.raises(DataError, match="malformed JSON"):
        SubprocessClassifier(argv).score_dataset(ds)


def test_subprocess_classifier_needs_argv():
    with pytest.raises(DataError, match="non-empty argv"):
        SubprocessClassifier([])
