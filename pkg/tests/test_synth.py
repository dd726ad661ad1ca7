"""Corpus generator: visibility model, rendering geometry, determinism."""

import numpy as np
import pytest

from biasgrid.errors import DataError
from biasgrid.synth import (
    BASE_OFFSET,
    BASE_SPAN,
    PUPIL_INTENSITY,
    SCLERA_INTENSITY,
    CorpusSpec,
    FaceParams,
    bright_feature_visibility,
    dark_feature_visibility,
    feature_intensities,
    generate_corpus,
    generate_split,
    render_face,
)


def noiseless(complexion, eye_state, size=64):
    return render_face(FaceParams(complexion, eye_state, jitter_seed=0), size, size, 0.0)


def test_visibility_ramps():
    assert dark_feature_visibility(0.0) == 0.0
    assert dark_feature_visibility(0.3) == 0.0
    assert dark_feature_visibility(1.0) == 1.0
    assert bright_feature_visibility(0.0) == 1.0
    assert bright_feature_visibility(0.7) == 0.0
    assert bright_feature_visibility(1.0) == 0.0
    mids = np.linspace(0.3, 1.0, 15)
    assert all(
        dark_feature_visibility(a) <= dark_feature_visibility(b)
        for a, b in zip(mids, mids[1:])
    )


def test_feature_intensities_at_the_extremes():
    sclera0, pupil0 = feature_intensities(0.0)
    assert sclera0 == SCLERA_INTENSITY  # lift is capped
    assert pupil0 == pytest.approx(BASE_OFFSET)  # invisible: equals the skin base
    sclera1, pupil1 = feature_intensities(1.0)
    assert pupil1 == pytest.approx(PUPIL_INTENSITY, abs=1e-12)
    base1 = BASE_OFFSET + BASE_SPAN
    assert sclera1 == pytest.approx(base1 - 0.12)


def test_eye_surround_cue_points_opposite_ways_on_the_two_bands():
    # dark band: open-eye surround brighter than skin; light band: darker
    base_dark = BASE_OFFSET + BASE_SPAN * 0.2
    base_light = BASE_OFFSET + BASE_SPAN * 0.9
    assert feature_intensities(0.2)[0] > base_dark
    assert feature_intensities(0.9)[0] < base_light


def test_darkest_closed_face_is_featureless():
    img = noiseless(0.0, "closed")
    assert np.all(img == img[0, 0])


def test_lightest_closed_face_background_and_bars():
    img = noiseless(1.0, "closed")
    base = BASE_OFFSET + BASE_SPAN * 1.0
    _, pupil = feature_intensities(1.0)
    bar = img != base
    assert np.all(img[bar] == pupil)
    assert int(bar.sum()) == 66  # frozen rasterization at 64x64


def test_mean_intensity_ordering_flips_across_complexion():
    # dark band: the bright sclera makes open faces brighter than closed;
    # light band: sclera fades, iris shading and the pupil flip the sign
    assert noiseless(0.2, "open").mean() > noiseless(0.2, "closed").mean()
    assert noiseless(0.9, "open").mean() < noiseless(0.9, "closed").mean()


def test_render_is_deterministic_given_params():
    p = FaceParams(0.42, "open", jitter_seed=991)
    a = render_face(p, 32, 48, 0.15)
    b = render_face(p, 32, 48, 0.15)
    assert np.array_equal(a, b)


def test_jitter_seed_changes_noise():
    a = render_face(FaceParams(0.42, "open", 1), 32, 32, 0.15)
    b = render_face(FaceParams(0.42, "open", 2), 32, 32, 0.15)
    assert not np.array_equal(a, b)


def test_noise_is_clipped_to_unit_interval():
    img = render_face(FaceParams(0.5, "open", 3), 24, 24, 5.0)
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_render_rejects_bad_inputs():
    with pytest.raises(DataError, match="eye_state"):
        render_face(FaceParams(0.5, "blinking", 0), 32, 32, 0.0)
    with pytest.raises(DataError, match="at least 16x16"):
        render_face(FaceParams(0.5, "open", 0), 8, 32, 0.0)


def test_records_do_not_depend_on_split_size():
    spec = CorpusSpec(master_seed=5)
    small = generate_split(spec, "val", 10)
    large = generate_split(spec, "val", 40)
    assert np.array_equal(small.records[7].pixels, large.records[7].pixels)
    assert small.records[7].group == large.records[7].group


def test_generate_split_is_deterministic():
    spec = CorpusSpec(master_seed=11)
    a = generate_split(spec, "pool", 12)
    b = generate_split(spec, "pool", 12)
    assert np.array_equal(a.matrix(), b.matrix())


def test_labels_alternate():
    ds = generate_split(CorpusSpec(), "train", 9)
    assert [r.label for r in ds.records] == [0, 1, 0, 1, 0, 1, 0, 1, 0]


def test_mix_extremes_pin_train_groups():
    light_only = generate_split(CorpusSpec(train_complexion_mix=1.0), "train", 40)
    dark_only = generate_split(CorpusSpec(train_complexion_mix=0.0), "train", 40)
    assert set(light_only.groups()) == {"light"}
    assert set(dark_only.groups()) == {"dark"}


def test_val_and_pool_cover_both_groups():
    spec = CorpusSpec()
    assert set(generate_split(spec, "val", 60).groups()) == {"dark", "light"}
    assert set(generate_split(spec, "pool", 60).groups()) == {"dark", "light"}


def test_generate_corpus_shapes_and_ids(default_corpus):
    train_ds, val_ds, pool_ds = default_corpus
    spec = CorpusSpec()
    assert (len(train_ds), len(val_ds), len(pool_ds)) == (spec.n_train, spec.n_val, spec.n_pool)
    assert train_ds.records[0].id == "train-00000"
    assert val_ds.records[2].id == "val-00002"
    assert set(train_ds.ids()).isdisjoint(val_ds.ids())
    assert set(train_ds.ids()).isdisjoint(pool_ds.ids())


def test_corpus_spec_validation():
    with pytest.raises(DataError):
        CorpusSpec(n_train=0).validate()
    with pytest.raises(DataError):
        CorpusSpec(train_complexion_mix=1.2).validate()
    with pytest.raises(DataError):
        CorpusSpec(noise_sigma=-0.1).validate()
    with pytest.raises(DataError):
        CorpusSpec(height=8).validate()
