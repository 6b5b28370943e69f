from __future__ import annotations

import numpy as np
import pytest

from nicdiag.errors import TrainingError
from nicdiag.features.levels import LevelSymbol, level_symbols
from nicdiag.features.patterns import (
    PatternClass,
    classify_pattern,
    load_pattern_model,
    normalize_slice,
    save_pattern_model,
    train_pattern_model,
)
from nicdiag.features.shapes import generate_shape, generate_shape_corpus


def test_constant_slice_normalizes_to_zeros():
    out = normalize_slice([5] * 59)
    assert out.shape == (64,)
    assert not out.any()


@pytest.mark.parametrize("n", [0, 1, 7, 59, 240])
def test_normalized_length_is_fixed(n):
    assert normalize_slice(np.arange(n, dtype=float)).shape == (64,)


def test_ramp_normalizes_to_increasing_unit_scale():
    out = normalize_slice(np.arange(60, dtype=float))
    assert np.all(np.diff(out) > 0)
    assert abs(out.mean()) < 1e-6
    assert abs(out.std() - 1.0) < 1e-6


def test_single_class_training_is_rejected():
    rng = np.random.default_rng(0)
    corpus = [(generate_shape(PatternClass.STEADY_RISE, rng), PatternClass.STEADY_RISE) for _ in range(20)]
    with pytest.raises(TrainingError):
        train_pattern_model(corpus, seed=0, epochs=1)


def test_sparse_class_training_is_rejected():
    rng = np.random.default_rng(0)
    corpus = [(generate_shape(PatternClass.FLAT, rng), PatternClass.FLAT) for _ in range(20)]
    corpus += [(generate_shape(PatternClass.MULTI_PEAK, rng), PatternClass.MULTI_PEAK) for _ in range(3)]
    with pytest.raises(TrainingError):
        train_pattern_model(corpus, seed=0, epochs=1)


def test_constant_slice_is_flat(pattern_model):
    assert classify_pattern(pattern_model, [42] * 59) is PatternClass.FLAT
    assert classify_pattern(pattern_model, []) is PatternClass.FLAT


def test_scores_are_distributions(pattern_model):
    rng = np.random.default_rng(1)
    slices = [generate_shape(cls, rng) for cls in PatternClass]
    scores = pattern_model.scores(slices)
    assert scores.shape == (8, 8)
    assert np.allclose(scores.sum(axis=1), 1.0)


def test_pooling_keeps_one_value_per_window(pattern_model):
    assert pattern_model.pool == 8
    assert pattern_model.dense_weights.shape == (8, pattern_model.kernels * (pattern_model.length // 8))


def test_pattern_model_file_keeps_predictions(tmp_path, pattern_model):
    path = tmp_path / "pattern.txt"
    save_pattern_model(pattern_model, path)
    loaded = load_pattern_model(path)
    rng = np.random.default_rng(2)
    slices = [generate_shape(cls, rng) for cls in PatternClass]
    assert np.allclose(loaded.scores(slices), pattern_model.scores(slices), atol=1e-12)
    assert loaded.training_meta == pattern_model.training_meta
    assert path.read_text().startswith("NICDIAG-PATTERN v1\n")


def test_training_is_seeded():
    corpus = generate_shape_corpus(12, seed=4)
    a = train_pattern_model(corpus, seed=9, epochs=3)
    b = train_pattern_model(corpus, seed=9, epochs=3)
    assert np.array_equal(a.conv_kernels, b.conv_kernels)
    assert np.array_equal(a.dense_weights, b.dense_weights)


@pytest.mark.slow
def test_full_shape_corpus_reaches_holdout_target():
    model = train_pattern_model(generate_shape_corpus(200, seed=7), seed=7)
    assert model.holdout_accuracy >= 0.90
    t = np.linspace(0.0, 1.0, 60)
    assert classify_pattern(model, 100 + 400 * t) is PatternClass.STEADY_RISE
    assert classify_pattern(model, 100 + 400 * np.exp(-0.5 * ((t - 0.5) / 0.04) ** 2)) is PatternClass.SINGLE_SPIKE


def test_levels_middle_device():
    levels = level_symbols("rx_packets_phy", {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0})
    assert levels["c"] is LevelSymbol.M


def test_levels_all_equal_are_medium():
    levels = level_symbols("rx_packets_phy", {i: 7.0 for i in range(6)})
    assert set(levels.values()) == {LevelSymbol.M}


def test_levels_flag_outlier():
    levels = level_symbols("rx_packets_phy", {"a": 1, "b": 2, "c": 3, "d": 4, "e": 100})
    assert levels["e"] is LevelSymbol.VH


def test_levels_need_four_devices():
    levels = level_symbols("rx_packets_phy", {"a": 1.0, "b": 1000.0, "c": 3.0})
    assert set(levels.values()) == {LevelSymbol.M}


def test_classification_ignores_scale_and_shift(pattern_model):
    rng = np.random.default_rng(8)
    slices = [rng.normal(0.0, 1.0, size=59).cumsum() for _ in range(1000)]
    scales = rng.uniform(0.5, 1000.0, size=1000)
    shifts = rng.uniform(-1e4, 1e4, size=1000)
    moved = [a * s + b for s, a, b in zip(slices, scales, shifts)]
    for s, m in zip(slices[:50], moved[:50]):
        assert np.allclose(normalize_slice(s), normalize_slice(m), atol=1e-9)
    assert np.array_equal(pattern_model.scores(slices).argmax(axis=1), pattern_model.scores(moved).argmax(axis=1))


def test_levels_never_decrease_with_the_mean():
    rng = np.random.default_rng(14)
    for _ in range(300):
        n = int(rng.integers(4, 40))
        means = dict(enumerate(rng.lognormal(3.0, 1.5, size=n)))
        levels = level_symbols("rx_packets_phy", means)
        ordered = [levels[d] for d in sorted(means, key=means.get)]
        assert ordered == sorted(ordered)
