from __future__ import annotations

import numpy as np

from nicdiag.features.patterns import PatternClass

MIN_LENGTH = 30
MAX_LENGTH = 120
FLAT_CONSTANT_SHARE = 0.25


def _bump(t: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def _template(cls: PatternClass, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if cls is PatternClass.FLAT:
        return np.zeros_like(t)
    if cls is PatternClass.STEADY_RISE:
        return t ** rng.uniform(0.7, 1.4)
    if cls is PatternClass.STEADY_FALL:
        return 1.0 - t ** rng.uniform(0.7, 1.4)
    if cls is PatternClass.SINGLE_SPIKE:
        return _bump(t, rng.uniform(0.15, 0.85), rng.uniform(0.015, 0.06))
    if cls is PatternClass.MULTI_PEAK:
        peaks = int(rng.integers(3, 9))
        if rng.random() < 0.5:
            # square bursts, the shape periodic job traffic takes
            period = 1.0 / peaks
            duty = rng.uniform(0.2, 0.5)
            phase = rng.uniform(0.0, period)
            return (((t + phase) % period) < duty * period).astype(np.float64)
        centers = (np.arange(peaks) + rng.uniform(0.3, 0.7, size=peaks)) / peaks
        width = rng.uniform(0.15, 0.3) / peaks
        return np.sum([_bump(t, c, width) for c in centers], axis=0)
    if cls is PatternClass.LEVEL_SHIFT_UP:
        return (t >= rng.uniform(0.15, 0.8)).astype(np.float64)
    if cls is PatternClass.LEVEL_SHIFT_DOWN:
        return (t < rng.uniform(0.2, 0.6)).astype(np.float64)
    if cls is PatternClass.SHARP_DECLINE:
        start = rng.uniform(0.75, 0.9)
        span = rng.uniform(0.03, 0.08)
        return np.clip(1.0 - (t - start) / span, 0.0, 1.0)
    raise ValueError(f"unknown pattern class {cls!r}")


def generate_shape(cls: PatternClass, rng: np.random.Generator, length: int | None = None) -> np.ndarray:
    """One labeled example: closed-form template, random level and scale, Gaussian noise."""
    n = int(length if length is not None else rng.integers(MIN_LENGTH, MAX_LENGTH + 1))
    t = np.linspace(0.0, 1.0, n)
    base = rng.uniform(0.0, 1000.0)
    scale = rng.uniform(1.0, 500.0)
    if cls is PatternClass.FLAT and rng.random() < FLAT_CONSTANT_SHARE:
        return np.full(n, base)
    noise = rng.normal(0.0, rng.uniform(0.02, 0.12), size=n)
    if cls is PatternClass.FLAT:
        noise = rng.normal(0.0, 1.0, size=n)
    return base + scale * (_template(cls, t, rng) + noise)


def generate_shape_corpus(per_class: int, seed: int) -> list[tuple[np.ndarray, PatternClass]]:
    rng = np.random.default_rng(seed)
    corpus: list[tuple[np.ndarray, PatternClass]] = []
    for cls in PatternClass:
        corpus.extend((generate_shape(cls, rng), cls) for _ in range(per_class))
    return corpus
