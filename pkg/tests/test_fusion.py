from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from nicdiag.errors import EmptyLibraryError, ModelConfigurationError
from nicdiag.features.fusion import (
    ABSENT,
    FeatureSchema,
    NicPairFeatureVector,
    NormalSampleLibrary,
    build_feature_vector,
    build_feature_vectors,
    compress,
    load_library,
    nearest_normal,
    save_library,
    similarity,
)
from nicdiag.features.logcluster import LogClusterModel
from nicdiag.features.templates import LogTemplate
from nicdiag.telemetry.model import Window, derive_nic_pairs
from nicdiag.telemetry.windows import slice_windows


def _vec(*symbols: str, pair: int = 0, window: str = "w") -> NicPairFeatureVector:
    return NicPairFeatureVector(pair=pair, window=window, symbols=tuple(symbols))


def _crc_model() -> LogClusterModel:
    template = LogTemplate(0, ("CRC", "Error", "on", "port", "<*>", "lane", "<*>"), 1)
    return LogClusterModel(templates=(template,), clusters={0: (0,)}, mu={0: 0.0}, sigma={0: 0.0})


def test_similarity_examples():
    assert similarity(_vec("a", "b", "c", "d"), _vec("a", "b", "c", "d")) == 1
    assert similarity(_vec("a", "b", "c", "d"), _vec("a", "x", "c", "y")) == Fraction(1, 2)
    assert similarity(_vec("a", "b"), _vec("x", "y")) == 0


def test_similarity_rejects_dimension_mismatch():
    with pytest.raises(ModelConfigurationError):
        similarity(_vec("a"), _vec("a", "b"))


def test_compress_against_equal_sample_is_zero():
    library = NormalSampleLibrary((_vec("a", "b", "c"), _vec("x", "y", "z")))
    assert compress(_vec("x", "y", "z"), library).bits.tolist() == [0, 0, 0]


def test_compress_marks_differing_positions():
    library = NormalSampleLibrary((_vec("A", "X", "C"),))
    assert compress(_vec("A", "B", "C"), library).bits.tolist() == [0, 1, 0]


def test_compress_uses_most_similar_sample():
    v_r = _vec(*"abcdefghij")
    s1 = _vec(*"abcdefghiZ")  # 0.9
    s2 = _vec(*"abcdefZZZZ")  # 0.6
    library = NormalSampleLibrary((s2, s1))
    assert nearest_normal(v_r, library) == 1
    assert compress(v_r, library).bits.tolist() == [0] * 9 + [1]


def test_ties_pick_first_library_entry():
    library = NormalSampleLibrary((_vec("a", "Z"), _vec("Z", "b")))
    assert nearest_normal(_vec("a", "b"), library) == 0


def test_empty_library():
    with pytest.raises(EmptyLibraryError):
        compress(_vec("a"), NormalSampleLibrary(()))


def test_library_without_window_and_append():
    library = NormalSampleLibrary((_vec("a", window="w1"), _vec("b", window="w2")), ("log:0",))
    assert len(library.without_window("w1")) == 1
    assert len(library.append([_vec("c", window="w3")])) == 3


def test_library_file_round_trip(tmp_path):
    library = NormalSampleLibrary((_vec("flat", "M", "0", window="s1"), _vec("multi-peak", "H", "1", pair=2, window="s2")),
                                  ("compute:x:pattern", "compute:x:level", "log:0"))
    path = tmp_path / "library.txt"
    save_library(library, path)
    loaded = load_library(path)
    assert loaded.slots == library.slots
    assert loaded.samples == library.samples


def test_schema_slot_order():
    schema = FeatureSchema(("rx",), ("tx",), (0, 2))
    assert schema.slots == (
        "compute:rx:pattern",
        "compute:rx:level",
        "switch:tx:pattern",
        "switch:tx:level",
        "log:0",
        "log:2",
    )
    assert FeatureSchema.from_dict(schema.to_dict()) == schema
    assert FeatureSchema(("rx",), ("tx",), (0,), include_patterns=False, include_levels=False).slots == ("log:0",)


def test_empty_window_gives_absent_symbols(topology, pattern_model):
    pairs = derive_nic_pairs(topology)
    window = slice_windows({}, [], pairs, 0, 3600, "empty")
    schema = FeatureSchema(("rx_crc_errors_phy",), ("rx_prio_pause",), (0,))
    vectors = build_feature_vectors(window, pattern_model, _crc_model(), schema)
    for vector in vectors.values():
        assert vector.symbols[:2] == (ABSENT, ABSENT)
        assert vector.symbols[-1] == "0"


def test_identical_windows_identical_vectors(small_corpus, pattern_model, trained_bundle):
    sample = small_corpus[0]
    a = build_feature_vectors(sample.window(), pattern_model, trained_bundle.log_model, trained_bundle.schema)
    b = build_feature_vectors(sample.window(), pattern_model, trained_bundle.log_model, trained_bundle.schema)
    assert a == b


def test_single_pair_matches_batch(small_corpus, pattern_model, trained_bundle):
    sample = small_corpus[0]
    window = sample.window()
    batch = build_feature_vectors(window, pattern_model, trained_bundle.log_model, trained_bundle.schema)
    pair = sample.pairs[-1]
    vector = build_feature_vector(pair, window, pattern_model, trained_bundle.log_model, trained_bundle.schema)
    assert vector == batch[pair.id]
    assert len(vector) == trained_bundle.schema.dimension


def test_crc_failure_shows_in_metrics_and_logs(small_corpus, pattern_model):
    sample = next(s for s in small_corpus if s.failure_type is not None and s.failure_type.text == "F1")
    window = sample.window()
    culprit = sample.culprit
    schema = FeatureSchema(("rx_crc_errors_phy",), (), (0,))
    vectors = build_feature_vectors(window, pattern_model, _crc_model(), schema)
    pattern, _, log_bit = vectors[culprit].symbols
    assert pattern != "flat"
    assert log_bit == "1"
    for pid, vector in vectors.items():
        if pid != culprit:
            assert vector.symbols[0] == "flat"
            assert vector.symbols[2] == "0"


def test_cluster_mismatch_is_rejected(topology, pattern_model):
    window = Window(0, 3600, {}, "w")
    with pytest.raises(ModelConfigurationError):
        build_feature_vectors(window, pattern_model, _crc_model(), FeatureSchema((), (), (0, 1)))


def test_anomaly_bits_are_read_only():
    bits = compress(_vec("a", "b"), NormalSampleLibrary((_vec("a", "c"),))).bits
    assert bits.dtype == np.uint8
    with pytest.raises(ValueError):
        bits[0] = 1


def _random_vectors(rng: np.random.Generator, count: int, m: int) -> list[NicPairFeatureVector]:
    alphabet = np.array(["flat", "multi-peak", "L", "M", "H", "0", "1"])
    return [_vec(*map(str, rng.choice(alphabet, size=m)), pair=i, window=f"w{i}") for i in range(count)]


def test_anomaly_bits_count_the_mismatches_with_the_nearest_sample():
    rng = np.random.default_rng(12)
    for _ in range(200):
        m = int(rng.integers(1, 20))
        v, *normals = _random_vectors(rng, int(rng.integers(2, 8)), m)
        library = NormalSampleLibrary(tuple(normals))
        best = max(similarity(v, n) for n in normals)
        assert int(compress(v, library).bits.sum()) == m * (1 - best)
        assert compress(v, library.append([v])).bits.sum() == 0


def test_similarity_is_symmetric_and_reflexive():
    rng = np.random.default_rng(13)
    for _ in range(200):
        a, b = _random_vectors(rng, 2, int(rng.integers(1, 20)))
        assert similarity(a, b) == similarity(b, a)
        assert similarity(a, a) == 1
