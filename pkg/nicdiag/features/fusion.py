from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from nicdiag.errors import EmptyLibraryError, ModelConfigurationError
from nicdiag.features.levels import LevelSymbol, level_symbols
from nicdiag.features.logcluster import LogClusterModel, quantize_counts, window_counts
from nicdiag.features.patterns import PatternModel, classify_patterns
from nicdiag.telemetry.model import ENDPOINT_KINDS, EndpointKind, NicPair, Window

ABSENT = "absent"
LIBRARY_MAGIC = "NICDIAG-LIBRARY"
LIBRARY_VERSION = 1


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered slots: compute metrics, switch metrics (pattern then level each), then log clusters."""

    compute_metrics: tuple[str, ...] = ()
    switch_metrics: tuple[str, ...] = ()
    clusters: tuple[int, ...] = ()
    include_patterns: bool = True
    include_levels: bool = True

    @property
    def slots(self) -> tuple[str, ...]:
        names: list[str] = []
        for kind in ENDPOINT_KINDS:
            for metric in self.metrics(kind):
                if self.include_patterns:
                    names.append(f"{kind}:{metric}:pattern")
                if self.include_levels:
                    names.append(f"{kind}:{metric}:level")
        names.extend(f"log:{cid}" for cid in self.clusters)
        return tuple(names)

    @property
    def dimension(self) -> int:
        return len(self.slots)

    @property
    def uses_metrics(self) -> bool:
        return self.include_patterns or self.include_levels

    def metrics(self, kind: EndpointKind) -> tuple[str, ...]:
        if not self.uses_metrics:
            return ()
        return self.compute_metrics if kind == "compute" else self.switch_metrics

    def to_dict(self) -> dict:
        return {
            "compute_metrics": list(self.compute_metrics),
            "switch_metrics": list(self.switch_metrics),
            "clusters": list(self.clusters),
            "include_patterns": self.include_patterns,
            "include_levels": self.include_levels,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        return cls(
            compute_metrics=tuple(data.get("compute_metrics", ())),
            switch_metrics=tuple(data.get("switch_metrics", ())),
            clusters=tuple(int(c) for c in data.get("clusters", ())),
            include_patterns=bool(data.get("include_patterns", True)),
            include_levels=bool(data.get("include_levels", True)),
        )


@dataclass(frozen=True)
class NicPairFeatureVector:
    pair: int
    window: str
    symbols: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True, eq=False)
class AnomalyVector:
    pair: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass(frozen=True, eq=False)
class NormalSampleLibrary:
    samples: tuple[NicPairFeatureVector, ...] = ()
    slots: tuple[str, ...] = ()
    _table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        dims = {len(s) for s in self.samples}
        if self.slots:
            dims.add(len(self.slots))
        if len(dims) > 1:
            raise ModelConfigurationError(f"library vectors disagree on dimension: {sorted(dims)}")
        if self.samples:
            table = np.array([s.symbols for s in self.samples], dtype=np.str_)
            object.__setattr__(self, "_table", table)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dimension(self) -> int:
        if self.slots:
            return len(self.slots)
        return len(self.samples[0]) if self.samples else 0

    def append(self, vectors: Iterable[NicPairFeatureVector]) -> "NormalSampleLibrary":
        return NormalSampleLibrary(self.samples + tuple(vectors), self.slots)

    def without_window(self, window_id: str) -> "NormalSampleLibrary":
        return NormalSampleLibrary(tuple(s for s in self.samples if s.window != window_id), self.slots)

    def match_counts(self, vector: NicPairFeatureVector) -> np.ndarray:
        if self._table is None:
            return np.zeros(0, dtype=np.int64)
        if len(vector) != self._table.shape[1]:
            raise ModelConfigurationError(
                f"feature vector has {len(vector)} slots, library has {self._table.shape[1]}"
            )
        return (self._table == np.array(vector.symbols, dtype=np.str_)).sum(axis=1)


def _window_means(window: Window, kind: EndpointKind, metric: str) -> dict[int, float]:
    means: dict[int, float] = {}
    for pair_id, slice_ in window.slices.items():
        diffs = slice_.side(kind).get(metric)
        if diffs is not None and diffs.size:
            means[pair_id] = float(diffs.mean())
    return means


def build_feature_vectors(
    window: Window,
    pattern_model: PatternModel | None,
    log_model: LogClusterModel | None,
    schema: FeatureSchema,
    log_fn: Callable[[str], None] | None = None,
) -> dict[int, NicPairFeatureVector]:
    """Feature vectors for every pair in `window`; levels compare each endpoint with its peers."""
    if schema.clusters:
        if log_model is None or tuple(log_model.cluster_ids) != schema.clusters:
            raise ModelConfigurationError("schema log clusters do not match the log cluster model")
    if schema.include_patterns and schema.uses_metrics and pattern_model is None:
        raise ModelConfigurationError("schema has pattern slots but no pattern model was given")

    pair_ids = sorted(window.slices)
    columns: dict[int, list[str]] = {pid: [] for pid in pair_ids}
    for kind in ENDPOINT_KINDS:
        for metric in schema.metrics(kind):
            if schema.include_patterns:
                present = [pid for pid in pair_ids if window.slices[pid].side(kind).get(metric, np.zeros(0)).size]
                labels = classify_patterns(
                    pattern_model, [window.slices[pid].side(kind)[metric] for pid in present]
                )
                by_pair = {pid: cls.label for pid, cls in zip(present, labels)}
                for pid in pair_ids:
                    columns[pid].append(by_pair.get(pid, ABSENT))
            if schema.include_levels:
                levels = level_symbols(metric, _window_means(window, kind, metric), log_fn)
                for pid in pair_ids:
                    level = levels.get(pid)
                    columns[pid].append(level.name if isinstance(level, LevelSymbol) else ABSENT)
    if schema.clusters:
        for pid in pair_ids:
            counts = window_counts(log_model, window.slices[pid].logs, log_fn)
            quant = quantize_counts(log_model, counts)
            columns[pid].extend(str(quant.symbols[cid]) for cid in schema.clusters)
    return {
        pid: NicPairFeatureVector(pair=pid, window=window.window_id, symbols=tuple(columns[pid]))
        for pid in pair_ids
    }


def build_feature_vector(
    pair: NicPair,
    window: Window,
    pattern_model: PatternModel | None,
    log_model: LogClusterModel | None,
    schema: FeatureSchema,
) -> NicPairFeatureVector:
    return build_feature_vectors(window, pattern_model, log_model, schema)[pair.id]


def similarity(v_r: NicPairFeatureVector, v_n: NicPairFeatureVector) -> Fraction:
    if len(v_r) != len(v_n):
        raise ModelConfigurationError(f"dimension mismatch: {len(v_r)} vs {len(v_n)}")
    if not len(v_r):
        return Fraction(1)
    same = sum(1 for a, b in zip(v_r.symbols, v_n.symbols) if a == b)
    return Fraction(same, len(v_r))


def nearest_normal(v_r: NicPairFeatureVector, library: NormalSampleLibrary) -> int:
    if not len(library):
        raise EmptyLibraryError()
    # first maximum, i.e. the smallest library index on ties
    return int(np.argmax(library.match_counts(v_r)))


def compress(v_r: NicPairFeatureVector, library: NormalSampleLibrary) -> AnomalyVector:
    best = library.samples[nearest_normal(v_r, library)]
    bits = np.fromiter((a != b for a, b in zip(v_r.symbols, best.symbols)), dtype=np.uint8, count=len(v_r))
    return AnomalyVector(pair=v_r.pair, bits=bits)


def compress_all(
    vectors: Sequence[NicPairFeatureVector], library: NormalSampleLibrary
) -> dict[int, AnomalyVector]:
    return {v.pair: compress(v, library) for v in vectors}


def save_library(library: NormalSampleLibrary, path: Path) -> None:
    lines = [f"{LIBRARY_MAGIC} v{LIBRARY_VERSION}", "slots\t" + " ".join(library.slots)]
    for s in library.samples:
        lines.append(f"{s.pair}\t{s.window}\t{' '.join(s.symbols)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_library(path: Path) -> NormalSampleLibrary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"{LIBRARY_MAGIC} v{LIBRARY_VERSION}":
        raise ModelConfigurationError(f"{path}: not a {LIBRARY_MAGIC} v{LIBRARY_VERSION} file")
    head, _, slot_text = lines[1].partition("\t")
    if head != "slots":
        raise ModelConfigurationError(f"{path}:2: expected the slot header")
    slots = tuple(slot_text.split())
    samples = []
    for line_no, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ModelConfigurationError(f"{path}:{line_no}: expected pair, window, symbols")
        samples.append(NicPairFeatureVector(int(parts[0]), parts[1], tuple(parts[2].split())))
    return NormalSampleLibrary(tuple(samples), slots)
