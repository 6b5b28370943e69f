from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from nicdiag.config import PipelineConfig
from nicdiag.diagnosis.base import Ranker
from nicdiag.diagnosis.forest import ForestModel, load_forest, predict_states, save_forest, train_forest
from nicdiag.diagnosis.result import DiagnosisResult
from nicdiag.diagnosis.states import StateLabel, StateProbabilityMatrix
from nicdiag.diagnosis.walker import CulpritMassRanker, RandomWalkRanker, WalkConfig
from nicdiag.errors import EmptyLibraryError, ModelConfigurationError, TrainingError
from nicdiag.features.fusion import (
    AnomalyVector,
    FeatureSchema,
    NicPairFeatureVector,
    NormalSampleLibrary,
    build_feature_vectors,
    compress,
    load_library,
    save_library,
)
from nicdiag.features.logcluster import (
    LogClusterModel,
    cluster_templates,
    fit_normal_counts,
    load_log_model,
    save_log_model,
    vectorize_templates,
    window_counts,
)
from nicdiag.features.patterns import PatternModel, load_pattern_model, save_pattern_model, train_pattern_model
from nicdiag.features.shapes import generate_shape_corpus
from nicdiag.features.templates import parse_templates
from nicdiag.logging_utils import DebugSink
from nicdiag.simulator.injection import LabeledSample, filter_effective
from nicdiag.telemetry.model import LogRecord, Window

BUNDLE_FORMAT = "nicdiag-bundle"
BUNDLE_VERSION = 1

VARIANTS = ("full", "C1", "C2", "C3", "C4", "C5")
VARIANT_NOTES = {
    "full": "all features, random-walk ranking",
    "C1": "no metric pattern features",
    "C2": "no metric level features",
    "C3": "no metric input",
    "C4": "no log input",
    "C5": "classifier-only ranking by culprit mass",
}

_FILES = {
    "pattern": "pattern_model.txt",
    "logs": "log_model.txt",
    "library": "library.txt",
    "forest": "forest.txt",
}


@dataclass(eq=False)
class ModelBundle:
    variant: str
    seed: int
    schema: FeatureSchema
    library: NormalSampleLibrary
    forest: ForestModel
    pattern_model: PatternModel | None = None
    log_model: LogClusterModel | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def with_variant(self, variant: str) -> "ModelBundle":
        """Same trained models under another ranking variant (only C5 differs at diagnosis time)."""
        _check_variant(variant)
        return replace(self, variant=variant)

    def check(self) -> None:
        if self.library.slots and self.library.slots != self.schema.slots:
            raise ModelConfigurationError("library slots do not match the feature schema")
        if self.forest.n_features != self.schema.dimension:
            raise ModelConfigurationError(
                f"forest expects {self.forest.n_features} features, schema has {self.schema.dimension}"
            )
        clusters = tuple(self.log_model.cluster_ids) if self.log_model is not None else ()
        if clusters != self.schema.clusters:
            raise ModelConfigurationError("log model clusters do not match the feature schema")
        if self.schema.include_patterns and self.schema.uses_metrics and self.pattern_model is None:
            raise ModelConfigurationError("schema has pattern slots but the bundle has no pattern model")


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ModelConfigurationError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")


def _schema_flags(variant: str) -> dict[str, bool]:
    return {
        "include_patterns": variant not in ("C1", "C3"),
        "include_levels": variant not in ("C2", "C3"),
        "include_logs": variant != "C4",
    }


def _node_logs(window: Window) -> list[LogRecord]:
    """Window logs once per compute node; pairs on the same node share them."""
    seen: set[str] = set()
    records: list[LogRecord] = []
    for pid in sorted(window.slices):
        slice_ = window.slices[pid]
        if slice_.pair.compute_node in seen:
            continue
        seen.add(slice_.pair.compute_node)
        records.extend(slice_.logs)
    return records


def _metric_names(samples: Sequence[LabeledSample]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    compute: set[str] = set()
    switch: set[str] = set()
    for sample in samples:
        for owner, metric in sample.bundle.series:
            (compute if owner.kind == "compute" else switch).add(metric)
    return tuple(sorted(compute)), tuple(sorted(switch))


class DiagnosisPipeline:
    """Offline training and online diagnosis over labeled windows."""

    def __init__(self, config: PipelineConfig, sink: DebugSink | None = None):
        self.config = config
        self.sink = sink or DebugSink.null()
        self._log = self.sink.info

    # -- offline ---------------------------------------------------------------------------

    def train_pattern_model(self) -> PatternModel:
        cfg = self.config.pattern
        corpus = generate_shape_corpus(cfg.examples_per_class, self.config.seed)
        return train_pattern_model(
            corpus,
            seed=self.config.seed,
            length=cfg.resample_length,
            kernels=cfg.kernels,
            kernel_width=cfg.kernel_width,
            pool=cfg.pool_width,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            holdout_fraction=cfg.holdout_fraction,
            log_fn=self._log,
        )

    def train_log_model(self, samples: Sequence[LabeledSample], windows: dict[str, Window]) -> LogClusterModel | None:
        cfg = self.config.logs
        records = [r for s in samples for r in _node_logs(windows[s.sample_id])]
        if not records:
            self.sink.warning("training corpus has no logs; training without log features")
            return None
        templates, _ = parse_templates(records, cfg.depth, cfg.sim_threshold, cfg.max_children)
        informative = [t for t in templates if t.informative]
        dropped = len(templates) - len(informative)
        if dropped:
            self._log(f"logs: dropped {dropped} wildcard-only templates")
        if not informative:
            self.sink.warning("no usable log templates; training without log features")
            return None
        model = cluster_templates(
            vectorize_templates(informative), cfg.distance_threshold, templates=informative, log_fn=self._log
        )
        model = replace(model, depth=cfg.depth, sim_threshold=cfg.sim_threshold, max_children=cfg.max_children)
        normal_counts = [
            window_counts(model, windows[s.sample_id].slices[pid].logs)
            for s in samples
            if s.is_normal
            for pid in sorted(windows[s.sample_id].slices)
        ]
        return fit_normal_counts(model, normal_counts)

    def train(
        self,
        samples: Sequence[LabeledSample],
        variant: str = "full",
        pattern_model: PatternModel | None = None,
    ) -> ModelBundle:
        _check_variant(variant)
        flags = _schema_flags(variant)
        started = time.perf_counter()
        usable = filter_effective(samples)
        if len(usable) < len(samples):
            self._log(f"train: dropped {len(samples) - len(usable)} ineffective injections")
        normals = [s for s in usable if s.is_normal]
        if not normals:
            raise TrainingError("no normal samples in the training corpus; the normal sample library cannot be built")
        windows = {s.sample_id: s.window() for s in usable}

        uses_metrics = flags["include_patterns"] or flags["include_levels"]
        if flags["include_patterns"] and pattern_model is None:
            pattern_model = self.train_pattern_model()
        if not flags["include_patterns"]:
            pattern_model = None
        log_model = self.train_log_model(usable, windows) if flags["include_logs"] else None

        compute_metrics, switch_metrics = _metric_names(usable) if uses_metrics else ((), ())
        schema = FeatureSchema(
            compute_metrics=compute_metrics,
            switch_metrics=switch_metrics,
            clusters=tuple(log_model.cluster_ids) if log_model is not None else (),
            include_patterns=flags["include_patterns"],
            include_levels=flags["include_levels"],
        )
        if schema.dimension == 0:
            raise TrainingError(f"variant {variant} leaves no feature slots")
        self._log(f"train: variant {variant} schema has {schema.dimension} slots")

        vectors = {
            s.sample_id: build_feature_vectors(windows[s.sample_id], pattern_model, log_model, schema)
            for s in usable
        }
        library = NormalSampleLibrary(
            tuple(v for s in normals for _, v in sorted(vectors[s.sample_id].items())), schema.slots
        )
        rows: list[tuple[AnomalyVector, StateLabel]] = []
        for s in usable:
            # a normal sample is never compressed against its own vectors
            reference = library.without_window(s.sample_id) if s.is_normal else library
            if not len(reference):
                reference = library
            for pid, vector in sorted(vectors[s.sample_id].items()):
                rows.append((compress(vector, reference), s.labels[pid]))

        forest = train_forest(
            rows,
            seed=self.config.seed,
            n_trees=self.config.forest.n_trees,
            min_leaf=self.config.forest.min_leaf,
            n_jobs=self.config.forest.n_jobs,
            log_fn=self._log,
        )
        meta = {
            "samples": str(len(usable)),
            "normal_samples": str(len(normals)),
            "training_rows": str(len(rows)),
            "train_seconds": f"{time.perf_counter() - started:.2f}",
        }
        if pattern_model is not None:
            meta["pattern_holdout_accuracy"] = pattern_model.training_meta.get("holdout_accuracy", "nan")
        bundle = ModelBundle(variant, self.config.seed, schema, library, forest, pattern_model, log_model, meta)
        bundle.check()
        return bundle

    # -- online ----------------------------------------------------------------------------

    def featurize(self, bundle: ModelBundle, window: Window) -> dict[int, NicPairFeatureVector]:
        return build_feature_vectors(window, bundle.pattern_model, bundle.log_model, bundle.schema, self._log)

    def states(self, bundle: ModelBundle, window: Window) -> StateProbabilityMatrix:
        if not len(bundle.library):
            raise EmptyLibraryError()
        vectors = self.featurize(bundle, window)
        anomalies = {pid: compress(v, bundle.library) for pid, v in vectors.items()}
        return predict_states(bundle.forest, anomalies)

    def ranker(self, bundle: ModelBundle, n_pairs: int) -> Ranker:
        walk = self.config.walk
        if bundle.variant == "C5":
            return CulpritMassRanker(walk.num_results)
        config = WalkConfig(
            num_results=walk.num_results,
            steps_per_iteration=walk.steps_per_node * max(1, n_pairs),
            seed=self.config.seed,
        )
        return RandomWalkRanker(config, self._log if self.config.debug.verbose else None)

    def diagnose_window(self, bundle: ModelBundle, window: Window) -> DiagnosisResult:
        started = time.perf_counter()
        states = self.states(bundle, window)
        result = self.ranker(bundle, len(states)).rank(states)
        elapsed = time.perf_counter() - started
        result.meta["seconds"] = f"{elapsed:.4f}"
        result.meta["window"] = window.window_id
        self._log(f"diagnose: window {window.window_id} max culprit mass {result.max_culprit_mass:.3f}")
        return result

    def diagnose(self, bundle: ModelBundle, sample: LabeledSample) -> DiagnosisResult:
        return self.diagnose_window(bundle, sample.window())

    def extend_library(self, bundle: ModelBundle, normals: Sequence[LabeledSample]) -> ModelBundle:
        """Append failure-free windows to the library without retraining."""
        extra = []
        for sample in normals:
            if not sample.is_normal:
                continue
            vectors = self.featurize(bundle, sample.window())
            extra.extend(v for _, v in sorted(vectors.items()))
        self._log(f"library: appended {len(extra)} vectors")
        return replace(bundle, library=bundle.library.append(extra))


def save_bundle(bundle: ModelBundle, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"library": _FILES["library"], "forest": _FILES["forest"]}
    save_library(bundle.library, out_dir / _FILES["library"])
    save_forest(bundle.forest, out_dir / _FILES["forest"])
    if bundle.pattern_model is not None:
        save_pattern_model(bundle.pattern_model, out_dir / _FILES["pattern"])
        files["pattern"] = _FILES["pattern"]
    if bundle.log_model is not None:
        save_log_model(bundle.log_model, out_dir / _FILES["logs"])
        files["logs"] = _FILES["logs"]
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "variant": bundle.variant,
        "seed": bundle.seed,
        "schema": bundle.schema.to_dict(),
        "oob_accuracy": bundle.forest.oob_accuracy,
        "files": files,
        "meta": {k: v for k, v in bundle.meta.items() if k != "train_seconds"},
    }
    (out_dir / "bundle.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_dir


def load_bundle(bundle_dir: Path) -> ModelBundle:
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / "bundle.json"
    if not manifest_path.exists():
        raise ModelConfigurationError(f"{bundle_dir}: no bundle.json; run `nicdiag train` first")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != BUNDLE_FORMAT or manifest.get("version") != BUNDLE_VERSION:
        raise ModelConfigurationError(
            f"{manifest_path}: expected {BUNDLE_FORMAT} v{BUNDLE_VERSION}, "
            f"got {manifest.get('format')} v{manifest.get('version')}"
        )
    files = manifest.get("files", {})
    variant = manifest.get("variant", "full")
    _check_variant(variant)
    bundle = ModelBundle(
        variant=variant,
        seed=int(manifest.get("seed", 0)),
        schema=FeatureSchema.from_dict(manifest.get("schema", {})),
        library=load_library(bundle_dir / files.get("library", _FILES["library"])),
        forest=load_forest(bundle_dir / files.get("forest", _FILES["forest"])),
        pattern_model=load_pattern_model(bundle_dir / files["pattern"]) if "pattern" in files else None,
        log_model=load_log_model(bundle_dir / files["logs"]) if "logs" in files else None,
        meta=dict(manifest.get("meta", {})),
    )
    bundle.check()
    return bundle
