from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from nicdiag.config import PipelineConfig, merge_section
from nicdiag.diagnosis.states import FAILURE_TYPES, StateLabel
from nicdiag.errors import UnknownProtocolError
from nicdiag.evaluation.metrics import EvalReport, MatchMode, TestCase, build_report
from nicdiag.logging_utils import DebugSink
from nicdiag.pipeline import VARIANTS, DiagnosisPipeline, ModelBundle
from nicdiag.simulator.cluster import generate_cluster
from nicdiag.simulator.corpus import generate_corpus
from nicdiag.simulator.injection import LabeledSample, filter_effective
from nicdiag.simulator.profiles import DATASET_COUNTS, PROFILES, get_profile
from nicdiag.telemetry.model import Topology

PROTOCOLS = ("overall", "robustness", "ablation", "scalability")


@dataclass
class ProtocolConfig:
    compute: int = 4
    switches: int = 1
    seed: int = 7
    profile: str = "wrf"
    failures_per_type: int = 60
    normals: int = 40
    dataset_counts: bool = False
    job_size: int = 0
    n_jobs: int = 1
    small_cluster: int = 16
    large_cluster: int = 32
    mode: str = MatchMode.PAIR_AND_TYPE.value
    test_profiles: list[str] = field(default_factory=list)

    def counts(self, profile: str) -> dict[StateLabel, int]:
        if self.dataset_counts:
            row = DATASET_COUNTS[profile]
            counts = {ftype: row[i] for i, ftype in enumerate(FAILURE_TYPES)}
            counts[StateLabel.NORMAL] = row[-1]
            return counts
        counts = {ftype: self.failures_per_type for ftype in FAILURE_TYPES}
        counts[StateLabel.NORMAL] = self.normals
        return counts


def protocol_config_from_dict(data: dict) -> ProtocolConfig:
    config = ProtocolConfig()
    merge_section(config, data)
    return config


def load_protocol_config(path: Path | None) -> ProtocolConfig:
    if path is None:
        return ProtocolConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        print(f"Warning: Could not load protocol config {path}: {e}", file=sys.stderr)
        return ProtocolConfig()
    return protocol_config_from_dict(data if isinstance(data, dict) else {})


@dataclass(frozen=True)
class _Split:
    topology: Topology
    train: list[LabeledSample]
    test: list[LabeledSample]


class ProtocolRunner:
    """Generates corpora, trains bundles and scores them for one experimental protocol."""

    def __init__(self, config: ProtocolConfig, pipeline_config: PipelineConfig, sink: DebugSink | None = None):
        self.config = config
        self.sink = sink or DebugSink.null()
        self._log = self.sink.info
        self.pipeline = DiagnosisPipeline(replace(pipeline_config, seed=config.seed), self.sink)
        self._pattern_model = None

    def _corpus(self, topology: Topology, profile: str, seed: int) -> list[LabeledSample]:
        cfg = self.pipeline.config
        samples = generate_corpus(
            topology,
            [get_profile(profile)],
            self.config.counts(profile),
            seed,
            window_length=cfg.window.length,
            interval=cfg.window.sample_interval,
            job_size=self.config.job_size or None,
            n_jobs=self.config.n_jobs,
            log_fn=self._log,
        )
        return filter_effective(samples)

    def _split(self, topology: Topology, profile: str, seed: int) -> _Split:
        """All normals go to training; each failure type is split in half by a seeded shuffle."""
        samples = self._corpus(topology, profile, seed)
        rng = np.random.default_rng(seed)
        train = [s for s in samples if s.is_normal]
        test = []
        for ftype in FAILURE_TYPES:
            group = [s for s in samples if s.failure_type == ftype]
            order = rng.permutation(len(group))
            half = len(group) // 2
            train.extend(group[i] for i in order[:half])
            test.extend(group[i] for i in order[half:])
        return _Split(topology, train, test)

    def _train(self, samples: Sequence[LabeledSample], variant: str = "full") -> ModelBundle:
        if self._pattern_model is None and variant not in ("C1", "C3"):
            self._pattern_model = self.pipeline.train_pattern_model()
        return self.pipeline.train(samples, variant, pattern_model=self._pattern_model)

    def _case(self, bundle: ModelBundle, sample: LabeledSample) -> TestCase:
        started = time.perf_counter()
        result = self.pipeline.diagnose(bundle, sample)
        return TestCase(
            sample_id=sample.sample_id,
            true_root=(sample.culprit, sample.failure_type),
            predicted=tuple(result.candidates),
            seconds=time.perf_counter() - started,
        )

    def score(self, name: str, bundle: ModelBundle, samples: Sequence[LabeledSample]) -> EvalReport:
        failures = [s for s in samples if not s.is_normal]
        cases = Parallel(n_jobs=self.config.n_jobs, prefer="threads")(
            delayed(self._case)(bundle, s) for s in failures
        )
        report = build_report(name, cases, MatchMode(self.config.mode))
        self._log(f"evaluate: {name} AC@1 {report.ac[1]:.4f} Avg@5 {report.avg[5]:.4f} over {report.n_cases} cases")
        return report

    # -- protocols -------------------------------------------------------------------------

    def overall(self) -> dict[str, EvalReport]:
        split = self._split(generate_cluster(self.config.compute, self.config.switches), self.config.profile, self.config.seed)
        bundle = self._train(split.train)
        name = f"overall/{self.config.profile}_b"
        return {name: self.score(name, bundle, split.test)}

    def robustness(self) -> dict[str, EvalReport]:
        topology = generate_cluster(self.config.compute, self.config.switches)
        bundle = self._train(self._corpus(topology, self.config.profile, self.config.seed))
        classifier_only = bundle.with_variant("C5")
        others = self.config.test_profiles or [p for p in PROFILES if p != self.config.profile]
        reports = {}
        for offset, profile in enumerate(others, start=1):
            samples = self._corpus(topology, profile, self.config.seed + offset)
            name = f"robustness/{profile}"
            reports[name] = self.score(name, bundle, samples)
            reports[f"{name}/C5"] = self.score(f"{name}/C5", classifier_only, samples)
        return reports

    def ablation(self) -> dict[str, EvalReport]:
        split = self._split(generate_cluster(self.config.compute, self.config.switches), self.config.profile, self.config.seed)
        reports = {}
        full: ModelBundle | None = None
        for variant in VARIANTS:
            if variant == "C5" and full is not None:
                bundle = full.with_variant("C5")
            else:
                bundle = self._train(split.train, variant)
            if variant == "full":
                full = bundle
            name = f"{variant}/{self.config.profile}_b"
            reports[name] = self.score(name, bundle, split.test)
        return reports

    def scalability(self) -> dict[str, EvalReport]:
        small, large = self.config.small_cluster, self.config.large_cluster
        switches = self.config.switches
        splits = {
            n: self._split(generate_cluster(n, max(1, switches)), self.config.profile, self.config.seed + n)
            for n in (small, large)
        }
        bundles = {n: self._train(splits[n].train) for n in (small, large)}
        reports = {}
        for train_n, test_n in ((small, small), (large, large), (small, large)):
            name = f"{train_n}_a->{test_n}_b"
            reports[name] = self.score(name, bundles[train_n], splits[test_n].test)
        return reports


def run_protocol(
    name: str,
    config: ProtocolConfig | None = None,
    pipeline_config: PipelineConfig | None = None,
    sink: DebugSink | None = None,
) -> dict[str, EvalReport]:
    if name not in PROTOCOLS:
        raise UnknownProtocolError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")
    runner = ProtocolRunner(config or ProtocolConfig(), pipeline_config or PipelineConfig(), sink)
    return getattr(runner, name)()
