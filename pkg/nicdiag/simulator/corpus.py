from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from nicdiag.diagnosis.states import FAILURE_TYPES, StateLabel
from nicdiag.errors import TelemetryParseError, TelemetryValidationError
from nicdiag.simulator.injection import InjectionSpec, LabeledSample, inject_failure, normal_sample
from nicdiag.simulator.profiles import WorkloadProfile
from nicdiag.simulator.telemetry import DEFAULT_INTERVAL, TelemetryBundle, generate_baseline
from nicdiag.telemetry.io import load_logs, load_metrics, load_topology, write_logs, write_metrics, write_topology
from nicdiag.telemetry.model import Topology, derive_nic_pairs
from nicdiag.telemetry.windows import DEFAULT_WINDOW_LENGTH

CORPUS_FORMAT = "nicdiag-corpus"
CORPUS_VERSION = 1
DEFAULT_EPOCH = 1_700_000_000
ONSET_MINUTES = (10, 40)
DURATION_SHARE = (0.6, 1.0)
INTENSITY_RANGE = (5.0, 20.0)
LABEL_COLUMNS = ["sample_id", "pair_id", "label", "failure_type"]


@dataclass(frozen=True)
class _Task:
    index: int
    profile: WorkloadProfile
    label: StateLabel
    ordinal: int
    seed: int


@dataclass(frozen=True, eq=False)
class Corpus:
    topology: Topology
    samples: tuple[LabeledSample, ...]

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self, sample_id: str) -> LabeledSample:
        for s in self.samples:
            if s.sample_id == sample_id:
                return s
        raise KeyError(sample_id)


def _sample_id(profile: str, label: StateLabel, ordinal: int) -> str:
    tag = "normal" if label is StateLabel.NORMAL else label.text
    return f"{profile}-{tag}-{ordinal:04d}"


def _make_sample(
    task: _Task,
    topology: Topology,
    window_length: int,
    interval: int,
    job_size: int | None,
    epoch: int,
) -> LabeledSample:
    rng = np.random.default_rng(task.seed)
    horizon = 2 * window_length
    start = epoch + task.index * horizon
    bundle: TelemetryBundle = generate_baseline(
        topology, task.profile, horizon, int(rng.integers(2**31)), start=start, interval=interval,
        window_length=window_length,
    )
    sample_id = _sample_id(task.profile.name, task.label, task.ordinal)
    if task.label is StateLabel.NORMAL:
        return normal_sample(bundle, sample_id, task.profile.name, window_length)

    n_pairs = len(topology)
    culprit = int(rng.integers(n_pairs))
    window_start = bundle.end - window_length
    lo, hi = ONSET_MINUTES
    onset = window_start + interval * int(rng.integers(lo * 60 // interval, hi * 60 // interval + 1))
    remaining = bundle.end - onset
    duration = interval * max(1, int(round(rng.uniform(*DURATION_SHARE) * remaining / interval)))
    duration = min(duration, remaining)
    if job_size is None or job_size >= n_pairs:
        job = None
    else:
        others = [p for p in range(n_pairs) if p != culprit]
        picked = rng.choice(others, size=max(0, job_size - 1), replace=False)
        job = tuple(sorted([culprit, *(int(p) for p in picked)]))
    spec = InjectionSpec(
        failure_type=task.label,
        culprit_pair=culprit,
        onset=onset,
        duration=duration,
        intensity=float(rng.uniform(*INTENSITY_RANGE)),
        job_pairs=job,
    )
    return inject_failure(bundle, spec, int(rng.integers(2**31)), sample_id, task.profile.name, window_length)


def generate_corpus(
    topology: Topology,
    profiles: Sequence[WorkloadProfile],
    counts: Mapping[StateLabel, int],
    seed: int,
    window_length: int = DEFAULT_WINDOW_LENGTH,
    interval: int = DEFAULT_INTERVAL,
    job_size: int | None = None,
    n_jobs: int = 1,
    epoch: int = DEFAULT_EPOCH,
    log_fn: Callable[[str], None] | None = None,
) -> list[LabeledSample]:
    """
    Samples per profile for every failure type in `counts` (StateLabel.NORMAL gives the
    failure-free ones). Each sample draws from its own SeedSequence child, so the corpus
    is identical for any `n_jobs`.
    """
    log = log_fn or (lambda _msg: None)
    if any(c < 0 for c in counts.values()):
        raise TelemetryValidationError("sample counts must be non-negative")
    tasks: list[_Task] = []
    for p_index, profile in enumerate(profiles):
        for label in (*FAILURE_TYPES, StateLabel.NORMAL):
            if label in profile.excluded_failures:
                continue
            for ordinal in range(int(counts.get(label, 0))):
                entropy = np.random.SeedSequence([seed, p_index, int(label), ordinal])
                tasks.append(_Task(len(tasks), profile, label, ordinal, int(entropy.generate_state(1)[0])))
    if not tasks:
        return []
    samples = Parallel(n_jobs=n_jobs)(
        delayed(_make_sample)(task, topology, window_length, interval, job_size, epoch) for task in tasks
    )
    log(f"simulate: {len(samples)} samples over {len(topology)} NIC pairs")
    return list(samples)


def _spec_record(spec: InjectionSpec | None) -> dict | None:
    if spec is None:
        return None
    return {
        "failure_type": StateLabel(spec.failure_type).text,
        "culprit_pair": spec.culprit_pair,
        "onset": spec.onset,
        "duration": spec.duration,
        "intensity": spec.intensity,
        "job_pairs": list(spec.job_pairs) if spec.job_pairs is not None else None,
    }


def write_corpus(samples: Sequence[LabeledSample], topology: Topology, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_topology(topology, out_dir / "topology.json")
    manifest = {"format": CORPUS_FORMAT, "version": CORPUS_VERSION, "topology": "topology.json", "samples": []}
    label_rows = []
    for sample in samples:
        sample_dir = out_dir / "samples" / sample.sample_id
        write_metrics(sample.bundle.series.values(), sample_dir / "metrics.csv")
        write_logs(sample.bundle.logs, sample_dir / "logs.tsv")
        manifest["samples"].append(
            {
                "id": sample.sample_id,
                "profile": sample.profile,
                "window_start": sample.window_start,
                "window_length": sample.window_length,
                "interval": sample.bundle.interval,
                "effective": sample.effective,
                "injection": _spec_record(sample.spec),
            }
        )
        failure = "none" if sample.spec is None else StateLabel(sample.spec.failure_type).text
        for pid in sorted(sample.labels):
            label_rows.append([sample.sample_id, pid, sample.labels[pid].text, failure])
    pd.DataFrame(label_rows, columns=LABEL_COLUMNS).to_csv(out_dir / "labels.csv", index=False, lineterminator="\n")
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_dir


def read_corpus(corpus_dir: Path, sample_ids: Sequence[str] | None = None) -> Corpus:
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TelemetryParseError(manifest_path, exc.lineno, exc.msg) from exc
    if manifest.get("format") != CORPUS_FORMAT or manifest.get("version") != CORPUS_VERSION:
        raise TelemetryParseError(manifest_path, 1, f"not a {CORPUS_FORMAT} v{CORPUS_VERSION} manifest")
    topology = load_topology(corpus_dir / manifest.get("topology", "topology.json"))
    pair_ids = [p.id for p in derive_nic_pairs(topology)]

    labels_frame = pd.read_csv(corpus_dir / "labels.csv", dtype={"sample_id": str, "label": str})
    labels_by_sample: dict[str, dict[int, StateLabel]] = {}
    for row in labels_frame.itertuples(index=False):
        labels_by_sample.setdefault(row.sample_id, {})[int(row.pair_id)] = StateLabel.parse(row.label)

    wanted = set(sample_ids) if sample_ids is not None else None
    samples = []
    for entry in manifest["samples"]:
        sid = entry["id"]
        if wanted is not None and sid not in wanted:
            continue
        sample_dir = corpus_dir / "samples" / sid
        series = load_metrics(sample_dir / "metrics.csv", topology)
        logs = load_logs(sample_dir / "logs.tsv")
        bundle = TelemetryBundle(
            topology, series, tuple(logs), int(entry["window_start"]), int(entry["window_length"]),
            int(entry.get("interval", DEFAULT_INTERVAL)),
        )
        spec = None
        if entry.get("injection"):
            inj = entry["injection"]
            spec = InjectionSpec(
                failure_type=StateLabel.parse(inj["failure_type"]),
                culprit_pair=int(inj["culprit_pair"]),
                onset=int(inj["onset"]),
                duration=int(inj["duration"]),
                intensity=float(inj["intensity"]),
                job_pairs=tuple(inj["job_pairs"]) if inj.get("job_pairs") is not None else None,
            )
        labels = labels_by_sample.get(sid) or {pid: StateLabel.NORMAL for pid in pair_ids}
        samples.append(
            LabeledSample(
                sample_id=sid,
                profile=entry.get("profile", ""),
                bundle=bundle,
                labels=labels,
                window_start=int(entry["window_start"]),
                window_length=int(entry["window_length"]),
                spec=spec,
                effective=bool(entry.get("effective", True)),
            )
        )
    if wanted is not None:
        missing = sorted(wanted - {s.sample_id for s in samples})
        if missing:
            raise KeyError(f"samples not in corpus: {', '.join(missing)}")
    return Corpus(topology, tuple(samples))
