from __future__ import annotations

import argparse
import sys
import threading
from pathlib import Path

from nicdiag.config import PipelineConfig, load_config
from nicdiag.diagnosis.result import format_result, write_result_csv
from nicdiag.diagnosis.states import StateLabel
from nicdiag.errors import NicDiagError, TelemetryValidationError
from nicdiag.evaluation.metrics import format_reports, write_reports
from nicdiag.evaluation.protocols import PROTOCOLS, load_protocol_config, run_protocol
from nicdiag.logging_utils import DebugSink
from nicdiag.pipeline import VARIANTS, DiagnosisPipeline, load_bundle, save_bundle
from nicdiag.simulator.cluster import generate_cluster
from nicdiag.simulator.corpus import generate_corpus, read_corpus, write_corpus
from nicdiag.simulator.injection import count_by_type
from nicdiag.simulator.profiles import DATASET_COUNTS, PROFILES, counts_from_preset, get_profile
from nicdiag.telemetry.io import load_logs, load_metrics, load_topology
from nicdiag.telemetry.model import Window, derive_nic_pairs
from nicdiag.telemetry.windows import slice_windows

PROFILE_CHOICES = [*PROFILES, *(f"dataset-{name}" for name in DATASET_COUNTS)]


def make_sink(config: PipelineConfig, verbose: bool = False) -> DebugSink:
    return DebugSink(
        enabled=config.debug.enabled,
        log_path=Path(config.debug.log_path),
        buffer=[],
        lock=threading.Lock(),
        verbose=verbose or config.debug.verbose,
    )


def cmd_simulate(args: argparse.Namespace, config: PipelineConfig, sink: DebugSink) -> int:
    topology = generate_cluster(args.compute, args.switches)
    names = args.profile or ["wrf"]
    presets = [n for n in names if n.startswith("dataset-")]
    if presets and len(names) > 1:
        raise TelemetryValidationError("a dataset preset cannot be combined with other profiles", names)
    if presets:
        profile, counts, normal = counts_from_preset(presets[0])
        profiles = [profile]
        counts = {**counts, StateLabel.NORMAL: normal}
    else:
        profiles = [get_profile(n) for n in names]
        counts = {ftype: args.failures_per_type for ftype in StateLabel if ftype.is_failure}
        counts[StateLabel.NORMAL] = args.normals
    samples = generate_corpus(
        topology,
        profiles,
        counts,
        args.seed,
        window_length=config.window.length,
        interval=config.window.sample_interval,
        job_size=args.job_size,
        n_jobs=args.n_jobs,
        log_fn=sink.info,
    )
    out = write_corpus(samples, topology, args.out)
    by_type = ", ".join(f"{k}={v}" for k, v in sorted(count_by_type(samples).items()))
    print(f"Wrote {len(samples)} samples over {len(topology)} NIC pairs to {out}")
    print(f"  {by_type}")
    return 0


def cmd_train(args: argparse.Namespace, config: PipelineConfig, sink: DebugSink) -> int:
    corpus = read_corpus(args.corpus)
    pipeline = DiagnosisPipeline(config, sink)
    bundle = pipeline.train(corpus.samples, args.variant)
    out = save_bundle(bundle, args.out)
    print(f"Trained {bundle.variant} bundle on {bundle.meta.get('samples')} samples -> {out}")
    print(f"  feature slots: {bundle.schema.dimension} ({len(bundle.schema.clusters)} log clusters)")
    print(f"  normal library: {len(bundle.library)} vectors")
    print(f"  forest OOB accuracy: {bundle.forest.oob_accuracy:.4f}")
    if bundle.pattern_model is not None:
        print(f"  pattern held-out accuracy: {bundle.pattern_model.holdout_accuracy:.4f}")
    return 0


def _raw_window(args: argparse.Namespace, config: PipelineConfig) -> tuple[Window, list]:
    if not (args.topology and args.metrics):
        raise TelemetryValidationError("diagnose needs --corpus with --sample, or --topology with --metrics")
    topology = load_topology(args.topology)
    series = load_metrics(args.metrics, topology)
    logs = load_logs(args.logs) if args.logs else []
    if not series and not logs:
        raise TelemetryValidationError("no telemetry to diagnose", [str(args.metrics)])
    length = config.window.length
    start = args.window_start
    if start is None:
        # last full window ending one interval after the newest sample
        newest = max((int(s.timestamps[-1]) for s in series.values() if len(s)), default=0)
        start = newest + config.window.sample_interval - length
    pairs = derive_nic_pairs(topology)
    return slice_windows(series, logs, pairs, start, length, Path(args.metrics).stem), pairs


def cmd_diagnose(args: argparse.Namespace, config: PipelineConfig, sink: DebugSink) -> int:
    bundle = load_bundle(args.bundle)
    pipeline = DiagnosisPipeline(config, sink)
    if args.extra_normals:
        extra = read_corpus(args.extra_normals)
        bundle = pipeline.extend_library(bundle, [s for s in extra.samples if s.is_normal])
    if args.corpus:
        if not args.sample:
            raise TelemetryValidationError("--corpus needs --sample")
        corpus = read_corpus(args.corpus, [args.sample])
        sample = corpus.samples[0]
        window, pairs = sample.window(), sample.pairs
    else:
        window, pairs = _raw_window(args, config)
    result = pipeline.diagnose_window(bundle, window)
    print(format_result(result, pairs, config.walk.low_mass_threshold))
    if args.out:
        out = Path(args.out) / "diagnosis.csv"
        write_result_csv(result, pairs, out)
        print(f"Wrote {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace, config: PipelineConfig, sink: DebugSink) -> int:
    protocol = load_protocol_config(args.protocol_config)
    if args.seed is not None:
        protocol.seed = args.seed
    if args.compute is not None:
        protocol.compute = args.compute
    if args.n_jobs is not None:
        protocol.n_jobs = args.n_jobs
    reports = run_protocol(args.protocol, protocol, config, sink)
    print(f"Protocol {args.protocol}:")
    print(format_reports(list(reports.values())))
    if args.out:
        for path in write_reports(list(reports.values()), Path(args.out)):
            print(f"Wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nicdiag", description="NIC-pair failure diagnosis for HPC clusters.")
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--verbose", action="store_true", help="echo progress lines to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a labeled synthetic corpus")
    sim.add_argument("--compute", type=int, default=4)
    sim.add_argument("--switches", type=int, default=1)
    sim.add_argument("--seed", type=int, default=7)
    sim.add_argument("--profile", action="append", choices=PROFILE_CHOICES)
    sim.add_argument("--failures-per-type", type=int, default=10)
    sim.add_argument("--normals", type=int, default=10)
    sim.add_argument("--job-size", type=int, default=None)
    sim.add_argument("--n-jobs", type=int, default=1)
    sim.add_argument("--out", type=Path, default=Path("corpus"))
    sim.set_defaults(func=cmd_simulate)

    train = sub.add_parser("train", help="train a model bundle from a corpus")
    train.add_argument("--corpus", type=Path, required=True)
    train.add_argument("--variant", choices=VARIANTS, default="full")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", type=Path, default=Path("bundle"))
    train.set_defaults(func=cmd_train)

    diag = sub.add_parser("diagnose", help="rank root causes for one window")
    diag.add_argument("--bundle", type=Path, required=True)
    diag.add_argument("--corpus", type=Path, default=None)
    diag.add_argument("--sample", default=None)
    diag.add_argument("--topology", type=Path, default=None)
    diag.add_argument("--metrics", type=Path, default=None)
    diag.add_argument("--logs", type=Path, default=None)
    diag.add_argument("--window-start", type=int, default=None)
    diag.add_argument("--extra-normals", type=Path, default=None, help="corpus whose normal samples extend the library")
    diag.add_argument("--seed", type=int, default=None)
    diag.add_argument("--out", type=Path, default=None)
    diag.set_defaults(func=cmd_diagnose)

    ev = sub.add_parser("evaluate", help="run an experimental protocol")
    ev.add_argument("--protocol", choices=PROTOCOLS, required=True)
    ev.add_argument("--protocol-config", type=Path, default=None)
    ev.add_argument("--seed", type=int, default=None)
    ev.add_argument("--compute", type=int, default=None)
    ev.add_argument("--n-jobs", type=int, default=None)
    ev.add_argument("--out", type=Path, default=None)
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None and args.command in ("train", "diagnose"):
        config.seed = args.seed
    sink = make_sink(config, args.verbose)
    try:
        return args.func(args, config, sink)
    except (NicDiagError, ValueError, KeyError, FileNotFoundError) as e:
        sink.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        sink.exception(f"{args.command} failed")
        raise


if __name__ == "__main__":
    sys.exit(main())
