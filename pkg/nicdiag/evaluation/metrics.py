from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from nicdiag.diagnosis.states import StateLabel

MAX_K = 5


class MatchMode(str, Enum):
    PAIR_ONLY = "pair-only"
    TYPE_ONLY = "type-only"
    PAIR_AND_TYPE = "pair-and-type"


@dataclass(frozen=True)
class TestCase:
    sample_id: str
    true_root: tuple[int, StateLabel]
    predicted: tuple[tuple[int, StateLabel], ...]
    seconds: float = 0.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "predicted", tuple((int(p), StateLabel(t)) for p, t in self.predicted))
        if len(set(self.predicted)) != len(self.predicted):
            raise ValueError(f"{self.sample_id}: predicted root causes must be unique")

    def hit(self, k: int, mode: MatchMode = MatchMode.PAIR_AND_TYPE) -> bool:
        pair, ftype = self.true_root
        top = self.predicted[:k]
        if mode is MatchMode.PAIR_ONLY:
            return any(p == pair for p, _ in top)
        if mode is MatchMode.TYPE_ONLY:
            return any(t == ftype for _, t in top)
        return (pair, ftype) in top

    def rank(self, mode: MatchMode = MatchMode.PAIR_AND_TYPE) -> int | None:
        for k in range(1, len(self.predicted) + 1):
            if self.hit(k, mode):
                return k
        return None


def _check(cases: Sequence[TestCase], k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if not cases:
        raise ValueError("cannot score an empty set of test cases")


def ac_at_k(cases: Sequence[TestCase], k: int, mode: MatchMode = MatchMode.PAIR_AND_TYPE) -> float:
    """Share of cases whose true root cause is among the first k predictions."""
    _check(cases, k)
    return sum(1 for c in cases if c.hit(k, MatchMode(mode))) / len(cases)


def avg_at_k(cases: Sequence[TestCase], k: int, mode: MatchMode = MatchMode.PAIR_AND_TYPE) -> float:
    _check(cases, k)
    return float(np.mean([ac_at_k(cases, i, mode) for i in range(1, k + 1)]))


@dataclass(frozen=True)
class EvalReport:
    name: str
    ac: dict[int, float]
    avg: dict[int, float]
    per_type: dict[str, dict[int, float]] = field(default_factory=dict)
    n_cases: int = 0
    mean_seconds: float = 0.0
    mode: MatchMode = MatchMode.PAIR_AND_TYPE


def build_report(
    name: str, cases: Sequence[TestCase], mode: MatchMode = MatchMode.PAIR_AND_TYPE, max_k: int = MAX_K
) -> EvalReport:
    mode = MatchMode(mode)
    ks = range(1, max_k + 1)
    per_type: dict[str, dict[int, float]] = {}
    for ftype in sorted({c.true_root[1] for c in cases}):
        subset = [c for c in cases if c.true_root[1] == ftype]
        per_type[StateLabel(ftype).text] = {k: ac_at_k(subset, k, mode) for k in ks}
    return EvalReport(
        name=name,
        ac={k: ac_at_k(cases, k, mode) for k in ks},
        avg={k: avg_at_k(cases, k, mode) for k in ks},
        per_type=per_type,
        n_cases=len(cases),
        mean_seconds=float(np.mean([c.seconds for c in cases])),
        mode=mode,
    )


def report_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        row: dict[str, object] = {"method": r.name, "mode": r.mode.value}
        row.update({f"AC@{k}": round(v, 4) for k, v in sorted(r.ac.items())})
        row.update({f"Avg@{k}": round(v, 4) for k, v in sorted(r.avg.items())})
        row["cases"] = r.n_cases
        row["time_s"] = round(r.mean_seconds, 4)
        rows.append(row)
    return pd.DataFrame(rows)


def per_type_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        for ftype, ac in r.per_type.items():
            row: dict[str, object] = {"method": r.name, "failure_type": ftype}
            row.update({f"AC@{k}": round(v, 4) for k, v in sorted(ac.items())})
            rows.append(row)
    return pd.DataFrame(rows)


def format_reports(reports: Sequence[EvalReport]) -> str:
    """Plain-text summary: one row per method with AC@1..5, Avg@5 and mean diagnosis time."""
    if not reports:
        return "(no reports)"
    frame = report_frame(reports)
    cols = ["method", *[f"AC@{k}" for k in range(1, MAX_K + 1)], f"Avg@{MAX_K}", "time_s", "cases"]
    cols = [c for c in cols if c in frame.columns]
    return frame[cols].to_string(index=False, float_format=lambda v: f"{v:.4f}")


def write_reports(reports: Sequence[EvalReport], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = out_dir / "report.csv"
    breakdown = out_dir / "report_by_type.csv"
    report_frame(reports).to_csv(summary, index=False, lineterminator="\n")
    per_type_frame(reports).to_csv(breakdown, index=False, lineterminator="\n")
    text = out_dir / "report.txt"
    text.write_text(format_reports(reports) + "\n", encoding="utf-8")
    return [summary, breakdown, text]
