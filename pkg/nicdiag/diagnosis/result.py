from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from nicdiag.diagnosis.states import LOCALIZATION, StateLabel
from nicdiag.telemetry.model import NicPair

REPORT_COLUMNS = ["rank", "pair_id", "compute_node", "switch_port", "failure_type", "locate", "visits", "probability"]


@dataclass(frozen=True)
class RankedCause:
    pair: int
    failure_type: StateLabel
    visits: int = 0
    probability: float = 0.0


@dataclass(frozen=True, eq=False)
class DiagnosisResult:
    ranked: tuple[RankedCause, ...]
    visit_counts: tuple[np.ndarray, ...] = ()
    max_culprit_mass: float = 0.0
    ranker: str = ""
    meta: dict[str, str] = field(default_factory=dict)

    @property
    def candidates(self) -> list[tuple[int, StateLabel]]:
        return [(c.pair, c.failure_type) for c in self.ranked]

    def low_mass(self, threshold: float) -> bool:
        return self.max_culprit_mass < threshold


def result_table(result: DiagnosisResult, pairs: Sequence[NicPair]) -> pd.DataFrame:
    by_id = {p.id: p for p in pairs}
    rows = []
    for rank, cause in enumerate(result.ranked, start=1):
        pair = by_id.get(cause.pair)
        rows.append(
            {
                "rank": rank,
                "pair_id": cause.pair,
                "compute_node": f"{pair.compute_node}/{pair.compute_nic}" if pair else "",
                "switch_port": f"{pair.switch}/{pair.switch_port}" if pair else "",
                "failure_type": cause.failure_type.text,
                "locate": LOCALIZATION.get(cause.failure_type, ""),
                "visits": cause.visits,
                "probability": round(float(cause.probability), 6),
            }
        )
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def format_result(result: DiagnosisResult, pairs: Sequence[NicPair], low_mass_threshold: float = 0.5) -> str:
    lines = []
    if result.low_mass(low_mass_threshold):
        lines.append(
            f"No confident root cause: highest culprit mass {result.max_culprit_mass:.3f} "
            f"is below {low_mass_threshold:g}. Candidates for reference:"
        )
    table = result_table(result, pairs)
    lines.append(table.to_string(index=False) if len(table) else "(no candidates)")
    return "\n".join(lines)


def write_result_csv(result: DiagnosisResult, pairs: Sequence[NicPair], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    result_table(result, pairs).to_csv(path, index=False, lineterminator="\n")
