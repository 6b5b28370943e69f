from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from nicdiag.errors import DiagnosisError

ROW_TOLERANCE = 1e-9


class StateLabel(IntEnum):
    F1 = 0
    F2 = 1
    F3 = 2
    F4 = 3
    F5 = 4
    F6 = 5
    F7 = 6
    VICTIM = 7
    NORMAL = 8

    @property
    def text(self) -> str:
        return self.name if self.is_failure else self.name.capitalize()

    @property
    def is_failure(self) -> bool:
        return self < StateLabel.VICTIM

    @classmethod
    def parse(cls, text: str) -> "StateLabel":
        return cls[text.strip().upper()]


N_STATES = len(StateLabel)
FAILURE_TYPES: tuple[StateLabel, ...] = tuple(s for s in StateLabel if s.is_failure)

FAILURE_NAMES = {
    StateLabel.F1: "wrong packet",
    StateLabel.F2: "pause storm on NIC",
    StateLabel.F3: "switch pause storm",
    StateLabel.F4: "tx timeout",
    StateLabel.F5: "PFC misconfiguration",
    StateLabel.F6: "switch port packet loss",
    StateLabel.F7: "NIC packet loss",
}

# Which device an operator acts on for each failure type.
LOCALIZATION = {
    StateLabel.F1: "compute node",
    StateLabel.F2: "compute node",
    StateLabel.F3: "switch port",
    StateLabel.F4: "compute node",
    StateLabel.F5: "compute node + switch port",
    StateLabel.F6: "switch port",
    StateLabel.F7: "compute node",
}


@dataclass(frozen=True, eq=False)
class StateProbabilityMatrix:
    """Per-pair probability rows over F1..F7, Victim, Normal."""

    pair_ids: tuple[int, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64).reshape(-1, N_STATES)
        ids = tuple(int(p) for p in self.pair_ids)
        if rows.shape[0] != len(ids):
            raise DiagnosisError(f"{rows.shape[0]} probability rows for {len(ids)} pairs")
        if np.any(rows < 0) or not np.all(np.isfinite(rows)):
            raise DiagnosisError("state probabilities must be finite and non-negative")
        sums = rows.sum(axis=1)
        bad = [str(p) for p, s in zip(ids, sums) if abs(s - 1.0) > ROW_TOLERANCE]
        if bad:
            raise DiagnosisError("state probability rows must sum to 1", bad)
        rows.setflags(write=False)
        object.__setattr__(self, "pair_ids", ids)
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.pair_ids)

    def row(self, pair_id: int) -> np.ndarray:
        return self.rows[self.pair_ids.index(pair_id)]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], pair_ids: Sequence[int] | None = None) -> "StateProbabilityMatrix":
        arr = np.asarray(rows, dtype=np.float64).reshape(-1, N_STATES)
        ids = tuple(range(arr.shape[0])) if pair_ids is None else tuple(pair_ids)
        return cls(ids, arr)
