from __future__ import annotations

from abc import ABC, abstractmethod

from nicdiag.diagnosis.result import DiagnosisResult
from nicdiag.diagnosis.states import StateProbabilityMatrix


class Ranker(ABC):
    """Turns per-pair state probabilities into an ordered list of (pair, failure type)."""

    name: str = ""

    @abstractmethod
    def rank(self, states: StateProbabilityMatrix) -> DiagnosisResult:
        ...
