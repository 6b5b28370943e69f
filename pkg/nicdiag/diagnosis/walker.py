from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from nicdiag.diagnosis.base import Ranker
from nicdiag.diagnosis.result import DiagnosisResult, RankedCause
from nicdiag.diagnosis.states import FAILURE_TYPES, StateLabel, StateProbabilityMatrix
from nicdiag.errors import DiagnosisError

N_FAILURES = len(FAILURE_TYPES)


@dataclass(frozen=True)
class WalkConfig:
    num_results: int = 5
    steps_per_iteration: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_results < 1:
            raise DiagnosisError("num_results must be at least 1")
        if self.steps_per_iteration is not None and self.steps_per_iteration < 1:
            raise DiagnosisError("steps_per_iteration must be positive")

    def steps(self, n_pairs: int) -> int:
        return self.steps_per_iteration or 100 * n_pairs


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    pair_ids: tuple[int, ...]
    q: np.ndarray

    def __len__(self) -> int:
        return len(self.pair_ids)


def culprit_mass(row: Sequence[float] | np.ndarray) -> float:
    return float(np.sum(np.asarray(row, dtype=np.float64)[:N_FAILURES]))


def transition_rows(s: np.ndarray) -> np.ndarray:
    """
    Walk matrix over fully connected pairs. The self loop carries the pair's culprit
    mass; victim mass flows toward likely culprits, normal mass spreads evenly.
    """
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    if n == 0:
        raise DiagnosisError("transition matrix needs at least one NIC pair")
    if n == 1:
        return np.ones((1, 1), dtype=np.float64)
    pf = s[:, :N_FAILURES].sum(axis=1)
    victim = s[:, StateLabel.VICTIM]
    normal = s[:, StateLabel.NORMAL]
    q = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        others = np.delete(np.arange(n), i)
        neighbor_pf = pf[others]
        total = neighbor_pf.sum()
        if total > 0:
            q[i, others] = victim[i] * neighbor_pf / total
        else:
            q[i, others] = victim[i] / (n - 1)
        q[i, others] += normal[i] / (n - 1)
        q[i, i] = pf[i]
        row_sum = q[i].sum()
        if row_sum > 0:
            q[i] /= row_sum
        else:
            q[i, others] = 1.0 / (n - 1)
    return q


def build_transition_matrix(s: StateProbabilityMatrix) -> TransitionMatrix:
    return TransitionMatrix(s.pair_ids, transition_rows(s.rows))


def stationary_distribution(q: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Power iteration on the lazy chain (Q + I) / 2, which shares Q's stationary distribution."""
    q = np.asarray(q, dtype=np.float64)
    n = q.shape[0]
    lazy = 0.5 * (q + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    return pi


def walk_visits(q: np.ndarray, steps: int, start: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Take `steps` probability-weighted moves from `start`; returns (visit counts, final node)."""
    cumulative = np.cumsum(q, axis=1)
    counts = np.zeros(q.shape[0], dtype=np.int64)
    current = start
    for u in rng.random(steps):
        row = cumulative[current]
        current = min(int(np.searchsorted(row, u * row[-1], side="right")), q.shape[0] - 1)
        counts[current] += 1
    return counts, current


def transfer_to_victim(rows: np.ndarray, node: int, ftype: int) -> None:
    """Move a reported failure type's probability onto the pair's Victim entry, in place."""
    rows[node, StateLabel.VICTIM] += rows[node, ftype]
    rows[node, ftype] = 0.0


def random_walk(
    s: StateProbabilityMatrix,
    config: WalkConfig,
    log_fn: Callable[[str], None] | None = None,
) -> DiagnosisResult:
    log = log_fn or (lambda _msg: None)
    n = len(s)
    if n == 0:
        raise DiagnosisError("cannot walk over zero NIC pairs")
    rows = np.array(s.rows, dtype=np.float64)
    max_mass = float(rows[:, :N_FAILURES].sum(axis=1).max())
    rng = np.random.default_rng(config.seed)
    steps = config.steps(n)
    limit = min(config.num_results, N_FAILURES * n)

    reported: set[tuple[int, int]] = set()
    ranked: list[RankedCause] = []
    history: list[np.ndarray] = []
    current = int(rng.integers(n))
    q = transition_rows(rows)
    for iteration in range(limit):
        counts, current = walk_visits(q, steps, current, rng)
        history.append(counts)
        for node in sorted(range(n), key=lambda i: (-counts[i], i)):
            open_types = [t for t in range(N_FAILURES) if (node, t) not in reported]
            if open_types:
                break
        # np.argmax semantics: first (lowest-coded) type wins on equal probability
        ftype = max(open_types, key=lambda t: (rows[node, t], -t))
        reported.add((node, ftype))
        ranked.append(
            RankedCause(s.pair_ids[node], StateLabel(ftype), int(counts[node]), float(rows[node, ftype]))
        )
        transfer_to_victim(rows, node, ftype)
        q = transition_rows(rows)
        log(f"walk: iteration {iteration + 1} -> pair {s.pair_ids[node]} {StateLabel(ftype).text} ({counts[node]} visits)")
    return DiagnosisResult(
        ranked=tuple(ranked),
        visit_counts=tuple(history),
        max_culprit_mass=max_mass,
        ranker="random-walk",
    )


class RandomWalkRanker(Ranker):
    name = "random-walk"

    def __init__(self, config: WalkConfig, log_fn: Callable[[str], None] | None = None):
        self.config = config
        self.log = log_fn

    def rank(self, states: StateProbabilityMatrix) -> DiagnosisResult:
        return random_walk(states, self.config, self.log)


class CulpritMassRanker(Ranker):
    """Classifier-only ranking: pairs by culprit mass with their top failure type, then the rest."""

    name = "culprit-mass"

    def __init__(self, num_results: int = 5):
        self.num_results = num_results

    def rank(self, states: StateProbabilityMatrix) -> DiagnosisResult:
        n = len(states)
        if n == 0:
            raise DiagnosisError("cannot rank zero NIC pairs")
        rows = states.rows
        mass = rows[:, :N_FAILURES].sum(axis=1)
        order = sorted(range(n), key=lambda i: (-mass[i], states.pair_ids[i]))
        first: list[tuple[int, int]] = []
        for i in order:
            first.append((i, int(np.argmax(rows[i, :N_FAILURES]))))
        chosen = set(first)
        rest = sorted(
            ((i, t) for i in range(n) for t in range(N_FAILURES) if (i, t) not in chosen),
            key=lambda it: (-rows[it[0], it[1]], states.pair_ids[it[0]], it[1]),
        )
        limit = min(self.num_results, N_FAILURES * n)
        picked = (first + rest)[:limit]
        return DiagnosisResult(
            ranked=tuple(RankedCause(states.pair_ids[i], StateLabel(t), 0, float(rows[i, t])) for i, t in picked),
            max_culprit_mass=float(mass.max()),
            ranker=self.name,
        )
