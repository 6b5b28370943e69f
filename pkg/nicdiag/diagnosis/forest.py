from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from nicdiag.diagnosis.states import N_STATES, StateLabel, StateProbabilityMatrix
from nicdiag.errors import ModelConfigurationError, TrainingError
from nicdiag.features.fusion import AnomalyVector

MAGIC = "NICDIAG-FOREST"
FORMAT_VERSION = 1
SPLIT_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Preorder node arrays. feature == -1 marks a leaf; bit 0 goes left, bit 1 goes right."""

    feature: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            go_right = x[rows, np.where(active, feat, 0)] > SPLIT_THRESHOLD
            step = np.where(go_right, self.right[node], self.left[node])
            node = np.where(active, step, node)
        return self.value[node]


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[DecisionTree, ...]
    n_features: int
    seed: int
    oob_accuracy: float = float("nan")
    meta: dict[str, str] = field(default_factory=dict)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.n_features)
        total = np.zeros((x.shape[0], N_STATES), dtype=np.float64)
        for tree in self.trees:
            total += tree.predict_proba(x)
        total /= len(self.trees)
        return total / total.sum(axis=1, keepdims=True)


def _export_tree(estimator, classes: np.ndarray) -> DecisionTree:
    """Re-index a fitted sklearn tree in preorder with 9-state leaf distributions."""
    tree = estimator.tree_
    feature: list[int] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []

    def visit(node: int) -> int:
        idx = len(feature)
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(N_STATES, dtype=np.float64))
        child_left, child_right = tree.children_left[node], tree.children_right[node]
        if child_left == child_right:
            raw = np.asarray(tree.value[node][0], dtype=np.float64)
            dist = np.zeros(N_STATES, dtype=np.float64)
            dist[classes] = raw / raw.sum()
            value[idx] = dist
            return idx
        feature[idx] = int(tree.feature[node])
        left[idx] = visit(child_left)
        right[idx] = visit(child_right)
        return idx

    visit(0)
    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.vstack(value),
    )


def _stack(vectors: Sequence[AnomalyVector]) -> np.ndarray:
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise TrainingError(f"anomaly vectors disagree on dimension: {sorted(dims)}")
    return np.vstack([v.bits for v in vectors]).astype(np.float64)


def train_forest(
    samples: Sequence[tuple[AnomalyVector, StateLabel]],
    seed: int,
    n_trees: int = 100,
    min_leaf: int = 2,
    n_jobs: int = 1,
    log_fn: Callable[[str], None] | None = None,
) -> ForestModel:
    log = log_fn or (lambda _msg: None)
    if not samples:
        raise TrainingError("state classifier needs training samples")
    labels = np.array([int(label) for _, label in samples], dtype=np.int64)
    present = np.unique(labels)
    if present.size < 2:
        raise TrainingError(f"state classifier needs at least 2 classes; got only {StateLabel(int(present[0])).text}")
    x = _stack([v for v, _ in samples])

    estimator = RandomForestClassifier(
        n_estimators=n_trees,
        criterion="gini",
        max_features="sqrt",
        min_samples_leaf=min_leaf,
        bootstrap=True,
        oob_score=True,
        n_jobs=n_jobs,
        random_state=seed,
    )
    with warnings.catch_warnings():
        # tiny corpora leave some samples without out-of-bag votes
        warnings.simplefilter("ignore", category=UserWarning)
        warnings.simplefilter("ignore", category=RuntimeWarning)
        estimator.fit(x, labels)
    classes = np.asarray(estimator.classes_, dtype=np.int64)
    trees = tuple(_export_tree(est, classes) for est in estimator.estimators_)
    oob = float(getattr(estimator, "oob_score_", float("nan")))
    counts = {StateLabel(int(c)).text: int(np.sum(labels == c)) for c in present}
    log(f"forest: {n_trees} trees on {x.shape[0]}x{x.shape[1]} bits, oob accuracy {oob:.4f}, classes {counts}")
    return ForestModel(
        trees=trees,
        n_features=int(x.shape[1]),
        seed=seed,
        oob_accuracy=oob,
        meta={"samples": str(x.shape[0]), "min_leaf": str(min_leaf)},
    )


def predict_states(
    model: ForestModel, vectors: Mapping[int, AnomalyVector] | Sequence[AnomalyVector]
) -> StateProbabilityMatrix:
    items = sorted(vectors.values() if isinstance(vectors, Mapping) else vectors, key=lambda v: v.pair)
    if not items:
        return StateProbabilityMatrix((), np.zeros((0, N_STATES)))
    bad = sorted({len(v) for v in items} - {model.n_features})
    if bad:
        raise ModelConfigurationError(f"anomaly vectors have {bad} bits; forest was trained on {model.n_features}")
    x = np.vstack([v.bits for v in items]).astype(np.float64)
    return StateProbabilityMatrix(tuple(v.pair for v in items), model.predict_proba(x))


def save_forest(model: ForestModel, path: Path) -> None:
    lines = [
        f"{MAGIC} v{FORMAT_VERSION}",
        f"n_features {model.n_features}",
        f"n_states {N_STATES}",
        f"seed {model.seed}",
        f"oob_accuracy {model.oob_accuracy!r}",
    ]
    lines += [f"meta {key}={model.meta[key]}" for key in sorted(model.meta)]
    for index, tree in enumerate(model.trees):
        lines.append(f"tree {index} {tree.n_nodes}")

        def emit(node: int) -> None:
            if tree.feature[node] < 0:
                lines.append("leaf " + " ".join(repr(float(p)) for p in tree.value[node]))
                return
            lines.append(f"split {int(tree.feature[node])}")
            emit(int(tree.left[node]))
            emit(int(tree.right[node]))

        emit(0)
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_tree(lines: list[str], pos: int, n_nodes: int) -> tuple[DecisionTree, int]:
    feature: list[int] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []

    def read() -> int:
        nonlocal pos
        kind, _, rest = lines[pos].partition(" ")
        pos += 1
        idx = len(feature)
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(N_STATES, dtype=np.float64))
        if kind == "leaf":
            dist = np.array([float(v) for v in rest.split()], dtype=np.float64)
            if dist.size != N_STATES or dist.sum() <= 0:
                raise ModelConfigurationError(f"line {pos}: bad leaf distribution")
            value[idx] = dist
        elif kind == "split":
            feature[idx] = int(rest)
            left[idx] = read()
            right[idx] = read()
        else:
            raise ModelConfigurationError(f"line {pos}: expected split or leaf, got {kind!r}")
        return idx

    read()
    if len(feature) != n_nodes:
        raise ModelConfigurationError(f"tree declares {n_nodes} nodes but lists {len(feature)}")
    tree = DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.vstack(value),
    )
    return tree, pos


def load_forest(path: Path) -> ForestModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"{MAGIC} v{FORMAT_VERSION}":
        raise ModelConfigurationError(f"{path}: not a {MAGIC} v{FORMAT_VERSION} file")
    try:
        header = dict(line.split(" ", 1) for line in lines[1:5])
        if int(header["n_states"]) != N_STATES:
            raise ModelConfigurationError(f"{path}: expected {N_STATES} states")
        meta: dict[str, str] = {}
        trees: list[DecisionTree] = []
        pos = 5
        while lines[pos] != "end":
            head, _, rest = lines[pos].partition(" ")
            if head == "meta":
                key, _, value = rest.partition("=")
                meta[key] = value
                pos += 1
            elif head == "tree":
                tree, pos = _parse_tree(lines, pos + 1, int(rest.split()[1]))
                trees.append(tree)
            else:
                raise ModelConfigurationError(f"{path}:{pos + 1}: unexpected {head!r}")
        return ForestModel(
            trees=tuple(trees),
            n_features=int(header["n_features"]),
            seed=int(header["seed"]),
            oob_accuracy=float(header["oob_accuracy"]),
            meta=meta,
        )
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelConfigurationError(f"{path}: malformed forest ({exc})") from exc
