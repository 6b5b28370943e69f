from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from nicdiag.errors import ModelConfigurationError, TrainingError

RESAMPLE_LENGTH = 64
MAGIC = "NICDIAG-PATTERN"
FORMAT_VERSION = 1
MIN_EXAMPLES_PER_CLASS = 10


class PatternClass(IntEnum):
    FLAT = 0
    STEADY_RISE = 1
    STEADY_FALL = 2
    SINGLE_SPIKE = 3
    MULTI_PEAK = 4
    LEVEL_SHIFT_UP = 5
    LEVEL_SHIFT_DOWN = 6
    SHARP_DECLINE = 7

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def from_label(cls, label: str) -> "PatternClass":
        return cls[label.upper().replace("-", "_")]


N_PATTERNS = len(PatternClass)


def normalize_slice(diffs: Sequence[float] | np.ndarray, length: int = RESAMPLE_LENGTH) -> np.ndarray:
    """Linear resample to `length` points, then z-normalize. Constant or empty input gives zeros."""
    x = np.asarray(diffs, dtype=np.float64)
    if x.size < 2:
        return np.zeros(length, dtype=np.float64)
    grid = np.linspace(0.0, x.size - 1, length)
    resampled = np.interp(grid, np.arange(x.size, dtype=np.float64), x)
    std = resampled.std()
    if not np.isfinite(std) or std == 0.0 or np.ptp(x) == 0:
        return np.zeros(length, dtype=np.float64)
    return (resampled - resampled.mean()) / std


class _PatternNet(nn.Module):
    """Max pooling runs over non-overlapping windows of `pool` positions, not the whole slice."""

    def __init__(self, length: int, kernels: int, width: int, pool: int, n_classes: int):
        super().__init__()
        self.conv = nn.Conv1d(1, kernels, width, padding=width // 2)
        self.pool = nn.MaxPool1d(pool)
        self.dense = nn.Linear(kernels * (length // pool), n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.conv(x.unsqueeze(1)))
        h = self.pool(h).flatten(1)
        return self.dense(h)


@dataclass(eq=False)
class PatternModel:
    """Conv1d -> ReLU -> windowed max pooling -> dense -> softmax over the eight pattern classes."""

    conv_kernels: np.ndarray
    conv_bias: np.ndarray
    dense_weights: np.ndarray
    dense_bias: np.ndarray
    length: int = RESAMPLE_LENGTH
    pool: int = 8
    training_meta: dict[str, str] = field(default_factory=dict)
    _net: _PatternNet | None = field(default=None, repr=False)

    @property
    def kernels(self) -> int:
        return int(self.conv_kernels.shape[0])

    @property
    def kernel_width(self) -> int:
        return int(self.conv_kernels.shape[-1])

    @property
    def holdout_accuracy(self) -> float:
        return float(self.training_meta.get("holdout_accuracy", "nan"))

    def _module(self) -> _PatternNet:
        if self._net is None:
            net = _PatternNet(self.length, self.kernels, self.kernel_width, self.pool, N_PATTERNS).double()
            with torch.no_grad():
                net.conv.weight.copy_(torch.from_numpy(self.conv_kernels.reshape(self.kernels, 1, -1)))
                net.conv.bias.copy_(torch.from_numpy(self.conv_bias))
                net.dense.weight.copy_(torch.from_numpy(self.dense_weights))
                net.dense.bias.copy_(torch.from_numpy(self.dense_bias))
            net.eval()
            self._net = net
        return self._net

    def scores_normalized(self, batch: np.ndarray) -> np.ndarray:
        """Softmax scores for already-normalized slices, shape (n, length) -> (n, 8)."""
        batch = np.asarray(batch, dtype=np.float64).reshape(-1, self.length)
        out = np.zeros((batch.shape[0], N_PATTERNS), dtype=np.float64)
        if batch.shape[0] == 0:
            return out
        zero = ~batch.any(axis=1)
        out[zero, PatternClass.FLAT] = 1.0
        live = np.flatnonzero(~zero)
        if live.size:
            with torch.no_grad():
                logits = self._module()(torch.from_numpy(batch[live]))
                out[live] = torch.softmax(logits, dim=1).numpy()
        return out

    def scores(self, slices: Sequence[Sequence[float]]) -> np.ndarray:
        if len(slices) == 0:
            return np.zeros((0, N_PATTERNS), dtype=np.float64)
        return self.scores_normalized(np.stack([normalize_slice(s, self.length) for s in slices]))


def classify_pattern(model: PatternModel, slice_: Sequence[float]) -> PatternClass:
    return classify_patterns(model, [slice_])[0]


def classify_patterns(model: PatternModel, slices: Sequence[Sequence[float]]) -> list[PatternClass]:
    # np.argmax returns the first maximum, i.e. the lowest code on ties.
    return [PatternClass(int(i)) for i in np.argmax(model.scores(slices), axis=1)] if len(slices) else []


def _stratified_split(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    train_idx: list[int] = []
    hold_idx: list[int] = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        n_hold = int(round(members.size * fraction))
        hold_idx.extend(members[:n_hold].tolist())
        train_idx.extend(members[n_hold:].tolist())
    return np.array(sorted(train_idx), dtype=np.int64), np.array(sorted(hold_idx), dtype=np.int64)


def train_pattern_model(
    labeled_slices: Sequence[tuple[Sequence[float], PatternClass]],
    seed: int,
    length: int = RESAMPLE_LENGTH,
    kernels: int = 8,
    kernel_width: int = 5,
    pool: int = 8,
    epochs: int = 40,
    batch_size: int = 64,
    learning_rate: float = 0.01,
    holdout_fraction: float = 0.2,
    log_fn: Callable[[str], None] | None = None,
) -> PatternModel:
    log = log_fn or (lambda _msg: None)
    labels = np.array([int(c) for _, c in labeled_slices], dtype=np.int64)
    present, counts = np.unique(labels, return_counts=True)
    if present.size < 2:
        only = PatternClass(int(present[0])).label if present.size else "none"
        raise TrainingError(f"pattern training needs at least 2 classes; got only {only}")
    for cls, count in zip(present, counts):
        if count < MIN_EXAMPLES_PER_CLASS:
            raise TrainingError(
                f"pattern class {PatternClass(int(cls)).label} has {count} examples; "
                f"need at least {MIN_EXAMPLES_PER_CLASS}"
            )

    x_all = np.stack([normalize_slice(s, length) for s, _ in labeled_slices])
    rng = np.random.default_rng(seed)
    train_idx, hold_idx = _stratified_split(labels, holdout_fraction, rng)

    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)
    net = _PatternNet(length, kernels, kernel_width, pool, N_PATTERNS).double()
    optimizer = torch.optim.Adam(net.parameters(), lr=learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    x_train = torch.from_numpy(x_all[train_idx])
    y_train = torch.from_numpy(labels[train_idx])

    net.train()
    for epoch in range(epochs):
        order = torch.randperm(x_train.shape[0], generator=generator)
        total = 0.0
        for start in range(0, order.numel(), batch_size):
            idx = order[start : start + batch_size]
            optimizer.zero_grad()
            loss = loss_fn(net(x_train[idx]), y_train[idx])
            loss.backward()
            optimizer.step()
            total += float(loss) * idx.numel()
        if epoch == epochs - 1 or epoch % 10 == 0:
            log(f"pattern: epoch {epoch + 1}/{epochs} loss={total / max(1, order.numel()):.4f}")
    net.eval()

    model = PatternModel(
        conv_kernels=net.conv.weight.detach().numpy().reshape(kernels, kernel_width).copy(),
        conv_bias=net.conv.bias.detach().numpy().copy(),
        dense_weights=net.dense.weight.detach().numpy().copy(),
        dense_bias=net.dense.bias.detach().numpy().copy(),
        length=length,
        pool=pool,
    )
    if hold_idx.size:
        predicted = np.argmax(model.scores_normalized(x_all[hold_idx]), axis=1)
        accuracy = float(np.mean(predicted == labels[hold_idx]))
    else:
        accuracy = float("nan")
    model.training_meta = {
        "seed": str(seed),
        "epochs": str(epochs),
        "learning_rate": repr(float(learning_rate)),
        "batch_size": str(batch_size),
        "train_examples": str(int(train_idx.size)),
        "holdout_examples": str(int(hold_idx.size)),
        "holdout_accuracy": repr(accuracy),
    }
    log(f"pattern: held-out accuracy {accuracy:.4f} on {hold_idx.size} slices")
    return model


def _floats(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def save_pattern_model(model: PatternModel, path: Path) -> None:
    lines = [
        f"{MAGIC} v{FORMAT_VERSION}",
        f"dims length={model.length} kernels={model.kernels} width={model.kernel_width} "
        f"pool={model.pool} classes={N_PATTERNS}",
    ]
    lines += [f"meta {key}={model.training_meta[key]}" for key in sorted(model.training_meta)]
    lines += [
        f"conv_kernels {_floats(model.conv_kernels)}",
        f"conv_bias {_floats(model.conv_bias)}",
        f"dense_weights {_floats(model.dense_weights)}",
        f"dense_bias {_floats(model.dense_bias)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pattern_model(path: Path) -> PatternModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"{MAGIC} v{FORMAT_VERSION}":
        raise ModelConfigurationError(f"{path}: not a {MAGIC} v{FORMAT_VERSION} file")
    dims = dict(item.split("=", 1) for item in lines[1].split()[1:])
    length, kernels, width, pool = (int(dims[k]) for k in ("length", "kernels", "width", "pool"))
    if int(dims["classes"]) != N_PATTERNS:
        raise ModelConfigurationError(f"{path}: expected {N_PATTERNS} pattern classes")
    meta: dict[str, str] = {}
    tensors: dict[str, np.ndarray] = {}
    for line in lines[2:]:
        head, _, rest = line.partition(" ")
        if head == "meta":
            key, _, value = rest.partition("=")
            meta[key] = value
        else:
            tensors[head] = np.array([float(v) for v in rest.split()], dtype=np.float64)
    n_pooled = kernels * (length // pool)
    try:
        return PatternModel(
            conv_kernels=tensors["conv_kernels"].reshape(kernels, width),
            conv_bias=tensors["conv_bias"].reshape(kernels),
            dense_weights=tensors["dense_weights"].reshape(N_PATTERNS, n_pooled),
            dense_bias=tensors["dense_bias"].reshape(N_PATTERNS),
            length=length,
            pool=pool,
            training_meta=meta,
        )
    except (KeyError, ValueError) as exc:
        raise ModelConfigurationError(f"{path}: malformed pattern model ({exc})") from exc
