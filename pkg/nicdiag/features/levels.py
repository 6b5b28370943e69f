from __future__ import annotations

from enum import IntEnum
from typing import Callable, Hashable, Mapping, TypeVar

import numpy as np

K = TypeVar("K", bound=Hashable)

MIN_DEVICES = 4
WHISKER = 1.5


class LevelSymbol(IntEnum):
    VL = 0
    L = 1
    M = 2
    H = 3
    VH = 4


def level_symbols(
    metric: str,
    per_device_means: Mapping[K, float],
    log_fn: Callable[[str], None] | None = None,
) -> dict[K, LevelSymbol]:
    """Box-plot level of each device's window mean relative to its peers."""
    if len(per_device_means) < MIN_DEVICES:
        return {device: LevelSymbol.M for device in per_device_means}
    values = np.array([float(v) for v in per_device_means.values()], dtype=np.float64)
    q1, q3 = np.percentile(values, [25.0, 75.0], method="linear")
    iqr = q3 - q1
    low, high = q1 - WHISKER * iqr, q3 + WHISKER * iqr

    symbols: dict[K, LevelSymbol] = {}
    for device, raw in per_device_means.items():
        x = float(raw)
        if x < low:
            symbols[device] = LevelSymbol.VL
        elif x < q1:
            symbols[device] = LevelSymbol.L
        elif x <= q3:
            symbols[device] = LevelSymbol.M
        elif x <= high:
            symbols[device] = LevelSymbol.H
        else:
            symbols[device] = LevelSymbol.VH
    if log_fn is not None:
        outliers = sum(1 for s in symbols.values() if s in (LevelSymbol.VL, LevelSymbol.VH))
        if outliers:
            log_fn(f"levels: {metric} q1={q1:g} q3={q3:g} outliers={outliers}")
    return symbols
