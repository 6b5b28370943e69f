from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


@dataclass
class WindowConfig:
    length: int = 3600
    sample_interval: int = 60


@dataclass
class PatternConfig:
    resample_length: int = 64
    kernels: int = 8
    kernel_width: int = 5
    pool_width: int = 8
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 0.01
    examples_per_class: int = 200
    holdout_fraction: float = 0.2


@dataclass
class LogConfig:
    depth: int = 4
    sim_threshold: float = 0.4
    max_children: int = 100
    distance_threshold: float = 0.5


@dataclass
class ForestConfig:
    n_trees: int = 100
    min_leaf: int = 2
    n_jobs: int = 1


@dataclass
class WalkSettings:
    num_results: int = 5
    steps_per_node: int = 100
    low_mass_threshold: float = 0.5


@dataclass
class DebugConfig:
    enabled: bool = False
    log_path: str = "nicdiag-debug.log"
    verbose: bool = False


@dataclass
class PipelineConfig:
    seed: int = 7
    window: WindowConfig = field(default_factory=WindowConfig)
    pattern: PatternConfig = field(default_factory=PatternConfig)
    logs: LogConfig = field(default_factory=LogConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    walk: WalkSettings = field(default_factory=WalkSettings)
    debug: DebugConfig = field(default_factory=DebugConfig)


_SECTIONS = ("window", "pattern", "logs", "forest", "walk", "debug")


def get_config_path() -> Path:
    """Get configuration file path respecting NICDIAG_CONFIG and XDG_CONFIG_HOME."""
    explicit = os.environ.get("NICDIAG_CONFIG")
    if explicit:
        return Path(explicit)
    xdg_config = os.environ.get("XDG_CONFIG_HOME")
    if xdg_config:
        base = Path(xdg_config)
    else:
        base = Path.home() / ".config"
    return base / "nicdiag" / "config.json"


def merge_section(section: object, raw: object) -> None:
    if not isinstance(raw, dict):
        return
    known = {f.name: f for f in fields(section)}
    for key, value in raw.items():
        if key not in known:
            continue
        current = getattr(section, key)
        # Keep the declared type; JSON gives ints where floats are expected and vice versa.
        if isinstance(current, bool):
            setattr(section, key, bool(value))
        elif isinstance(current, int):
            setattr(section, key, int(value))
        elif isinstance(current, float):
            setattr(section, key, float(value))
        else:
            setattr(section, key, value)


def config_from_dict(data: dict) -> PipelineConfig:
    config = PipelineConfig()
    if "seed" in data:
        config.seed = int(data["seed"])
    for name in _SECTIONS:
        if name in data:
            merge_section(getattr(config, name), data[name])
    return config


def _apply_env(config: PipelineConfig) -> None:
    seed = os.environ.get("NICDIAG_SEED")
    if seed:
        try:
            config.seed = int(seed)
        except ValueError:
            print(f"Warning: ignoring non-integer NICDIAG_SEED={seed!r}", file=sys.stderr)
    debug = os.environ.get("NICDIAG_DEBUG")
    if debug:
        config.debug.enabled = debug.strip().lower() in ("1", "true", "yes", "on")
    window = os.environ.get("NICDIAG_WINDOW_LENGTH")
    if window:
        try:
            config.window.length = int(window)
        except ValueError:
            print(f"Warning: ignoring non-integer NICDIAG_WINDOW_LENGTH={window!r}", file=sys.stderr)


def load_config(path: Path | None = None) -> PipelineConfig:
    """
    Load configuration with layered priority:
    1. Built-in defaults
    2. Config file values (explicit path, NICDIAG_CONFIG, or the XDG location)
    3. Environment variables
    """
    config_path = path or get_config_path()
    config = PipelineConfig()

    if config_path.exists():
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
            if isinstance(data, dict):
                config = config_from_dict(data)
        except Exception as e:
            print(f"Warning: Could not load config file {config_path}: {e}", file=sys.stderr)
    elif path is not None:
        print(f"Warning: config file {config_path} not found; using defaults", file=sys.stderr)

    _apply_env(config)
    return config


def save_config(config: PipelineConfig, path: Path) -> bool:
    """
    Save configuration to JSON file.

    Returns:
        True if save succeeded, False otherwise
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)

        # Atomic write: write to temp file then rename
        temp_path = path.with_suffix(".tmp")
        with open(temp_path, "w", encoding="utf-8") as f:
            json.dump(asdict(config), f, indent=2, sort_keys=True)
        temp_path.replace(path)

        return True
    except (OSError, IOError, PermissionError) as e:
        print(f"Error saving config: {e}", file=sys.stderr)
        return False
