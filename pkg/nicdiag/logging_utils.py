from __future__ import annotations

import sys
import threading
import time
import traceback
from pathlib import Path
from typing import List


class DebugSink:
    """
    Collects pipeline progress lines in memory and optionally mirrors them to a file and stderr.
    """

    def __init__(
        self,
        enabled: bool,
        log_path: Path,
        buffer: List[str],
        lock: threading.Lock,
        verbose: bool = False,
    ):
        self.enabled = enabled
        self.log_path = log_path
        self.buffer = buffer
        self.lock = lock
        self.verbose = verbose
        if self.enabled:
            try:
                self.log_path.parent.mkdir(parents=True, exist_ok=True)
            except Exception:
                pass

    @classmethod
    def null(cls) -> "DebugSink":
        return cls(enabled=False, log_path=Path("nicdiag-debug.log"), buffer=[], lock=threading.Lock())

    def _timestamp(self) -> str:
        return time.strftime("%H:%M:%S")

    def _append(self, msg: str):
        line = f"[{self._timestamp()}] {msg}"
        with self.lock:
            self.buffer.append(line)
        if self.verbose:
            print(line, file=sys.stderr)

    def _write_file(self, text: str):
        if not self.enabled:
            return
        try:
            with self.log_path.open("a", encoding="utf-8") as f:
                f.write(text + "\n")
        except Exception:
            # Never let a log write take the pipeline down.
            pass

    def info(self, msg: str):
        self._append(msg)
        self._write_file(f"[{self._timestamp()}] {msg}")

    def warning(self, msg: str):
        self._append(f"WARNING: {msg}")
        self._write_file(f"[{self._timestamp()}] WARNING: {msg}")
        if not self.verbose:
            print(f"warning: {msg}", file=sys.stderr)

    def error(self, msg: str):
        hint = f"{msg} (details: {self.log_path})" if self.enabled else msg
        self._append(f"ERROR: {hint}")
        self._write_file(f"[{self._timestamp()}] ERROR: {msg}")

    def exception(self, prefix: str):
        tb = traceback.format_exc().strip()
        self.error(prefix)
        if tb:
            self._write_file(f"[{self._timestamp()}] {prefix}\n{tb}\n")

    def snapshot(self, limit: int) -> list[str]:
        with self.lock:
            return list(self.buffer[-limit:])
