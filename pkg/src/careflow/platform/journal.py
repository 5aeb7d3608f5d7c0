"""Append-only on-disk journal backing the data platform.

One JSON record per line, UTF-8.  The in-memory state is a pure fold over
the journal, so a process can be killed at any point and rebuilt by
replaying the file.  ``fsync`` per append is configurable; flushing is
always on so an orderly shutdown never loses records.
"""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterator


class Journal:
    def __init__(self, path: str | Path | None, fsync: bool = False):
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self._lock = threading.Lock()
        self._handle = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, "a", encoding="utf-8")

    def replay(self) -> Iterator[dict]:
        """Records already on disk, oldest first."""
        if self.path is None or not self.path.exists():
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def append(self, record: dict) -> None:
        if self._handle is None:
            return
        line = json.dumps(record, ensure_ascii=False, separators=(",", ":"))
        with self._lock:
            self._handle.write(line + "\n")
            self._handle.flush()
            if self.fsync:
                os.fsync(self._handle.fileno())

    def close(self) -> None:
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None
