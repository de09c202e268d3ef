"""Recorded request/response replay.

A cassette is a JSONL file of {"endpoint", "request", "response"} entries.
Lookup is exact on the canonical JSON encoding of the request body, so a
replayed service answers precisely the traffic it was recorded for and
nothing else. Recording appends the same entry shape, which makes a recorded
session directly replayable.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path


def canonical(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


class CassetteStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[tuple[str, str], dict] = {}
        if not self.path.exists():
            raise FileNotFoundError(f"cassette file not found: {self.path}")
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                key = (entry["endpoint"], canonical(entry["request"]))
                self._entries[key] = entry["response"]

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, endpoint: str, request: dict) -> dict | None:
        return self._entries.get((endpoint, canonical(request)))


class CassetteRecorder:
    """Appends replayable entries; safe under concurrent requests."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def record(self, endpoint: str, request: dict, response: dict) -> None:
        entry = {"endpoint": endpoint, "request": request, "response": response}
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
