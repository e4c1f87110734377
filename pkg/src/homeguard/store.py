"""Append-only persistence for events, alerts, detections, receipts and audit.

One JSON record per line in events.log:

    {"kind": "...", "payload": {...}, "seq": N, "ts": ...}

seq is store-assigned, strictly increasing and gapless within a log file;
it is the authoritative ordering (per-kind timestamps may interleave since
clock sources differ). Snapshot blobs live as individual files under
snapshots/ and are addressed as "snap/<n>".
"""

import errno
import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    InvalidFilter,
    SerializationError,
    StorageFull,
    StoreUnavailable,
    UnknownSnapshot,
)

logger = logging.getLogger(__name__)

DEFAULT_QUERY_LIMIT = 100
MAX_QUERY_LIMIT = 1000

_SNAPSHOT_REF = re.compile(r"^snap/(\d+)$")


class EntryKind(str, Enum):
    SENSOR_EVENT = "SensorEvent"
    ALERT = "Alert"
    DETECTION = "Detection"
    RECEIPT = "Receipt"
    AUTH_AUDIT = "AuthAudit"
    ARM_TRANSITION = "ArmTransition"


@dataclass(frozen=True)
class LogEntry:
    seq: int
    kind: EntryKind
    ts: int
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind.value, "ts": self.ts, "payload": self.payload}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)


class EventStore:
    """Single-writer JSON-lines log with concurrent readers and blob storage."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._snap_dir = self.root / "snapshots"
        self._snap_dir.mkdir(exist_ok=True)
        self._log_path = self.root / "events.log"
        self._lock = threading.RLock()
        self._entries: list[LogEntry] = []
        self._subscribers: list[Callable[[LogEntry], None]] = []
        self._closed = False
        self._load()
        self._fh = open(self._log_path, "a", encoding="utf-8")
        self._next_snap = self._scan_snapshot_seq()

    # -- lifecycle --

    def _load(self) -> None:
        if not self._log_path.exists():
            return
        raw = self._log_path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                # A torn final line means the process died mid-write before the
                # append was acknowledged; acknowledged entries always end in \n.
                if i == len(lines) - 1:
                    logger.warning("dropping torn trailing record in %s", self._log_path)
                    break
                raise
            self._entries.append(
                LogEntry(seq=rec["seq"], kind=EntryKind(rec["kind"]), ts=rec["ts"], payload=rec["payload"])
            )

    def _scan_snapshot_seq(self) -> int:
        highest = 0
        for p in self._snap_dir.glob("*.bin"):
            try:
                highest = max(highest, int(p.stem))
            except ValueError:
                continue
        return highest + 1

    def close(self) -> None:
        with self._lock:
            if not self._closed:
                self._fh.close()
                self._closed = True

    # -- append path --

    def append(self, kind: EntryKind | str, payload: dict, ts: int) -> int:
        """Durably append one record; returns the assigned seq.

        The entry is flushed and fsynced before this returns, so an
        acknowledged append survives a crash-and-reopen.
        """
        kind = EntryKind(kind)
        with self._lock:
            if self._closed:
                raise StoreUnavailable("store is closed")
            entry = LogEntry(seq=len(self._entries) + 1, kind=kind, ts=int(ts), payload=payload)
            try:
                line = entry.to_json()
            except (TypeError, ValueError) as exc:
                raise SerializationError(f"payload not serializable: {exc}") from exc
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                if exc.errno == errno.ENOSPC:
                    raise StorageFull(str(exc)) from exc
                raise StoreUnavailable(str(exc)) from exc
            self._entries.append(entry)
            subscribers = list(self._subscribers)
        for fn in subscribers:
            try:
                fn(entry)
            except Exception:  # a broken subscriber must never poison the log
                logger.exception("store subscriber failed")
        return entry.seq

    def subscribe(self, fn: Callable[[LogEntry], None]) -> None:
        """Register a callback invoked (outside the write lock) after each append."""
        with self._lock:
            self._subscribers.append(fn)

    # -- query path --

    def entry_count(self) -> int:
        with self._lock:
            return len(self._entries)

    def query(
        self,
        kind: EntryKind | str | None = None,
        time_range: tuple[int | None, int | None] | None = None,
        sensor_id: str | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[LogEntry]:
        """Entries matching all present filters, in seq order."""
        if kind is not None:
            try:
                kind = EntryKind(kind)
            except ValueError as exc:
                raise InvalidFilter(f"unknown kind {kind!r}") from exc
        lo = hi = None
        if time_range is not None:
            lo, hi = time_range
            if lo is not None and hi is not None and lo > hi:
                raise InvalidFilter("time_range lower bound exceeds upper bound")
        if limit is None:
            limit = DEFAULT_QUERY_LIMIT
        if limit <= 0:
            raise InvalidFilter("limit must be positive")
        limit = min(limit, MAX_QUERY_LIMIT)
        if offset < 0:
            raise InvalidFilter("offset must be non-negative")

        with self._lock:
            entries = list(self._entries)
        out = []
        skipped = 0
        for e in entries:
            if kind is not None and e.kind is not kind:
                continue
            if lo is not None and e.ts < lo:
                continue
            if hi is not None and e.ts > hi:
                continue
            if sensor_id is not None and e.payload.get("sensor_id") != sensor_id:
                continue
            if skipped < offset:
                skipped += 1
                continue
            out.append(e)
            if len(out) >= limit:
                break
        return out

    # -- snapshot blobs --

    def put_snapshot(self, data: bytes) -> str:
        if not data:
            raise ValueError("snapshot bytes must be non-empty")
        with self._lock:
            if self._closed:
                raise StoreUnavailable("store is closed")
            n = self._next_snap
            self._next_snap += 1
            path = self._snap_dir / f"{n}.bin"
            try:
                with open(path, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                if exc.errno == errno.ENOSPC:
                    raise StorageFull(str(exc)) from exc
                raise StoreUnavailable(str(exc)) from exc
            return f"snap/{n}"

    def get_snapshot(self, ref: str) -> bytes:
        m = _SNAPSHOT_REF.match(ref or "")
        if not m:
            raise UnknownSnapshot(f"bad snapshot ref {ref!r}")
        path = self._snap_dir / f"{m.group(1)}.bin"
        if not path.exists():
            raise UnknownSnapshot(ref)
        return path.read_bytes()

    def iter_entries(self) -> Iterable[LogEntry]:
        with self._lock:
            return iter(list(self._entries))
