"""Simulated sensor fleet: fire, gas, two motion sensors and a snapshot camera.

A sensor reading is a unitless magnitude; readings at or above the sensor's
configured threshold count as detections. Camera detections store a snapshot
artifact and carry its reference. Scenario scripts replay scripted readings
deterministically under a simulated clock.
"""

import struct
import threading
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .errors import (
    DuplicateSensorId,
    InvalidScript,
    NonMonotonicTime,
    UnknownKind,
    UnknownSensor,
)
from .store import EventStore

DEFAULT_THRESHOLD = 1.0


class SensorKind(str, Enum):
    FIRE = "Fire"
    GAS = "Gas"
    MOTION = "Motion"
    CAMERA = "Camera"


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: str
    kind: SensorKind
    threshold: float = DEFAULT_THRESHOLD


# The stock five-sensor installation: fire, gas, two motion sensors, camera.
DEFAULT_FLEET = (
    SensorSpec("fire1", SensorKind.FIRE),
    SensorSpec("gas1", SensorKind.GAS),
    SensorSpec("motion1", SensorKind.MOTION),
    SensorSpec("motion2", SensorKind.MOTION),
    SensorSpec("cam1", SensorKind.CAMERA),
)


@dataclass(frozen=True)
class SensorEvent:
    sensor_id: str
    kind: SensorKind
    magnitude: float
    timestamp: int  # ms since scenario epoch
    snapshot_ref: str | None = None

    def to_payload(self) -> dict:
        p = {
            "sensor_id": self.sensor_id,
            "kind": self.kind.value,
            "magnitude": self.magnitude,
            "timestamp": self.timestamp,
        }
        if self.snapshot_ref is not None:
            p["snapshot_ref"] = self.snapshot_ref
        return p


class Sensor:
    """Handle for one simulated sensor; enforces per-sensor time monotonicity."""

    def __init__(self, spec: SensorSpec):
        self.spec = spec
        self.last_ts: int | None = None

    @property
    def sensor_id(self) -> str:
        return self.spec.sensor_id

    @property
    def kind(self) -> SensorKind:
        return self.spec.kind

    @property
    def threshold(self) -> float:
        return self.spec.threshold


def snapshot_png(label: str) -> bytes:
    """A minimal valid 1x1 grayscale PNG with the label in a tEXt chunk.

    Deterministic for a given label, so snapshot artifacts are reproducible.
    """

    def chunk(tag: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data))

    ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 0, 0, 0, 0)
    idat = zlib.compress(b"\x00\x80")
    text = b"Comment\x00" + label.encode("utf-8")
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"tEXt", text) + chunk(b"IDAT", idat) + chunk(b"IEND", b"")


class Fleet:
    """All sensors of one installation, merged into a single ordered event stream."""

    def __init__(self, specs: Iterable[SensorSpec], store: EventStore):
        self._sensors: dict[str, Sensor] = {}
        self._store = store
        self._lock = threading.Lock()
        for spec in specs:
            if not isinstance(spec.kind, SensorKind):
                raise UnknownKind(f"{spec.kind!r} is not a sensor kind")
            if spec.sensor_id in self._sensors:
                raise DuplicateSensorId(spec.sensor_id)
            self._sensors[spec.sensor_id] = Sensor(spec)

    @property
    def handles(self) -> list[Sensor]:
        return list(self._sensors.values())

    @property
    def specs(self) -> dict[str, SensorSpec]:
        return {sid: s.spec for sid, s in self._sensors.items()}

    def thresholds(self) -> dict[str, float]:
        return {sid: s.threshold for sid, s in self._sensors.items()}

    def sensor(self, sensor_id: str) -> Sensor:
        try:
            return self._sensors[sensor_id]
        except KeyError:
            raise UnknownSensor(sensor_id) from None

    def trigger(self, sensor_id: str, magnitude: float, at_ms: int) -> SensorEvent:
        """Produce one reading; camera detections also store a snapshot artifact."""
        sensor = self.sensor(sensor_id)
        if magnitude < 0:
            raise ValueError("magnitude must be >= 0")
        if at_ms < 0:
            raise NonMonotonicTime(f"{sensor_id}: negative timestamp {at_ms}")
        with self._lock:
            if sensor.last_ts is not None and at_ms < sensor.last_ts:
                raise NonMonotonicTime(
                    f"{sensor_id}: {at_ms} is earlier than last event at {sensor.last_ts}"
                )
            ref = None
            if sensor.kind is SensorKind.CAMERA and magnitude >= sensor.threshold:
                ref = self._store.put_snapshot(snapshot_png(f"{sensor_id}@{at_ms}"))
            sensor.last_ts = at_ms
        return SensorEvent(sensor_id, sensor.kind, float(magnitude), int(at_ms), ref)

    def run_scenario(self, script: "ScenarioScript", clock=None) -> Iterator[SensorEvent]:
        """Replay a script in at_ms order.

        With a simulated clock the run is deterministic: the clock is advanced
        to each entry's time before the event is emitted. With a wall clock the
        entries are paced in real time relative to the start of the run.
        """
        script.validate(set(self._sensors))
        start_wall = None
        for at_ms, sensor_id, magnitude in script.entries:
            if clock is not None:
                if hasattr(clock, "advance_to_ms"):
                    clock.advance_to_ms(at_ms)
                else:
                    if start_wall is None:
                        start_wall = clock.now_ms()
                    wait = (start_wall + at_ms) - clock.now_ms()
                    if wait > 0:
                        clock.sleep(wait / 1000)
            yield self.trigger(sensor_id, magnitude, at_ms)


def build_fleet(specs: Iterable[SensorSpec], store: EventStore) -> Fleet:
    """Build the fleet from a config; ids must be unique, kinds known."""
    return Fleet(specs, store)


@dataclass
class ScenarioScript:
    """Ordered (at_ms, sensor_id, magnitude) entries plus total duration."""

    entries: list[tuple[int, str, float]] = field(default_factory=list)
    duration_ms: int = 0

    def validate(self, known_ids: set[str] | None = None) -> None:
        prev = -1
        for i, (at_ms, sensor_id, magnitude) in enumerate(self.entries):
            if at_ms < prev:
                raise InvalidScript(f"entry {i}: at_ms {at_ms} out of order")
            if at_ms > self.duration_ms:
                raise InvalidScript(f"entry {i}: at_ms {at_ms} beyond duration {self.duration_ms}")
            if magnitude < 0:
                raise InvalidScript(f"entry {i}: negative magnitude")
            if known_ids is not None and sensor_id not in known_ids:
                raise InvalidScript(f"entry {i}: undeclared sensor {sensor_id!r}")
            prev = at_ms

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[int, str, float]], duration_ms: int | None = None) -> "ScenarioScript":
        entries = [(int(a), s, float(m)) for a, s, m in rows]
        if duration_ms is None:
            duration_ms = max((a for a, _, _ in entries), default=0)
        script = cls(entries=entries, duration_ms=duration_ms)
        script.validate()
        return script

    @classmethod
    def from_csv(cls, path) -> "ScenarioScript":
        """Parse the `at_ms,sensor_id,magnitude` CSV script format."""
        import csv

        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["at_ms", "sensor_id", "magnitude"]:
                raise InvalidScript(f"bad script header {header!r}, want at_ms,sensor_id,magnitude")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 3:
                    raise InvalidScript(f"line {lineno}: expected 3 fields, got {len(row)}")
                try:
                    rows.append((int(row[0]), row[1].strip(), float(row[2])))
                except ValueError as exc:
                    raise InvalidScript(f"line {lineno}: {exc}") from exc
        return cls.from_rows(rows)
