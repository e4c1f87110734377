"""Central event loop: consumes sensor events and NIDS detections, owns the
arm state and decides when the owner is alerted.

Rule table: fire/gas detections are life-safety and alert regardless of arm
state; motion/camera detections alert only while Armed; NIDS attack verdicts
alert as Network severity. Repeat detections from the same source inside the
cooldown window fold into the open alert instead of re-notifying.
"""

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

from .errors import InvalidToken, StoreUnavailable, Unauthorized
from .sensors import SensorEvent, SensorKind, SensorSpec
from .store import EntryKind, EventStore

logger = logging.getLogger(__name__)

DEFAULT_COOLDOWN_MS = 60_000

SAFETY_KINDS = (SensorKind.FIRE, SensorKind.GAS)


class ArmState(str, Enum):
    ARMED = "Armed"
    DISARMED = "Disarmed"


class Severity(str, Enum):
    SAFETY = "Safety"
    INTRUSION = "Intrusion"
    NETWORK = "Network"


@dataclass
class AlertDecision:
    alert_id: int
    causes: list  # SensorEvent or nids Verdict, never empty
    severity: Severity
    created_at: int
    repeat_count: int = 1
    last_cause_at: int = 0

    def cause_summary(self) -> str:
        cause = self.causes[0]
        if isinstance(cause, SensorEvent):
            return f"{cause.sensor_id} detection (magnitude {cause.magnitude})"
        key = cause.flow_key
        return (
            f"{cause.category.value} on {key.responder_ip}:{key.responder_port} "
            f"from {key.initiator_ip} (score {cause.score:.2f})"
        )

    def to_payload(self) -> dict:
        causes = []
        for c in self.causes:
            causes.append(c.to_payload())
        return {
            "alert_id": self.alert_id,
            "severity": self.severity.value,
            "created_at": self.created_at,
            "repeat_count": self.repeat_count,
            "summary": self.cause_summary(),
            "causes": causes,
        }


class Controller:
    """All mutations funnel through one lock, so API handlers may call in
    concurrently; status reads see a consistent snapshot."""

    def __init__(
        self,
        store: EventStore,
        notifier,
        clock,
        sensor_specs: Mapping[str, SensorSpec] | None = None,
        cooldown_ms: int = DEFAULT_COOLDOWN_MS,
        validate_token: Callable[[str], str] | None = None,
    ):
        self.store = store
        self.notifier = notifier
        self.clock = clock
        self.sensor_specs = dict(sensor_specs or {})
        self.cooldown_ms = cooldown_ms
        self._validate_token = validate_token
        self._lock = threading.RLock()
        self._arm = ArmState.DISARMED
        self._next_alert_id = 1
        self._open: dict[tuple, AlertDecision] = {}
        self._last_event: dict[str, SensorEvent] = {}
        self._recent_detections: list[dict] = []

    # -- helpers --

    def _append(self, kind: EntryKind, payload: dict, ts: int) -> int:
        try:
            return self.store.append(kind, payload, ts)
        except StoreUnavailable:
            raise
        except Exception as exc:
            raise StoreUnavailable(str(exc)) from exc

    def _threshold(self, sensor_id: str) -> float:
        spec = self.sensor_specs.get(sensor_id)
        return spec.threshold if spec else 1.0

    def _open_alert_for(self, key: tuple, at_ms: int) -> AlertDecision | None:
        alert = self._open.get(key)
        if alert is None:
            return None
        if at_ms - alert.last_cause_at >= self.cooldown_ms:
            del self._open[key]
            return None
        return alert

    def _new_alert(self, causes: list, severity: Severity, at_ms: int, key: tuple) -> AlertDecision:
        decision = AlertDecision(
            alert_id=self._next_alert_id,
            causes=causes,
            severity=severity,
            created_at=at_ms,
            repeat_count=1,
            last_cause_at=at_ms,
        )
        self._next_alert_id += 1
        self._open[key] = decision
        self._append(EntryKind.ALERT, decision.to_payload(), ts=at_ms)
        return decision

    # -- operations --

    def ingest_event(self, event: SensorEvent) -> list[AlertDecision]:
        """Persist the event, then alert per the rule table.

        Sub-threshold readings are history only. Repeats inside the cooldown
        window bump repeat_count on the open alert and do not re-notify.
        """
        dispatch = None
        with self._lock:
            self._append(EntryKind.SENSOR_EVENT, event.to_payload(), ts=event.timestamp)
            self._last_event[event.sensor_id] = event
            if event.magnitude < self._threshold(event.sensor_id):
                return []
            if event.kind in SAFETY_KINDS:
                severity = Severity.SAFETY
            elif self._arm is ArmState.ARMED:
                severity = Severity.INTRUSION
            else:
                return []  # motion/camera while disarmed: logged, never alerts
            key = ("sensor", event.sensor_id)
            open_alert = self._open_alert_for(key, event.timestamp)
            if open_alert is not None:
                open_alert.repeat_count += 1
                open_alert.causes.append(event)
                open_alert.last_cause_at = event.timestamp
                self._append(EntryKind.ALERT, open_alert.to_payload(), ts=event.timestamp)
                return [open_alert]
            decision = self._new_alert([event], severity, event.timestamp, key)
            dispatch = decision
        if dispatch is not None:
            self.notifier.notify(dispatch)
        return [dispatch]

    def ingest_detection(self, detection) -> AlertDecision:
        """Raise a Network alert for an attack verdict from the NIDS."""
        if detection.verdict != "Attack":
            raise ValueError("only attack verdicts may be ingested")
        now = self.clock.now_ms()
        dispatch = None
        with self._lock:
            payload = detection.to_payload()
            self._append(EntryKind.DETECTION, payload, ts=now)
            self._recent_detections.append(payload)
            del self._recent_detections[:-10]
            key = ("flow",) + detection.flow_key.as_tuple()
            open_alert = self._open_alert_for(key, now)
            if open_alert is not None:
                open_alert.repeat_count += 1
                open_alert.causes.append(detection)
                open_alert.last_cause_at = now
                self._append(EntryKind.ALERT, open_alert.to_payload(), ts=now)
                return open_alert
            decision = self._new_alert([detection], Severity.NETWORK, now, key)
            dispatch = decision
        if dispatch is not None:
            self.notifier.notify(dispatch)
        return dispatch

    def set_arm(self, state: ArmState, token: str) -> dict:
        """Arm or disarm; requires a valid session token. Idempotent: arming an
        armed system records a no-op transition."""
        if self._validate_token is None:
            raise Unauthorized("no token validator configured")
        try:
            actor = self._validate_token(token)
        except InvalidToken as exc:
            raise Unauthorized("invalid session token") from exc
        state = ArmState(state)
        now = self.clock.now_ms()
        with self._lock:
            record = {
                "actor": actor,
                "old_state": self._arm.value,
                "new_state": state.value,
                "at_ms": now,
            }
            self._arm = state
            self._append(EntryKind.ARM_TRANSITION, record, ts=now)
            return record

    @property
    def arm_state(self) -> ArmState:
        with self._lock:
            return self._arm

    def snapshot_status(self) -> dict:
        """Read-only consistent snapshot: arm state, per-sensor last reading,
        open alerts and the last 10 attack detections."""
        now = self.clock.now_ms()
        with self._lock:
            sensors = {}
            for sid, spec in self.sensor_specs.items():
                last = self._last_event.get(sid)
                sensors[sid] = {
                    "kind": spec.kind.value,
                    "threshold": spec.threshold,
                    "last_event": last.to_payload() if last else None,
                }
            open_alerts = [
                a.to_payload()
                for a in sorted(self._open.values(), key=lambda a: a.alert_id)
                if now - a.last_cause_at < self.cooldown_ms
            ]
            return {
                "arm_state": self._arm.value,
                "sensors": sensors,
                "open_alerts": open_alerts,
                "recent_detections": list(self._recent_detections),
            }
