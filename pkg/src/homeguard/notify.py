"""Alert dispatch over pluggable channels with retries, dedup and receipts.

SMS/Call are spool-file adapters standing in for a GSM modem, Email is the
out-of-band spool used by the auth service, Webhook posts over HTTP and
Console logs. A real adapter can replace any sink behind the same contract.
"""

import itertools
import logging
import threading
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .clock import iso_utc
from .store import EntryKind, EventStore

logger = logging.getLogger(__name__)

MAX_BODY_CHARS = 480

# Process-unique sequence so concurrent dispatches never collide on a filename.
_spool_seq = itertools.count(1)
_spool_lock = threading.Lock()


class Channel(str, Enum):
    SMS = "SMS"
    CALL = "Call"
    EMAIL = "Email"
    WEBHOOK = "Webhook"
    CONSOLE = "Console"


class DeliveryStatus(str, Enum):
    DELIVERED = "Delivered"
    FAILED = "Failed"
    DEDUPLICATED = "Deduplicated"


@dataclass(frozen=True)
class AlertMessage:
    alert_id: int
    severity: str
    body: str
    channels: tuple[Channel, ...]
    created_at: int


@dataclass(frozen=True)
class DeliveryReceipt:
    alert_id: int
    channel: Channel
    status: DeliveryStatus
    attempts: int
    completed_at: int

    def to_payload(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "channel": self.channel.value,
            "status": self.status.value,
            "attempts": self.attempts,
            "completed_at": self.completed_at,
        }


class SpoolSink:
    """Writes one file per message: <epoch_ms>_<seq>.<channel>.msg"""

    def __init__(self, directory: str | Path, channel: Channel, clock):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.channel = channel
        self._clock = clock

    def deliver(self, body: str) -> str:
        with _spool_lock:
            seq = next(_spool_seq)
        name = f"{self._clock.now_ms()}_{seq:06d}.{self.channel.value.lower()}.msg"
        path = self.directory / name
        path.write_text(body, encoding="utf-8")
        return str(path)


class WebhookSink:
    def __init__(self, url: str, timeout: float = 5.0):
        self.url = url
        self.timeout = timeout

    def deliver(self, body: str) -> str:
        req = urllib.request.Request(
            self.url, data=body.encode("utf-8"), headers={"Content-Type": "text/plain"}
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            resp.read()
        return self.url


class ConsoleSink:
    def deliver(self, body: str) -> str:
        logger.info("alert: %s", body.replace("\n", " | "))
        return "console"


# Which channels each alert severity fans out to, unless overridden in config.
DEFAULT_CHANNEL_POLICY: dict[str, tuple[Channel, ...]] = {
    "Safety": (Channel.SMS, Channel.CALL),
    "Intrusion": (Channel.SMS,),
    "Network": (Channel.SMS, Channel.WEBHOOK),
}


def render_alert(decision, policy: dict[str, tuple[Channel, ...]] | None = None) -> AlertMessage:
    """Deterministic message for an alert decision.

    Body template: [<SEVERITY>] <cause summary> at <ISO-8601> (x<repeat_count>)
    """
    policy = policy or DEFAULT_CHANNEL_POLICY
    severity = decision.severity.value
    body = f"[{severity.upper()}] {decision.cause_summary()} at {iso_utc(decision.created_at)} (x{decision.repeat_count})"
    if len(body) > MAX_BODY_CHARS:
        body = body[: MAX_BODY_CHARS - 3] + "..."
    channels = policy.get(severity, (Channel.SMS,))
    return AlertMessage(
        alert_id=decision.alert_id,
        severity=severity,
        body=body,
        channels=tuple(channels),
        created_at=decision.created_at,
    )


class Notifier:
    def __init__(
        self,
        sinks: dict[Channel, object],
        store: EventStore,
        clock,
        recipient: str = "owner@example.test",
        max_retries: int = 3,
        backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0),
        dedup_window_ms: int = 60_000,
        policy: dict[str, tuple[Channel, ...]] | None = None,
    ):
        self.sinks = dict(sinks)
        self.store = store
        self.clock = clock
        self.recipient = recipient
        self.max_retries = max_retries
        self.backoff_s = tuple(backoff_s)
        self.dedup_window_ms = dedup_window_ms
        self.policy = policy or DEFAULT_CHANNEL_POLICY
        self._recent: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def render_alert(self, decision) -> AlertMessage:
        return render_alert(decision, self.policy)

    def notify(self, decision) -> list[DeliveryReceipt]:
        return self.dispatch(self.render_alert(decision))

    def dispatch(self, msg: AlertMessage) -> list[DeliveryReceipt]:
        """Attempt every requested channel independently; persist all receipts.

        Retries with 1/2/4 s backoff (simulated-clock aware). Messages whose
        (severity, body) matched a dispatch inside the dedup window short-circuit
        to Deduplicated without contacting any sink.
        """
        if not msg.channels:
            raise ValueError("message has no channels")
        if not msg.body:
            raise ValueError("message has an empty body")
        now = self.clock.now_ms()
        key = (msg.severity, msg.body)
        with self._lock:
            last = self._recent.get(key)
            dedup = last is not None and (now - last) < self.dedup_window_ms
            if not dedup:
                self._recent[key] = now

        receipts = []
        for channel in msg.channels:
            if dedup:
                receipts.append(
                    DeliveryReceipt(msg.alert_id, channel, DeliveryStatus.DEDUPLICATED, 0, now)
                )
                continue
            receipts.append(self._deliver_one(msg, channel))
        for r in receipts:
            self.store.append(EntryKind.RECEIPT, r.to_payload(), ts=r.completed_at)
        return receipts

    def _deliver_one(self, msg: AlertMessage, channel: Channel) -> DeliveryReceipt:
        sink = self.sinks.get(channel)
        if sink is None:
            logger.warning("no sink configured for channel %s", channel.value)
            return DeliveryReceipt(
                msg.alert_id, channel, DeliveryStatus.FAILED, 0, self.clock.now_ms()
            )
        body = f"TO: {self.recipient}\nSEVERITY: {msg.severity}\n\n{msg.body}\n"
        attempts = 0
        for attempt in range(1 + self.max_retries):
            attempts = attempt + 1
            try:
                sink.deliver(body)
                return DeliveryReceipt(
                    msg.alert_id, channel, DeliveryStatus.DELIVERED, attempts, self.clock.now_ms()
                )
            except Exception as exc:
                logger.warning(
                    "delivery attempt %d on %s failed: %s", attempts, channel.value, exc
                )
                if attempt < self.max_retries:
                    self.clock.sleep(self.backoff_s[min(attempt, len(self.backoff_s) - 1)])
        return DeliveryReceipt(
            msg.alert_id, channel, DeliveryStatus.FAILED, attempts, self.clock.now_ms()
        )
