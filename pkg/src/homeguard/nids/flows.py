"""Bidirectional flow assembly with idle and active timeouts.

The initiator of a flow is the endpoint that sent the first packet observed
for the 5-tuple; both directions share one record. A flow splits when it has
been idle for idle_timeout or has lasted longer than active_timeout, in which
case the old record is emitted and a fresh one starts with the current packet.
Inter-arrival statistics are kept as running moments (count/mean/M2).
"""

import math
from dataclasses import dataclass, field
from enum import Enum

from .packets import (
    ACK,
    FIN,
    PSH,
    PacketSummary,
    Proto,
    RST,
    SYN,
    URG,
    is_anomalous_flags,
    packet_problems,
)

DEFAULT_IDLE_TIMEOUT_US = 15_000_000
DEFAULT_ACTIVE_TIMEOUT_US = 120_000_000

FLAG_NAMES = (("fin", FIN), ("syn", SYN), ("rst", RST), ("psh", PSH), ("ack", ACK), ("urg", URG))


class FlowState(str, Enum):
    ACTIVE = "Active"
    EXPIRED_IDLE = "ExpiredIdle"
    EXPIRED_ACTIVE = "ExpiredActive"


@dataclass(frozen=True)
class FlowKey:
    initiator_ip: str
    initiator_port: int
    responder_ip: str
    responder_port: int
    proto: Proto

    def as_tuple(self) -> tuple:
        return (self.initiator_ip, self.initiator_port, self.responder_ip, self.responder_port, self.proto.value)

    def to_payload(self) -> dict:
        return {
            "initiator_ip": self.initiator_ip,
            "initiator_port": self.initiator_port,
            "responder_ip": self.responder_ip,
            "responder_port": self.responder_port,
            "proto": self.proto.value,
        }


def norm_tuple(src_ip: str, src_port: int, dst_ip: str, dst_port: int, proto: Proto) -> tuple:
    """Direction-insensitive lookup key: both directions normalize identically."""
    a = (src_ip, src_port)
    b = (dst_ip, dst_port)
    return (min(a, b), max(a, b), proto.value)


@dataclass
class FlowRecord:
    key: FlowKey
    first_ts_us: int
    last_ts_us: int
    fwd_pkts: int = 0
    bwd_pkts: int = 0
    fwd_bytes: int = 0
    bwd_bytes: int = 0
    iat_count: int = 0
    iat_mean_us: float = 0.0
    iat_m2: float = 0.0
    flag_counts: dict = field(default_factory=dict)
    anomalous_pkts: int = 0
    state: FlowState = FlowState.ACTIVE

    @property
    def total_pkts(self) -> int:
        return self.fwd_pkts + self.bwd_pkts

    @property
    def total_bytes(self) -> int:
        return self.fwd_bytes + self.bwd_bytes

    def iat_variance_us2(self) -> float:
        if self.iat_count < 2:
            return 0.0
        return self.iat_m2 / self.iat_count  # population variance

    def iat_std_us(self) -> float:
        return math.sqrt(self.iat_variance_us2())

    def _add_iat(self, sample_us: float) -> None:
        # Welford running moments.
        self.iat_count += 1
        delta = sample_us - self.iat_mean_us
        self.iat_mean_us += delta / self.iat_count
        self.iat_m2 += delta * (sample_us - self.iat_mean_us)

    def add_packet(self, pkt: PacketSummary) -> None:
        forward = (pkt.src_ip, pkt.src_port) == (self.key.initiator_ip, self.key.initiator_port)
        if self.total_pkts > 0:
            # Out-of-order packets clamp the inter-arrival to 0; last_ts never regresses.
            self._add_iat(max(0, pkt.ts_us - self.last_ts_us))
        if forward:
            self.fwd_pkts += 1
            self.fwd_bytes += pkt.length
        else:
            self.bwd_pkts += 1
            self.bwd_bytes += pkt.length
        if pkt.ts_us > self.last_ts_us:
            self.last_ts_us = pkt.ts_us
        if pkt.proto is Proto.TCP:
            for name, bit in FLAG_NAMES:
                if pkt.tcp_flags & bit:
                    self.flag_counts[name] = self.flag_counts.get(name, 0) + 1
        from .packets import is_anomalous_flags

        if is_anomalous_flags(pkt.proto, pkt.tcp_flags):
            self.anomalous_pkts += 1

    def flag(self, name: str) -> int:
        return self.flag_counts.get(name, 0)


def _new_record(pkt: PacketSummary) -> FlowRecord:
    key = FlowKey(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.proto)
    rec = FlowRecord(key=key, first_ts_us=pkt.ts_us, last_ts_us=pkt.ts_us)
    rec.add_packet(pkt)
    return rec


class FlowTable:
    """Single-writer incremental flow table."""

    def __init__(
        self,
        idle_timeout_us: int = DEFAULT_IDLE_TIMEOUT_US,
        active_timeout_us: int = DEFAULT_ACTIVE_TIMEOUT_US,
    ):
        self.idle_timeout_us = idle_timeout_us
        self.active_timeout_us = active_timeout_us
        self._flows: dict[tuple, FlowRecord] = {}
        self.malformed_count = 0
        self.packets_ingested = 0

    def __len__(self) -> int:
        return len(self._flows)

    def canonical_key(self, pkt: PacketSummary) -> FlowKey:
        """The key the packet's flow uses: the live flow's key if one exists,
        otherwise a new key with this packet's source as initiator."""
        rec = self._flows.get(norm_tuple(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.proto))
        if rec is not None:
            return rec.key
        return FlowKey(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.proto)

    def update(self, pkt: PacketSummary) -> FlowRecord | None:
        """Fold one packet in; returns the prior record when a timeout split it."""
        problem = packet_problems(pkt)
        if problem is not None:
            self.malformed_count += 1
            return None
        self.packets_ingested += 1
        norm = norm_tuple(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.proto)
        rec = self._flows.get(norm)
        if rec is None:
            self._flows[norm] = _new_record(pkt)
            return None
        if pkt.ts_us - rec.last_ts_us >= self.idle_timeout_us:
            rec.state = FlowState.EXPIRED_IDLE
            self._flows[norm] = _new_record(pkt)
            return rec
        if pkt.ts_us - rec.first_ts_us > self.active_timeout_us:
            rec.state = FlowState.EXPIRED_ACTIVE
            self._flows[norm] = _new_record(pkt)
            return rec
        rec.add_packet(pkt)
        return None

    def flush_expired(self, now_us: float) -> list[FlowRecord]:
        """Remove and return flows idle >= idle_timeout at now_us.

        Pass math.inf at end of trace to drain everything exactly once.
        """
        out = []
        for norm, rec in list(self._flows.items()):
            if now_us - rec.last_ts_us >= self.idle_timeout_us:
                rec.state = FlowState.EXPIRED_IDLE
                out.append(rec)
                del self._flows[norm]
        out.sort(key=lambda r: (r.last_ts_us, r.key.as_tuple()))
        return out

    def drain(self) -> list[FlowRecord]:
        return self.flush_expired(math.inf)

    def active_flows(self) -> list[FlowRecord]:
        return list(self._flows.values())
