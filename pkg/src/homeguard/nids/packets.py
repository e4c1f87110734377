"""Packet summaries: the NIDS input unit, parsed from 8-column CSV traces."""

import csv
import ipaddress
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import SchemaError

FIN = 0x01
SYN = 0x02
RST = 0x04
PSH = 0x08
ACK = 0x10
URG = 0x20

PACKET_CSV_HEADER = ["ts_us", "src_ip", "src_port", "dst_ip", "dst_port", "proto", "length", "tcp_flags"]


class Proto(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"


@dataclass(frozen=True)
class PacketSummary:
    ts_us: int
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    proto: Proto
    length: int
    tcp_flags: int = 0


def valid_ipv4(s: str) -> bool:
    try:
        ipaddress.IPv4Address(s)
        return True
    except (ipaddress.AddressValueError, ValueError):
        return False


def packet_problems(pkt: PacketSummary) -> str | None:
    """Reason the packet is malformed, or None if acceptable."""
    if pkt.length < 0:
        return "negative length"
    if not valid_ipv4(pkt.src_ip) or not valid_ipv4(pkt.dst_ip):
        return "invalid IPv4 address"
    if not (0 <= pkt.src_port <= 65535 and 0 <= pkt.dst_port <= 65535):
        return "port out of range"
    if not (0 <= pkt.tcp_flags <= 255):
        return "tcp_flags out of range"
    return None


def is_anomalous_flags(proto: Proto, tcp_flags: int) -> bool:
    """Scan-style flag combos: NULL (no flags), SYN+FIN, Xmas (FIN+PSH+URG)."""
    if proto is not Proto.TCP:
        return False
    if tcp_flags == 0:
        return True
    if tcp_flags & SYN and tcp_flags & FIN:
        return True
    if tcp_flags & FIN and tcp_flags & PSH and tcp_flags & URG:
        return True
    return False


def read_packet_csv(path: str | Path) -> Iterator[PacketSummary]:
    """Strict-header packet trace reader; malformed rows raise SchemaError.

    Field-level validity (bad IPs, negative lengths) is left to the flow
    table, which counts and skips malformed packets rather than aborting.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PACKET_CSV_HEADER:
            raise SchemaError(f"bad packet CSV header {header!r}", row=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(PACKET_CSV_HEADER):
                raise SchemaError("wrong field count", row=lineno)
            try:
                proto = Proto(row[5].strip())
            except ValueError:
                raise SchemaError(f"unknown proto {row[5]!r}", row=lineno, column="proto") from None
            try:
                yield PacketSummary(
                    ts_us=int(row[0]),
                    src_ip=row[1].strip(),
                    src_port=int(row[2]),
                    dst_ip=row[3].strip(),
                    dst_port=int(row[4]),
                    proto=proto,
                    length=int(row[6]),
                    tcp_flags=int(row[7]),
                )
            except ValueError as exc:
                raise SchemaError(str(exc), row=lineno) from exc


def write_packet_csv(path: str | Path, packets: Iterable[PacketSummary]) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PACKET_CSV_HEADER)
        for p in packets:
            writer.writerow(
                [p.ts_us, p.src_ip, p.src_port, p.dst_ip, p.dst_port, p.proto.value, p.length, p.tcp_flags]
            )
            n += 1
    return n
