"""Flow-based network intrusion detection.

Packet summaries are assembled into bidirectional flows (idle/active
timeouts), per-flow statistics and per-window cross-flow aggregates feed a
deterministic rule cascade that labels each flow Normal or as one of five
attack categories; a replay harness scores labeled flow datasets.
"""

from .detect import Category, DetectorConfig, Verdict, classify
from .engine import NidsEngine
from .evaluate import EvaluationReport, FlowRow, read_flow_csv, replay_dataset, write_flow_csv
from .features import FeatureVector, extract_features
from .flows import FlowKey, FlowRecord, FlowState, FlowTable
from .packets import PacketSummary, Proto, read_packet_csv, write_packet_csv
from .windows import WindowStats, aggregate_packets, window_stats_from_rows

__all__ = [
    "Category",
    "DetectorConfig",
    "EvaluationReport",
    "FeatureVector",
    "FlowKey",
    "FlowRecord",
    "FlowRow",
    "FlowState",
    "FlowTable",
    "NidsEngine",
    "PacketSummary",
    "Proto",
    "Verdict",
    "WindowStats",
    "aggregate_packets",
    "classify",
    "extract_features",
    "read_flow_csv",
    "read_packet_csv",
    "replay_dataset",
    "window_stats_from_rows",
    "write_flow_csv",
    "write_packet_csv",
]
