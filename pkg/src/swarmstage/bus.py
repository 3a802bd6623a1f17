"""Simulated single-topic pub/sub medium with latency, loss and accounting.

The bus is a logical event queue advanced by the simulation clock: a
publish schedules one delivery per current subscriber after a sampled
latency, unless the seeded loss draw discards it. Delivery order per
(sender, receiver) pair is preserved regardless of jitter. Every
transmitted packet lands in a byte-accurate log from which windowed
bandwidth profiles are derived.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import IdConflictError, InvalidInputError, SwarmStageError
from .wire import (
    HEADER_LEN,
    MAX_PAYLOAD,
    CommandKind,
    MsgType,
    NodeId,
    Role,
    TransferChunk,
    encode,
    peek_msg_type,
)

log = logging.getLogger(__name__)

GOSSIP_TOPIC = "swarm/gossip"


@dataclass(frozen=True)
class NetConfig:
    latency_mean_ms: float = 10.0
    latency_jitter_ms: float = 5.0
    loss_prob: float = 0.0
    seed: int = 0
    gossip_period_ms: float = 250.0
    transfer_rate_bps: float = 4e6  # bulk-upload pacing, bytes/s

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise InvalidInputError("loss_prob must be in [0, 1]")
        if self.gossip_period_ms <= 0 or self.transfer_rate_bps <= 0:
            raise InvalidInputError("periods and rates must be positive")


@dataclass(frozen=True)
class BandwidthSample:
    t: float                      # window start, s
    bytes_per_s: float
    gossip_bps: float
    command_bps: float
    transfer_bps: float
    by_role: dict[str, float]
    events: tuple[str, ...] = ()  # command kinds transmitted in the window


@dataclass
class Inbox:
    """Delivery stream handed to a subscriber."""

    node_id: int
    _items: list = field(default_factory=list)

    def drain(self) -> list[tuple[float, bytes]]:
        items, self._items = self._items, []
        return items


@dataclass(frozen=True)
class _TxRecord:
    t: float
    wire_bytes: int
    msg_type: MsgType
    sender_role: Role
    command_kind: Optional[CommandKind]


class GossipBus:
    """In-process deterministic broadcast medium for one session."""

    def __init__(self, config: NetConfig = NetConfig()):
        self.config = config
        self.now = 0.0
        self._rng = np.random.default_rng(config.seed)
        self._members: dict[int, NodeId] = {}
        self._subs: dict[str, dict[int, Inbox]] = {}
        self._heap: list = []
        self._heap_seq = 0
        self._pair_clock: dict[tuple[int, int], float] = {}
        self.tx_log: list[_TxRecord] = []
        self.events: list[tuple[float, str, str]] = []

    # -- membership -----------------------------------------------------

    def join(self, node: NodeId) -> None:
        if node.id in self._members:
            raise IdConflictError(f"node id {node.id} already joined")
        self._members[node.id] = node
        self.events.append((self.now, "join", f"node={node.id}"))

    def leave(self, node_id: int) -> None:
        if node_id not in self._members:
            raise InvalidInputError(f"node id {node_id} not on the bus")
        del self._members[node_id]
        for subs in self._subs.values():
            subs.pop(node_id, None)
        # Packets already sampled for delivery to the departed node are gone.
        self._heap = [e for e in self._heap if e[2] != node_id]
        heapq.heapify(self._heap)
        self.events.append((self.now, "leave", f"node={node_id}"))

    def members(self) -> list[NodeId]:
        return [self._members[i] for i in sorted(self._members)]

    def subscribe(self, node_id: int, topic: str = GOSSIP_TOPIC) -> Inbox:
        if node_id not in self._members:
            raise InvalidInputError(f"node {node_id} must join before subscribing")
        inbox = Inbox(node_id)
        self._subs.setdefault(topic, {})[node_id] = inbox
        return inbox

    # -- traffic ---------------------------------------------------------

    def _sample_latency(self) -> float:
        j = self.config.latency_jitter_ms
        ms = self.config.latency_mean_ms + (self._rng.uniform(-j, j) if j > 0 else 0.0)
        return max(0.0, ms) / 1000.0

    def _push(self, t: float, receiver: int, sender: int, data: bytes) -> None:
        self._heap_seq += 1
        heapq.heappush(self._heap, (t, self._heap_seq, receiver, sender, data))

    def _log_tx(self, t: float, data: bytes, sender: NodeId,
                command_kind: Optional[CommandKind]) -> None:
        self.tx_log.append(_TxRecord(t, len(data), peek_msg_type(data),
                                     sender.role, command_kind))
        # Marker pose updates are periodic telemetry, not cue events.
        if command_kind is not None and command_kind is not CommandKind.MARKER_POSE:
            self.events.append((t, "command", command_kind.name.lower()))

    def publish(self, sender_id: int, data: bytes, topic: str = GOSSIP_TOPIC,
                command_kind: Optional[CommandKind] = None) -> int:
        """Broadcast a packet to every subscriber except the sender.

        Returns the number of deliveries scheduled (post-loss). Publishing
        from a node that already left is a warned no-op.
        """
        sender = self._members.get(sender_id)
        if sender is None:
            log.warning("publish from non-member node %d dropped", sender_id)
            self.events.append((self.now, "warning",
                                f"publish_after_leave node={sender_id}"))
            return 0
        if len(data) > HEADER_LEN + MAX_PAYLOAD:
            raise InvalidInputError("packet exceeds wire budget")
        self._log_tx(self.now, data, sender, command_kind)
        scheduled = 0
        subs = self._subs.get(topic, {})
        for rid in sorted(subs):
            if rid == sender_id:
                continue
            if self.config.loss_prob > 0 and self._rng.random() < self.config.loss_prob:
                continue
            t = self.now + self._sample_latency()
            key = (sender_id, rid)
            t = max(t, self._pair_clock.get(key, 0.0))  # per-pair FIFO
            self._pair_clock[key] = t
            self._push(t, rid, sender_id, data)
            scheduled += 1
        return scheduled

    def unicast_at(self, t: float, sender_id: int, target_id: int, data: bytes) -> None:
        """Schedule a reliable point-to-point packet (bulk transfer lane)."""
        sender = self._members[sender_id]
        self._heap_seq += 1
        heapq.heappush(
            self._heap,
            (t, self._heap_seq, target_id, sender_id, data, "tx", sender),
        )

    def advance_to(self, t: float) -> None:
        """Deliver everything due up to and including time t."""
        if t < self.now:
            raise InvalidInputError("bus clock cannot run backwards")
        while self._heap and self._heap[0][0] <= t:
            entry = heapq.heappop(self._heap)
            when, _, receiver, sender_id = entry[0], entry[1], entry[2], entry[3]
            data = entry[4]
            if len(entry) > 5 and entry[5] == "tx":
                # Deferred transmission: log it now, then deliver after latency.
                self._log_tx(when, data, entry[6], None)
                if receiver in self._members:
                    self._push(when + self._sample_latency(), receiver, sender_id, data)
                continue
            for topic_subs in self._subs.values():
                inbox = topic_subs.get(receiver)
                if inbox is not None:
                    inbox._items.append((when, data))
        self.now = t

    # -- bulk transfers ----------------------------------------------------

    def launch_transfer(self, station_id: int, robot_id: int, blob_size: int) -> dict:
        """Stream a software/config blob to one robot in <=250 B chunks.

        Chunks are paced at the configured transfer rate and accounted in
        the bandwidth log, producing the characteristic launch spike.
        """
        station = self._members.get(station_id)
        if station is None or station.role is not Role.GROUND_STATION:
            raise InvalidInputError("transfers must come from a joined ground station")
        if robot_id not in self._members:
            raise SwarmStageError(f"unknown robot {robot_id}")
        if blob_size < 0:
            raise InvalidInputError("blob_size must be >= 0")

        n_chunks = math.ceil(blob_size / MAX_PAYLOAD) if blob_size else 0
        t = self.now
        remaining = blob_size
        for _ in range(n_chunks):
            size = min(MAX_PAYLOAD, remaining)
            remaining -= size
            chunk = TransferChunk(station, bytes(size))
            self.unicast_at(t, station_id, robot_id, encode(chunk))
            t += (HEADER_LEN + size) / self.config.transfer_rate_bps
        completion = {
            "station": station_id,
            "robot": robot_id,
            "bytes": blob_size,
            "packets": n_chunks,
            "t_start": self.now,
            "t_end": t,
        }
        self.events.append((t, "transfer_complete", f"robot={robot_id} bytes={blob_size}"))
        return completion

    # -- accounting --------------------------------------------------------

    def total_wire_bytes(self) -> int:
        return sum(r.wire_bytes for r in self.tx_log)

    def record_bandwidth(self, window: float = 1.0,
                         t_end: Optional[float] = None) -> list[BandwidthSample]:
        """Windowed byte totals (wire bytes incl. the 5-byte overhead)."""
        if window <= 0:
            raise InvalidInputError("window must be > 0")
        t_end = self.now if t_end is None else t_end
        n_windows = max(1, math.ceil(t_end / window)) if t_end > 0 else 1
        totals = np.zeros(n_windows)
        gossip = np.zeros(n_windows)
        command = np.zeros(n_windows)
        transfer = np.zeros(n_windows)
        by_role = [dict.fromkeys((r.value for r in Role), 0.0) for _ in range(n_windows)]
        events: list[list[str]] = [[] for _ in range(n_windows)]
        for rec in self.tx_log:
            i = min(int(rec.t / window), n_windows - 1)
            totals[i] += rec.wire_bytes
            by_role[i][rec.sender_role.value] += rec.wire_bytes
            if rec.msg_type is MsgType.GOSSIP:
                gossip[i] += rec.wire_bytes
            elif rec.msg_type is MsgType.COMMAND:
                command[i] += rec.wire_bytes
                if rec.command_kind is not None and rec.command_kind is not CommandKind.MARKER_POSE:
                    events[i].append(rec.command_kind.name.lower())
            else:
                transfer[i] += rec.wire_bytes
        return [
            BandwidthSample(
                t=i * window,
                bytes_per_s=totals[i] / window,
                gossip_bps=gossip[i] / window,
                command_bps=command[i] / window,
                transfer_bps=transfer[i] / window,
                by_role={k: v / window for k, v in by_role[i].items()},
                events=tuple(events[i]),
            )
            for i in range(n_windows)
        ]
