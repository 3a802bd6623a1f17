import math
import struct

import numpy as np
import pytest

from swarmstage.bus import GOSSIP_TOPIC, GossipBus, NetConfig
from swarmstage.errors import IdConflictError, InvalidInputError, SwarmStageError
from swarmstage.wire import (
    CommandKind,
    CommandMessage,
    GossipMessage,
    NodeId,
    Role,
    encode,
)


def robot(i):
    return NodeId(i, Role.ROBOT)


def gossip_bytes(sender_id, seq=0, payload_len=None):
    m = GossipMessage(robot(sender_id), seq, 0, 0, 0, 0, 0, 0, 0, 0, 0)
    buf = encode(m)
    if payload_len is None:
        return buf
    # Synthetic fatter packet for bandwidth arithmetic (bus never decodes).
    return struct.pack("<BBBH", 1, 1, payload_len, sender_id) + bytes(payload_len)


def make_bus(n_robots, **cfg):
    bus = GossipBus(NetConfig(**cfg))
    inboxes = {}
    for i in range(n_robots):
        bus.join(robot(i))
        inboxes[i] = bus.subscribe(i)
    return bus, inboxes


class TestDelivery:
    def test_lossless_broadcast_reaches_all_but_sender(self):
        bus, inboxes = make_bus(5, loss_prob=0.0, latency_jitter_ms=0.0)
        n = bus.publish(0, gossip_bytes(0))
        assert n == 4
        bus.advance_to(1.0)
        for i in range(1, 5):
            assert len(inboxes[i].drain()) == 1
        assert inboxes[0].drain() == []

    def test_total_loss(self):
        bus, inboxes = make_bus(3, loss_prob=1.0)
        assert bus.publish(0, gossip_bytes(0)) == 0
        bus.advance_to(1.0)
        assert inboxes[1].drain() == []

    def test_loss_rate_matches_binomial_oracle(self):
        # 1e4 Bernoulli(0.7) deliveries: 3-sigma band is +-1.4%, spec
        # tolerance is +-2%.
        bus, inboxes = make_bus(2, loss_prob=0.3, seed=42)
        n_pub = 10_000
        delivered = sum(bus.publish(0, gossip_bytes(0)) for _ in range(n_pub))
        frac = delivered / n_pub
        assert abs(frac - 0.7) < 0.02
        sigma3 = 3 * math.sqrt(0.3 * 0.7 / n_pub)
        assert sigma3 < 0.02  # the spec tolerance indeed covers 3 sigma

    def test_latency_is_applied(self):
        bus, inboxes = make_bus(2, latency_mean_ms=100.0, latency_jitter_ms=0.0)
        bus.publish(0, gossip_bytes(0))
        bus.advance_to(0.05)
        assert inboxes[1].drain() == []
        bus.advance_to(0.2)
        recv = inboxes[1].drain()
        assert len(recv) == 1
        assert recv[0][0] == pytest.approx(0.1)

    def test_per_pair_fifo_under_jitter(self):
        bus, inboxes = make_bus(2, latency_mean_ms=20.0, latency_jitter_ms=20.0, seed=3)
        for seq in range(200):
            bus.publish(0, gossip_bytes(0, seq=seq))
            bus.advance_to(bus.now + 0.001)
        bus.advance_to(10.0)
        seqs = [struct.unpack_from("<I", data, 5)[0] for _, data in inboxes[1].drain()]
        assert seqs == sorted(seqs) and len(seqs) == 200

    def test_thirteen_node_full_mesh(self):
        bus, inboxes = make_bus(13, loss_prob=0.0)
        assert bus.publish(0, gossip_bytes(0)) == 12
        bus.advance_to(1.0)
        assert sum(len(ib.drain()) for ib in inboxes.values()) == 12


class TestMembership:
    def test_join_then_receive(self):
        bus, inboxes = make_bus(2)
        bus.join(robot(9))
        late = bus.subscribe(9)
        bus.publish(0, gossip_bytes(0))
        bus.advance_to(1.0)
        assert len(late.drain()) == 1

    def test_duplicate_join_conflicts(self):
        bus, _ = make_bus(2)
        with pytest.raises(IdConflictError):
            bus.join(robot(1))

    def test_leave_purges_in_flight(self):
        bus, inboxes = make_bus(2, latency_mean_ms=50.0)
        bus.publish(0, gossip_bytes(0))
        bus.leave(1)
        bus.advance_to(1.0)
        assert inboxes[1].drain() == []

    def test_publish_after_leave_is_warned_noop(self):
        bus, inboxes = make_bus(2)
        bus.leave(0)
        assert bus.publish(0, gossip_bytes(0)) == 0
        assert any(kind == "warning" for _, kind, _ in bus.events)

    def test_leave_unknown_raises(self):
        bus, _ = make_bus(1)
        with pytest.raises(InvalidInputError):
            bus.leave(99)


class TestDeterminism:
    def run_trace(self, seed):
        bus, inboxes = make_bus(4, loss_prob=0.2, latency_jitter_ms=10.0, seed=seed)
        trace = []
        for k in range(50):
            bus.publish(k % 4, gossip_bytes(k % 4, seq=k))
            bus.advance_to((k + 1) * 0.05)
            for i in range(4):
                for t, data in inboxes[i].drain():
                    trace.append((i, round(t, 9), bytes(data)))
        return trace

    def test_same_seed_same_schedule(self):
        assert self.run_trace(7) == self.run_trace(7)

    def test_different_seed_differs(self):
        assert self.run_trace(7) != self.run_trace(8)


class TestBandwidth:
    def test_idle_bus_zero(self):
        bus, _ = make_bus(3)
        bus.advance_to(5.0)
        samples = bus.record_bandwidth(1.0)
        assert all(s.bytes_per_s == 0 for s in samples)
        assert [s.t for s in samples] == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_offered_load_arithmetic(self):
        # 13 nodes, 100-byte payloads, 4 Hz: (105 * 4 * 13) = 5460 B/s.
        bus, _ = make_bus(13)
        for k in range(4):
            t = k * 0.25
            bus.advance_to(t)
            for i in range(13):
                bus.publish(i, gossip_bytes(i, payload_len=100))
        bus.advance_to(1.0)
        [sample] = bus.record_bandwidth(1.0)
        assert sample.bytes_per_s == pytest.approx(5460.0)
        assert sample.gossip_bps == pytest.approx(5460.0)
        # Exact overhead accounting: every packet is 5 + payload bytes.
        assert bus.total_wire_bytes() == 52 * 105

    def test_command_event_markers(self):
        bus, _ = make_bus(2)
        bus.join(NodeId(100, Role.GROUND_STATION))
        bus.subscribe(100)
        cmd = CommandMessage(CommandKind.LAUNCH, NodeId(100, Role.GROUND_STATION), 1)
        bus.publish(100, encode(cmd), command_kind=CommandKind.LAUNCH)
        bus.advance_to(1.0)
        [sample] = bus.record_bandwidth(1.0)
        assert "launch" in sample.events
        assert sample.command_bps > 0

    def test_by_role_breakdown(self):
        bus, _ = make_bus(2)
        bus.join(NodeId(100, Role.GROUND_STATION))
        bus.publish(0, gossip_bytes(0))
        cmd = CommandMessage(CommandKind.STOP, NodeId(100, Role.GROUND_STATION), 1)
        bus.publish(100, encode(cmd), command_kind=CommandKind.STOP)
        bus.advance_to(1.0)
        [sample] = bus.record_bandwidth(1.0)
        assert sample.by_role["robot"] == pytest.approx(27.0)
        assert sample.by_role["ground_station"] == pytest.approx(12.0)


class TestTransfers:
    def station_bus(self):
        bus, inboxes = make_bus(2)
        bus.join(NodeId(100, Role.GROUND_STATION))
        return bus, inboxes

    def test_chunk_arithmetic_1mb(self):
        bus, _ = self.station_bus()
        done = bus.launch_transfer(100, 0, 1_000_000)
        assert done["packets"] == 4000
        bus.advance_to(done["t_end"] + 1.0)
        assert bus.total_wire_bytes() == 4000 * 255

    def test_empty_blob(self):
        bus, _ = self.station_bus()
        done = bus.launch_transfer(100, 0, 0)
        assert done["packets"] == 0
        assert bus.total_wire_bytes() == 0
        assert any(k == "transfer_complete" for _, k, _ in bus.events)

    def test_concurrent_transfers_add(self):
        bus, _ = self.station_bus()
        bus.launch_transfer(100, 0, 100_000)
        bus.launch_transfer(100, 1, 100_000)
        bus.advance_to(5.0)
        total = sum(s.transfer_bps for s in bus.record_bandwidth(1.0))
        assert total == pytest.approx(2 * 400 * 255)

    def test_unknown_robot(self):
        bus, _ = self.station_bus()
        with pytest.raises(SwarmStageError):
            bus.launch_transfer(100, 77, 1000)

    def test_station_role_required(self):
        bus, _ = make_bus(2)
        with pytest.raises(InvalidInputError):
            bus.launch_transfer(0, 1, 1000)

    def test_chunks_are_delivered_unicast(self):
        bus, inboxes = self.station_bus()
        bus.launch_transfer(100, 0, 1000)
        bus.advance_to(2.0)
        assert len(inboxes[0].drain()) == 4   # ceil(1000/250)
        assert inboxes[1].drain() == []


def test_scaling_is_linear_in_node_count():
    loads = {}
    for n in (2, 5, 13):
        bus, _ = make_bus(n)
        for k in range(40):  # 10 s at 4 Hz
            bus.advance_to(k * 0.25)
            for i in range(n):
                bus.publish(i, gossip_bytes(i))
        bus.advance_to(10.0)
        loads[n] = bus.total_wire_bytes() / 10.0
    xs = np.array(sorted(loads))
    ys = np.array([loads[n] for n in xs])
    slope, intercept = np.polyfit(xs, ys, 1)
    fit = slope * xs + intercept
    ss_res = float(np.sum((ys - fit) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    assert 1 - ss_res / ss_tot > 0.999
