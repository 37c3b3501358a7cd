from types import SimpleNamespace

import numpy as np
import pytest

from blesim import engine
from blesim.engine import (ChannelError, ChannelList, CollisionLedger, EventKind,
                           EventQueue, Kernel, PacketId, PacketRole, SchedulingError,
                           SimEvent, SimulationTimeout, collision_check)

MASTER = PacketRole.MASTER


def event(t, kind=EventKind.BEGIN_CHECK, network_id=0, k=0, role=MASTER, channel=0):
    return SimEvent(t, kind, network_id, k, role, channel)


def packet(network_id, k=0, role=MASTER):
    return PacketId(network_id, k, role)


def test_queue_higher_delta_first():
    queue = EventQueue()
    queue.enqueue(event(0, EventKind.BEGIN_ACCESS))
    queue.enqueue(event(0, EventKind.END_CHECK))
    assert queue.dequeue_next().delta == 3
    assert queue.dequeue_next().delta == 1


def test_queue_orders_by_time():
    queue = EventQueue()
    queue.enqueue(event(5))
    queue.enqueue(event(3))
    assert queue.dequeue_next().t == 3
    assert queue.dequeue_next().t == 5
    assert queue.dequeue_next() is None


def test_queue_same_time_delta_ranks():
    queue = EventQueue()
    queue.enqueue(event(3, EventKind.BEGIN_CHECK))
    queue.enqueue(event(3, EventKind.END_RELEASE))
    assert queue.dequeue_next() == event(3, EventKind.END_RELEASE)
    assert len(queue) == 1


def test_queue_rejects_past_events():
    queue = EventQueue()
    queue.enqueue(event(10))
    queue.dequeue_next()
    with pytest.raises(SchedulingError) as e:
        queue.enqueue(event(9))
    assert "into the past" in e.value.message


def test_queue_order_is_total():
    events = [
        event(t, kind, network_id, k, role)
        for t in (0, 5)
        for kind in EventKind
        for network_id in (0, 1)
        for k in (0, 1)
        for role in PacketRole
    ]
    orders = []
    for seed in range(3):
        queue = EventQueue()
        for index in np.random.default_rng(seed).permutation(len(events)):
            queue.enqueue(events[index])
        orders.append([queue.dequeue_next() for _ in events])
    assert orders[0] == orders[1] == orders[2]
    assert [e.t for e in orders[0]] == sorted(e.t for e in events)


def test_channel_access_returns_prior_occupants():
    channels = ChannelList(2)
    assert channels.access(0, packet(0), 0) == frozenset()
    assert channels.access(0, packet(1), 0) == {packet(0)}
    assert channels.access(1, packet(2), 0) == frozenset()


def test_channel_double_access_fails():
    channels = ChannelList(2)
    channels.access(0, packet(0), 0)
    with pytest.raises(ChannelError):
        channels.access(1, packet(0), 5)


def test_channel_release():
    channels = ChannelList(1)
    channels.access(0, packet(0), 0)
    channels.access(0, packet(1), 0)
    channels.release(0, packet(0))
    assert channels.occupants(0) == {packet(1)}
    channels.release(0, packet(1))
    assert channels.is_idle()
    with pytest.raises(ChannelError):
        channels.release(0, packet(1))


def test_collision_check():
    channels, ledger = ChannelList(2), CollisionLedger()
    channels.access(0, packet(0), 0)
    assert not collision_check(channels, 0, packet(0), ledger)
    channels.access(1, packet(1), 0)
    assert not collision_check(channels, 1, packet(1), ledger)
    channels.access(1, packet(2), 0)
    assert collision_check(channels, 1, packet(2), ledger)
    assert ledger.collisions(1) == ledger.collisions(2) == 1
    assert ledger.collisions(0) == 0
    # flags are idempotent
    collision_check(channels, 1, packet(1), ledger)
    assert ledger.collisions(1) == 1


class TwoPacketModel:
    """Kernel handler running the four phase events of arbitrary packets."""

    def __init__(self):
        self.channels = ChannelList(1)
        self.ledger = CollisionLedger()
        self.kernel = Kernel(self.handle)

    def add(self, network_id, start, duration):
        for t, kind in (
            (start, EventKind.BEGIN_ACCESS),
            (start, EventKind.BEGIN_CHECK),
            (start + duration, EventKind.END_CHECK),
            (start + duration, EventKind.END_RELEASE),
        ):
            self.kernel.schedule(event(t, kind, network_id))

    def handle(self, e):
        who = e.packet
        if e.kind is EventKind.BEGIN_ACCESS:
            self.channels.access(e.channel, who, e.t)
        elif e.kind is EventKind.END_RELEASE:
            self.channels.release(e.channel, who)
            self.ledger.record_transmission(who)
        else:
            collision_check(self.channels, e.channel, who, self.ledger)


def test_back_to_back_packets_do_not_collide():
    model = TwoPacketModel()
    model.add(0, 0, 296)
    model.add(1, 296, 296)
    stats = model.kernel.run()
    assert stats.events_executed == 8
    assert model.ledger.collisions(0) == model.ledger.collisions(1) == 0


def test_detection_matches_interval_intersection():
    rng = np.random.default_rng(2024)
    for a, b, d1, d2 in rng.integers(0, 1000, size=(10_000, 4)):
        d1, d2 = int(d1) + 1, int(d2) + 1
        a, b = int(a), int(b)
        model = TwoPacketModel()
        model.add(0, a, d1)
        model.add(1, b, d2)
        model.kernel.run()
        overlap = a < b + d2 and b < a + d1
        assert model.ledger.collisions(0) == model.ledger.collisions(1) == int(overlap)
        assert model.channels.is_idle()
        assert model.channels.accesses == model.channels.releases


def test_kernel_discards_events_beyond_horizon():
    seen = []
    kernel = Kernel(seen.append)
    for t in (0, 10, 20):
        kernel.schedule(event(t))
    stats = kernel.run(until=10)
    assert [e.t for e in seen] == [0, 10]
    assert stats.events_executed == 2
    assert stats.events_discarded == 1
    assert len(kernel.queue) == 0


def test_kernel_without_events():
    assert Kernel(lambda e: None).run(until=0).events_executed == 0


def test_kernel_wall_clock_limit(monkeypatch):
    clock = iter(range(0, 10 ** 6, 100))
    monkeypatch.setattr(engine, "time", SimpleNamespace(monotonic=lambda: next(clock)))

    def reschedule(e):
        kernel.schedule(event(e.t + 1))

    kernel = Kernel(reschedule)
    kernel.schedule(event(0))
    with pytest.raises(SimulationTimeout) as e:
        kernel.run(wall_clock_limit_s=1.0)
    assert "wall-clock limit" in e.value.message
