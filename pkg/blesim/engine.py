"""Next-event time-advance kernel.

Events are ordered by timestamp and, inside one timestamp, by delta-cycle
with the higher delta running first. The delta of an event is its packet
phase, so a packet ending at ``t`` releases its channel before a packet
starting at ``t`` accesses it (half-open air-time intervals).
"""
import enum
import heapq
import itertools
import logging
import time
from collections import Counter, defaultdict
from typing import Callable, DefaultDict, Dict, FrozenSet, List, NamedTuple, Optional, Set

logger = logging.getLogger(__name__)

SimTime = int  # microseconds

DEADLINE_CHECK_EVERY = 4096


class SimulationError(Exception):
    def __init__(self, message):
        self.message = message
        super().__init__(self.message)


class SchedulingError(SimulationError):
    def __init__(self, event: "SimEvent", now: SimTime):
        self.message = f"event {event} scheduled into the past (now={now})"
        super().__init__(self.message)


class ChannelError(SimulationError):
    pass


class SimulationTimeout(SimulationError):
    def __init__(self, limit_s: float, events_executed: int):
        self.message = (
            f"wall-clock limit of {limit_s}s reached after {events_executed} events"
        )
        super().__init__(self.message)


class EventKind(enum.IntEnum):
    """Packet phase. The value is the delta-cycle rank."""

    BEGIN_CHECK = 0
    BEGIN_ACCESS = 1
    END_RELEASE = 2
    END_CHECK = 3


class PacketRole(enum.IntEnum):
    MASTER = 0
    SLAVE = 1


class PacketId(NamedTuple):
    network_id: int
    conn_event_index: int
    role: PacketRole


class SimEvent(NamedTuple):
    t: SimTime
    kind: EventKind
    network_id: int
    conn_event_index: int
    role: PacketRole
    channel: int

    @property
    def delta(self) -> int:
        return int(self.kind)

    @property
    def packet(self) -> PacketId:
        return PacketId(self.network_id, self.conn_event_index, self.role)

    @property
    def opens_connection_event(self) -> bool:
        return self.kind is EventKind.BEGIN_ACCESS and self.role is PacketRole.MASTER

    def sort_key(self):
        return (self.t, -self.kind, self.network_id, self.conn_event_index, self.role)


class EventQueue:
    def __init__(self):
        self._heap: List[tuple] = []
        self._counter = itertools.count()
        self.now: SimTime = 0

    def __len__(self) -> int:
        return len(self._heap)

    def enqueue(self, event: SimEvent) -> None:
        if event.t < self.now:
            raise SchedulingError(event, self.now)
        heapq.heappush(self._heap, (event.sort_key(), next(self._counter), event))

    def peek_time(self) -> Optional[SimTime]:
        if not self._heap:
            return None
        return self._heap[0][2].t

    def dequeue_next(self) -> Optional[SimEvent]:
        if not self._heap:
            return None
        event = heapq.heappop(self._heap)[2]
        self.now = event.t
        return event

    def clear(self) -> int:
        dropped = len(self._heap)
        self._heap.clear()
        return dropped


class ChannelList:
    def __init__(self, n_channels: int):
        self._occupants: List[Set[PacketId]] = [set() for _ in range(n_channels)]
        self._location: Dict[PacketId, int] = {}
        self.accesses = [0] * n_channels
        self.releases = [0] * n_channels

    @property
    def n_channels(self) -> int:
        return len(self._occupants)

    def access(self, ch: int, who: PacketId, at: SimTime) -> FrozenSet[PacketId]:
        if who in self._location:
            raise ChannelError(
                f"{who} accessed channel {ch} at t={at} while holding channel "
                f"{self._location[who]}"
            )
        occupants = self._occupants[ch]
        before = frozenset(occupants)
        occupants.add(who)
        self._location[who] = ch
        self.accesses[ch] += 1
        return before

    def release(self, ch: int, who: PacketId) -> None:
        if self._location.get(who) != ch:
            raise ChannelError(f"{who} released channel {ch} it does not occupy")
        self._occupants[ch].discard(who)
        del self._location[who]
        self.releases[ch] += 1

    def occupants(self, ch: int) -> FrozenSet[PacketId]:
        return frozenset(self._occupants[ch])

    def is_idle(self) -> bool:
        return not self._location


class CollisionLedger:
    def __init__(self):
        self.collided: DefaultDict[int, Set[PacketId]] = defaultdict(set)
        self.transmitted: Counter = Counter()

    def record_transmission(self, packet: PacketId) -> None:
        self.transmitted[packet.network_id] += 1

    def flag(self, *packets: PacketId) -> None:
        for packet in packets:
            self.collided[packet.network_id].add(packet)

    def collisions(self, network_id: int) -> int:
        return len(self.collided[network_id])


def collision_check(
    channels: ChannelList, ch: int, who: PacketId, ledger: CollisionLedger
) -> bool:
    occupants = channels.occupants(ch)
    if len(occupants) < 2:
        return False
    ledger.flag(*occupants)
    return True


class KernelStats(NamedTuple):
    events_executed: int
    events_discarded: int
    now: SimTime


class Kernel:
    """Runs events through a handler until the queue drains or the horizon is passed."""

    def __init__(self, handler: Callable[[SimEvent], None]):
        self.queue = EventQueue()
        self.handler = handler
        self.events_executed = 0

    def schedule(self, event: SimEvent) -> None:
        self.queue.enqueue(event)

    def run(
        self, until: Optional[SimTime] = None, wall_clock_limit_s: Optional[float] = None
    ) -> KernelStats:
        queue = self.queue
        handler = self.handler
        deadline = None
        if wall_clock_limit_s is not None:
            deadline = time.monotonic() + wall_clock_limit_s
        discarded = 0
        while queue:
            if until is not None and queue.peek_time() > until:
                discarded = queue.clear()
                logger.debug("discarded %d events beyond t=%d", discarded, until)
                break
            handler(queue.dequeue_next())
            self.events_executed += 1
            if (
                deadline is not None
                and self.events_executed % DEADLINE_CHECK_EVERY == 0
                and time.monotonic() > deadline
            ):
                raise SimulationTimeout(wall_clock_limit_s, self.events_executed)
        return KernelStats(self.events_executed, discarded, queue.now)
