import logging
import time
from collections import Counter
from typing import Dict, List, Optional, Set

from blesim.ble import schedule_connection_event
from blesim.engine import (ChannelList, CollisionLedger, EventKind, Kernel,
                           PacketId, SimEvent, collision_check)
from blesim.schemas import NetworkConfig, RunMode, RunResult, Scenario
from blesim.skip import PairState, PredictionRecord, SkipManager, total_packets

logger = logging.getLogger(__name__)


class Simulation:
    """Shared kernel wiring: channel model, collision ledger and per-network event limits.

    Network n runs connection events 0 .. total_packets(d_sim, T_c,n) - 1.
    """

    mode: RunMode

    def __init__(self, scenario: Scenario, wall_clock_limit_s: Optional[float] = None):
        self.scenario = scenario
        self.wall_clock_limit_s = wall_clock_limit_s
        self.networks: Dict[int, NetworkConfig] = {
            net.network_id: net for net in scenario.networks
        }
        self.noi = scenario.noi
        self.limits = {
            net.network_id: total_packets(scenario.d_sim, net.t_c) for net in scenario.networks
        }
        self.kernel = Kernel(self.handle)
        self.channels = ChannelList(scenario.n_channels)
        self.ledger = CollisionLedger()
        self.connection_events: Counter = Counter()
        self.cpu_time_s = 0.0

    @property
    def stop_time(self) -> int:
        return max(
            net.anchor(self.limits[net.network_id] - 1) + net.d_e
            for net in self.scenario.networks
        )

    def schedule(self, net: NetworkConfig, k: int) -> None:
        for event in schedule_connection_event(net, k):
            self.kernel.schedule(event)

    def handle(self, event: SimEvent) -> None:
        who = PacketId(event.network_id, event.conn_event_index, event.role)
        kind = event.kind
        if kind is EventKind.BEGIN_ACCESS:
            self.channels.access(event.channel, who, event.t)
            if event.opens_connection_event:
                self.connection_events[event.network_id] += 1
                self.on_connection_event(self.networks[event.network_id], event.conn_event_index)
        elif kind is EventKind.END_RELEASE:
            self.channels.release(event.channel, who)
            self.ledger.record_transmission(who)
        else:
            collision_check(self.channels, event.channel, who, self.ledger)

    def seed(self) -> None:
        raise NotImplementedError

    def on_connection_event(self, net: NetworkConfig, k: int) -> None:
        raise NotImplementedError

    def packets_of_interest(self) -> int:
        raise NotImplementedError

    def collided_packets(self) -> Set[PacketId]:
        return set(self.ledger.collided[self.noi.network_id])

    def run(self) -> RunResult:
        self.seed()
        started = time.process_time()
        stats = self.kernel.run(until=self.stop_time, wall_clock_limit_s=self.wall_clock_limit_s)
        self.cpu_time_s = time.process_time() - started
        collisions = self.ledger.collisions(self.noi.network_id)
        packets = self.packets_of_interest()
        logger.debug(
            "%s run: %d events, %d/%d packets collided",
            self.mode.value,
            stats.events_executed,
            collisions,
            packets,
        )
        return RunResult(
            mode=self.mode,
            collisions_noi=collisions,
            packets_noi=packets,
            collision_rate=collisions / packets,
            events_executed=stats.events_executed,
            cpu_time_s=self.cpu_time_s,
        )


class BaselineSimulation(Simulation):
    """Executes every connection event of every network."""

    mode = RunMode.baseline

    def seed(self) -> None:
        for net in self.scenario.networks:
            self.schedule(net, 0)

    def on_connection_event(self, net: NetworkConfig, k: int) -> None:
        if k + 1 < self.limits[net.network_id]:
            self.schedule(net, k + 1)

    def packets_of_interest(self) -> int:
        return self.ledger.transmitted[self.noi.network_id]


class SkippingSimulation(Simulation):
    """Executes only connection-event pairs that the skip manager cannot rule out.

    Every interferer carries one examined pair against the network of
    interest. Executing the interferer's event of that pair predicts forward
    to the next pair whose events lie within the overlap window and schedules
    both of its events; pairs in between are never executed.
    """

    mode = RunMode.skip

    def __init__(
        self,
        scenario: Scenario,
        wall_clock_limit_s: Optional[float] = None,
        validate: bool = False,
        record: bool = False,
    ):
        super().__init__(scenario, wall_clock_limit_s)
        self.records: Optional[List[PredictionRecord]] = [] if record else None
        self.skip_manager = SkipManager(self.noi, validate=validate, records=self.records)
        self.pairs: Dict[int, PairState] = {}
        self._noi_scheduled: Set[int] = set()

    def seed(self) -> None:
        for net in self.scenario.interferers:
            self._commit(net, self.skip_manager.open_pair(net))

    def on_connection_event(self, net: NetworkConfig, k: int) -> None:
        pair = self.pairs.pop(net.network_id, None)
        if pair is None:
            return
        update = self.skip_manager.predict_pair(pair, net)
        if update.pair is not None:
            self._commit(net, update.pair)

    def _commit(self, net: NetworkConfig, pair: Optional[PairState]) -> None:
        n_limit = self.limits[net.network_id]
        noi_limit = self.limits[self.noi.network_id]
        while pair is not None:
            if pair.n_index >= n_limit or pair.noi_index >= noi_limit:
                return
            if min(pair.n_index, pair.noi_index) >= 0 and self.skip_manager.can_overlap(pair, net):
                break
            # virtual or too far apart to collide; keep predicting from it
            pair = self.skip_manager.predict_pair(pair, net).pair
        if pair is None:
            return
        self.pairs[net.network_id] = pair
        self.schedule(net, pair.n_index)
        if pair.noi_index not in self._noi_scheduled:
            self._noi_scheduled.add(pair.noi_index)
            self.schedule(self.noi, pair.noi_index)

    def packets_of_interest(self) -> int:
        return self.noi.shape.packets * self.limits[self.noi.network_id]


def make_simulation(
    scenario: Scenario,
    mode: RunMode,
    wall_clock_limit_s: Optional[float] = None,
    validate: bool = False,
    record: bool = False,
) -> Simulation:
    if mode is RunMode.baseline:
        return BaselineSimulation(scenario, wall_clock_limit_s)
    if mode is RunMode.skip:
        return SkippingSimulation(scenario, wall_clock_limit_s, validate=validate, record=record)
    raise ValueError(f"no single engine for mode {mode.value}")
