"""BLE connected-mode timing: packet air-times, channel hopping and the exact horizon."""
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, List

from blesim.config import MAX_HYPERPERIOD_US, SYMBOL_TIME_US
from blesim.engine import EventKind, PacketRole, SimEvent, SimTime, SimulationError

if TYPE_CHECKING:
    from blesim.schemas import NetworkConfig

logger = logging.getLogger(__name__)


class HorizonOverflow(SimulationError):
    def __init__(self, limit: int):
        self.message = f"hyperperiod exceeds {limit} µs"
        super().__init__(self.message)


def packet_duration(n_bytes: int) -> int:
    return n_bytes * SYMBOL_TIME_US


def connection_event_duration(n_pkg_m: int, n_pkg_s: int, d_ifs: int) -> int:
    return packet_duration(n_pkg_m) + d_ifs + packet_duration(n_pkg_s)


def next_channel(ch: int, hop: int, n_channels: int) -> int:
    return (ch + hop) % n_channels


def channel_at_event(initial_channel: int, k: int, hop: int, n_channels: int) -> int:
    return (initial_channel + k * hop) % n_channels


@dataclass(frozen=True)
class ConnectionEventShape:
    """Offsets of the packets of one connection event, relative to its anchor."""

    master_begin: int
    master_end: int
    slave_begin: int
    slave_end: int

    @classmethod
    def of(cls, n_pkg_m: int, n_pkg_s: int, d_ifs: int) -> "ConnectionEventShape":
        master_end = packet_duration(n_pkg_m)
        slave_begin = master_end + d_ifs
        return cls(0, master_end, slave_begin, slave_begin + packet_duration(n_pkg_s))

    @property
    def d_e(self) -> int:
        return self.slave_end

    @property
    def has_slave(self) -> bool:
        return self.slave_end > self.slave_begin

    @property
    def packets(self) -> int:
        return 2 if self.has_slave else 1


def _packet_events(
    begin: SimTime, end: SimTime, network_id: int, k: int, role: PacketRole, channel: int
) -> List[SimEvent]:
    return [
        SimEvent(begin, EventKind.BEGIN_ACCESS, network_id, k, role, channel),
        SimEvent(begin, EventKind.BEGIN_CHECK, network_id, k, role, channel),
        SimEvent(end, EventKind.END_CHECK, network_id, k, role, channel),
        SimEvent(end, EventKind.END_RELEASE, network_id, k, role, channel),
    ]


def schedule_connection_event(net: "NetworkConfig", k: int) -> List[SimEvent]:
    """Simulation events of connection event ``k`` of ``net``.

    The master BEGIN_ACCESS event is the connection event's first event.
    """
    shape = net.shape
    anchor = net.phi + k * net.t_c
    channel = channel_at_event(net.initial_channel, k, net.hop, net.n_channels)
    events = _packet_events(
        anchor + shape.master_begin,
        anchor + shape.master_end,
        net.network_id,
        k,
        PacketRole.MASTER,
        channel,
    )
    if shape.has_slave:
        events += _packet_events(
            anchor + shape.slave_begin,
            anchor + shape.slave_end,
            net.network_id,
            k,
            PacketRole.SLAVE,
            channel,
        )
    return events


def lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def hyperperiod(
    configs: Iterable["NetworkConfig"], hop: int, n_channels: int, limit: int = MAX_HYPERPERIOD_US
) -> int:
    """LCM of every sigma * T_c, sigma being the hopping period bound LCM(n_channels, hop)."""
    sigma = lcm(n_channels, hop)
    period = 1
    for net in configs:
        period = lcm(period, sigma * net.t_c)
        if period > limit:
            raise HorizonOverflow(limit)
    return period


def optimal_sim_duration(
    configs: List["NetworkConfig"],
    hop: int,
    n_channels: int,
    limit: int = MAX_HYPERPERIOD_US,
) -> SimTime:
    if not configs:
        raise ValueError("at least one network is required")
    padding = max(net.shape.d_e for net in configs)
    return hyperperiod(configs, hop, n_channels, limit) + padding


def capped_sim_duration(
    configs: List["NetworkConfig"],
    hop: int,
    n_channels: int,
    cap: int,
    limit: int = MAX_HYPERPERIOD_US,
) -> SimTime:
    try:
        return min(optimal_sim_duration(configs, hop, n_channels, limit), cap)
    except HorizonOverflow:
        logger.debug("hyperperiod beyond %d µs, using cap %d µs", limit, cap)
        return cap


def total_grid_points(t_min: int, t_max: int, step: int) -> int:
    return (t_max - t_min) // step + 1
