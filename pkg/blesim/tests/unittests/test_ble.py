import numpy as np
import pytest
from pydantic import ValidationError

from blesim.ble import (ConnectionEventShape, HorizonOverflow, capped_sim_duration,
                        channel_at_event, connection_event_duration, next_channel,
                        optimal_sim_duration, packet_duration, schedule_connection_event)
from blesim.engine import EventKind, PacketRole


@pytest.mark.parametrize("n_bytes, expected", [(37, 296), (0, 0), (1, 8)])
def test_packet_duration(n_bytes, expected):
    assert packet_duration(n_bytes) == expected


@pytest.mark.parametrize(
    "sizes, expected", [((37, 37, 150), 742), ((0, 0, 0), 0), ((37, 0, 150), 446)]
)
def test_connection_event_duration(sizes, expected):
    assert connection_event_duration(*sizes) == expected


def test_shape_matches_duration():
    shape = ConnectionEventShape.of(37, 37, 150)
    assert shape.d_e == 2 * packet_duration(37) + 150
    assert shape.slave_begin - shape.master_begin == 296 + 150
    assert shape.packets == 2
    assert ConnectionEventShape.of(37, 0, 150).packets == 1


@pytest.mark.parametrize("args, expected", [((36, 1, 37), 0), ((0, 1, 2), 1), ((5, 7, 37), 12)])
def test_next_channel(args, expected):
    assert next_channel(*args) == expected


@pytest.mark.parametrize(
    "args, expected", [((4, 0, 3, 37), 4), ((0, 37, 1, 37), 0), ((0, 5, 7, 37), 35)]
)
def test_channel_at_event(args, expected):
    assert channel_at_event(*args) == expected


def test_channel_fast_forward_matches_stepping():
    rng = np.random.default_rng(37)
    for _ in range(1000):
        n_channels = int(rng.integers(2, 40))
        hop = int(rng.integers(1, n_channels))
        channel = int(rng.integers(0, n_channels))
        k = int(rng.integers(0, 200))
        stepped = channel
        for _ in range(k):
            stepped = next_channel(stepped, hop, n_channels)
        assert channel_at_event(channel, k, hop, n_channels) == stepped


def test_schedule_connection_event_offsets(make_network):
    net = make_network(t_c=7500, phi=1000, initial_channel=3, hop=5)
    events = schedule_connection_event(net, 0)
    assert len(events) == 8
    times = {(e.role, e.kind): e.t for e in events}
    assert times[PacketRole.MASTER, EventKind.BEGIN_ACCESS] == 1000
    assert times[PacketRole.MASTER, EventKind.END_RELEASE] == 1296
    assert times[PacketRole.SLAVE, EventKind.BEGIN_ACCESS] == 1446
    assert times[PacketRole.SLAVE, EventKind.END_CHECK] == 1742
    assert {e.channel for e in events} == {3}
    later = schedule_connection_event(net, 2)
    assert min(e.t for e in later) == 1000 + 2 * 7500
    assert {e.channel for e in later} == {13}
    assert {e.conn_event_index for e in later} == {2}


def test_schedule_master_only_event(make_network):
    events = schedule_connection_event(make_network(n_pkg_s=0), 0)
    assert len(events) == 4
    assert {e.role for e in events} == {PacketRole.MASTER}


def test_optimal_duration_single_network(make_network):
    net = make_network(t_c=7500)
    assert optimal_sim_duration([net], 1, 37) == 278242


def test_optimal_duration_two_networks(make_network):
    nets = [make_network(0, 10000), make_network(1, 7500)]
    assert optimal_sim_duration(nets, 1, 37) == 1110742


def test_optimal_duration_single_channel(make_network):
    nets = [make_network(0, 10000, n_channels=1), make_network(1, 7500, n_channels=1)]
    assert optimal_sim_duration(nets, 1, 1) == 30000 + 742


def test_optimal_duration_pads_with_longest_event(make_network):
    nets = [make_network(0, 10000, n_pkg_m=100), make_network(1, 7500)]
    assert optimal_sim_duration(nets, 1, 1) == 30000 + 800 + 150 + 296


def test_optimal_duration_overflow(make_network):
    nets = [make_network(i, t_c) for i, t_c in enumerate((10_238_750, 10_237_500, 10_236_250))]
    with pytest.raises(HorizonOverflow) as e:
        optimal_sim_duration(nets, 1, 37, limit=10 ** 12)
    assert "exceeds" in e.value.message
    assert capped_sim_duration(nets, 1, 37, cap=5_000_000, limit=10 ** 12) == 5_000_000


def test_network_config_rejects_off_grid_interval(make_network):
    with pytest.raises(ValidationError):
        make_network(t_c=8000)
    with pytest.raises(ValidationError):
        make_network(t_c=6250)


def test_network_config_rejects_late_offset(make_network):
    with pytest.raises(ValidationError):
        make_network(t_c=7500, phi=7501)
    assert make_network(t_c=7500, phi=7500).phi == 7500


def test_network_config_hop_bounds(make_network):
    with pytest.raises(ValidationError):
        make_network(hop=37, n_channels=37)
    with pytest.raises(ValidationError):
        make_network(n_channels=2, initial_channel=2)
    assert make_network(hop=1, n_channels=1).hop == 1
