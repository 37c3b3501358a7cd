import pytest

from blesim.schemas import ExperimentConfig, NetworkConfig, Scenario


@pytest.fixture
def make_network():
    def factory(network_id=0, t_c=7500, phi=0, **overrides):
        return NetworkConfig(network_id=network_id, t_c=t_c, phi=phi, **overrides)

    return factory


@pytest.fixture
def make_scenario(make_network):
    def factory(specs, noi_id=0, d_sim=1_000_000, **common):
        """``specs`` are (t_c, phi) or (t_c, phi, initial_channel) tuples, longest interval first."""
        networks = []
        for network_id, spec in enumerate(specs):
            t_c, phi, *rest = spec
            extra = dict(common)
            if rest:
                extra["initial_channel"] = rest[0]
            networks.append(make_network(network_id, t_c, phi, **extra))
        return Scenario(networks=networks, noi_id=noi_id, d_sim=d_sim)

    return factory


@pytest.fixture
def small_experiment():
    return ExperimentConfig(
        networks=3,
        t_min=7500,
        t_max_end=20000,
        t_max_step=6250,
        repetitions=2,
        n_channels=2,
        seed=7,
        horizon_policy="capped",
        horizon_cap=400_000,
    )
