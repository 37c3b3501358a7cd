import enum
from typing import List, Optional

from pydantic import BaseModel, Field, root_validator, validator

from blesim import config
from blesim.ble import ConnectionEventShape, connection_event_duration


class RunMode(enum.Enum):
    baseline = "baseline"
    skip = "skip"
    verify = "verify"


class HorizonPolicy(enum.Enum):
    optimal = "optimal"
    capped = "capped"


def grid_validator(value_us):
    if not config.is_on_grid(value_us):
        raise ValueError(
            f"{value_us} µs is not a multiple of {config.CONNECTION_INTERVAL_STEP_US} µs"
        )
    return value_us


def interval_validator(value_us):
    grid_validator(value_us)
    if not (
        config.MIN_CONNECTION_INTERVAL_US <= value_us <= config.MAX_CONNECTION_INTERVAL_US
    ):
        raise ValueError(
            f"connection interval in range [{config.MIN_CONNECTION_INTERVAL_US}, "
            f"{config.MAX_CONNECTION_INTERVAL_US}] µs allowed"
        )
    return value_us


def hop_validator(hop, n_channels):
    if n_channels == 1:
        if hop != 1:
            raise ValueError("hop increment must be 1 on a single channel")
    elif not 1 <= hop < n_channels:
        raise ValueError(f"hop increment in range [1, {n_channels}) allowed")
    return hop


class NetworkConfig(BaseModel):
    network_id: int = Field(..., ge=0)
    t_c: int
    phi: int = Field(..., ge=0)
    n_pkg_m: int = Field(config.DEFAULT_PACKET_BYTES, ge=1)
    n_pkg_s: int = Field(config.DEFAULT_PACKET_BYTES, ge=0)
    d_ifs: int = Field(config.DEFAULT_IFS_US, ge=0)
    hop: int = Field(1, ge=1)
    n_channels: int = Field(config.DEFAULT_CHANNELS, ge=1)
    initial_channel: int = Field(0, ge=0)

    class Config:
        allow_mutation = False
        extra = "forbid"

    @validator("t_c")
    def t_c_validator(cls, v):
        return interval_validator(v)

    @root_validator(skip_on_failure=True)
    def check_ranges(cls, values):
        if values["phi"] > values["t_c"]:
            raise ValueError("initial offset must not exceed the connection interval")
        hop_validator(values["hop"], values["n_channels"])
        if values["initial_channel"] >= values["n_channels"]:
            raise ValueError("initial channel outside the used channels")
        return values

    @property
    def shape(self) -> ConnectionEventShape:
        return ConnectionEventShape.of(self.n_pkg_m, self.n_pkg_s, self.d_ifs)

    @property
    def d_pkg_m(self) -> int:
        return self.shape.master_end

    @property
    def d_pkg_s(self) -> int:
        return self.shape.slave_end - self.shape.slave_begin

    @property
    def d_e(self) -> int:
        return self.shape.d_e

    def anchor(self, k: int) -> int:
        return self.phi + k * self.t_c


class Scenario(BaseModel):
    networks: List[NetworkConfig]
    noi_id: int
    d_sim: int = Field(..., ge=0)

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def check_networks(cls, values):
        networks = values["networks"]
        if not networks:
            raise ValueError("a scenario needs at least the network of interest")
        ids = [net.network_id for net in networks]
        if len(set(ids)) != len(ids):
            raise ValueError("network ids must be unique")
        if values["noi_id"] not in ids:
            raise ValueError(f"network of interest {values['noi_id']} not in {ids}")
        intervals = [net.t_c for net in networks]
        if intervals != sorted(intervals, reverse=True):
            raise ValueError("networks must be sorted by descending connection interval")
        if len({net.n_channels for net in networks}) != 1:
            raise ValueError("all networks must share the used-channel count")
        return values

    @property
    def noi(self) -> NetworkConfig:
        return next(net for net in self.networks if net.network_id == self.noi_id)

    @property
    def interferers(self) -> List[NetworkConfig]:
        return [net for net in self.networks if net.network_id != self.noi_id]

    @property
    def n_channels(self) -> int:
        return self.networks[0].n_channels


class ExperimentConfig(BaseModel):
    networks: int = Field(config.DEFAULT_NETWORKS, ge=2)
    t_min: int = config.MIN_CONNECTION_INTERVAL_US
    t_max_start: Optional[int] = None
    t_max_end: int = config.DEFAULT_SWEEP_END_US
    t_max_step: int = Field(config.CONNECTION_INTERVAL_STEP_US, gt=0)
    repetitions: int = Field(config.DEFAULT_REPETITIONS, ge=1)
    n_channels: int = Field(config.DEFAULT_EXPERIMENT_CHANNELS, ge=1)
    hop: int = Field(1, ge=1)
    n_pkg_m: int = Field(config.DEFAULT_PACKET_BYTES, ge=1)
    n_pkg_s: int = Field(config.DEFAULT_PACKET_BYTES, ge=0)
    d_ifs: int = Field(config.DEFAULT_IFS_US, ge=0)
    noi_rank: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    mode: RunMode = RunMode.verify
    horizon_policy: HorizonPolicy = HorizonPolicy.optimal
    horizon_cap: int = Field(config.DEFAULT_HORIZON_CAP_US, ge=0)
    max_hyperperiod: int = Field(config.MAX_HYPERPERIOD_US, gt=0)
    wall_clock_limit_s: Optional[float] = Field(None, gt=0)

    class Config:
        extra = "forbid"

    @validator("t_min", "t_max_end")
    def interval_bounds_validator(cls, v):
        return interval_validator(v)

    @validator("t_max_start")
    def sweep_start_validator(cls, v):
        if v is None:
            return v
        return interval_validator(v)

    @validator("t_max_step")
    def step_validator(cls, v):
        return grid_validator(v)

    @root_validator(skip_on_failure=True)
    def check_sweep(cls, values):
        if values["t_max_start"] is None:
            values["t_max_start"] = values["t_min"]
        if not values["t_min"] <= values["t_max_start"] <= values["t_max_end"]:
            raise ValueError("sweep requires t_min <= t_max_start <= t_max_end")
        if values["noi_rank"] > values["networks"]:
            raise ValueError(
                f"noi_rank {values['noi_rank']} exceeds network count {values['networks']}"
            )
        d_e = connection_event_duration(values["n_pkg_m"], values["n_pkg_s"], values["d_ifs"])
        if d_e > values["t_min"]:
            raise ValueError(f"connection event of {d_e} µs does not fit into t_min {values['t_min']} µs")
        hop_validator(values["hop"], values["n_channels"])
        return values

    def t_max_values(self) -> List[int]:
        return list(range(self.t_max_start, self.t_max_end + 1, self.t_max_step))

    def canonical_json(self) -> str:
        return self.json(sort_keys=True, indent=2)


class RunResult(BaseModel):
    mode: RunMode
    collisions_noi: int = Field(..., ge=0)
    packets_noi: int = Field(..., ge=1)
    collision_rate: float
    events_executed: int = Field(..., ge=0)
    cpu_time_s: float = Field(..., ge=0)

    @validator("collision_rate")
    def rate_validator(cls, v):
        if not 0 <= v <= 1:
            raise ValueError("collision rate in range [0, 1] allowed")
        return v


class ResultRow(BaseModel):
    k: int
    t_max: int
    repetition: int
    mode: RunMode
    collisions: int
    packets: int
    collision_rate: float
    events_executed: int
    cpu_time_s: float
    seed: int


class SweepRow(BaseModel):
    k: int
    t_max: int
    runs: int
    mean_collision_rate: float
    speedup_min: Optional[float] = None
    speedup_mean: Optional[float] = None
    speedup_max: Optional[float] = None
    event_reduction_min: Optional[float] = None
    event_reduction_mean: Optional[float] = None
    event_reduction_max: Optional[float] = None
    event_reduction_pooled: Optional[float] = None

    @root_validator(skip_on_failure=True)
    def check_order(cls, values):
        for name in ("speedup", "event_reduction"):
            low, mean, high = (values[f"{name}_{agg}"] for agg in ("min", "mean", "max"))
            if mean is not None and not low <= mean <= high:
                raise ValueError(f"{name}: expected min <= mean <= max")
        return values


class EquivalenceReport(BaseModel):
    label: str
    baseline: RunResult
    skipping: RunResult
    first_divergence: Optional[str] = None
    pair_trace: List[str] = []

    @property
    def equal(self) -> bool:
        return (
            self.baseline.collisions_noi == self.skipping.collisions_noi
            and self.baseline.packets_noi == self.skipping.packets_noi
        )

    def dump(self) -> str:
        lines = [
            f"{self.label}: baseline {self.baseline.collisions_noi}/"
            f"{self.baseline.packets_noi} collisions in {self.baseline.events_executed} events, "
            f"skipping {self.skipping.collisions_noi}/{self.skipping.packets_noi} "
            f"in {self.skipping.events_executed} events"
        ]
        if self.first_divergence:
            lines.append(f"first divergence: {self.first_divergence}")
        lines.extend(f"  {line}" for line in self.pair_trace)
        return "\n".join(lines)
