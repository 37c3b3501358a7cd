from pathlib import Path

from pydantic import BaseSettings, Field

# BLE link layer
SYMBOL_TIME_US: int = 8  # per byte at 1 MHz
DEFAULT_PACKET_BYTES: int = 37
DEFAULT_IFS_US: int = 150
DEFAULT_CHANNELS: int = 37
CONNECTION_INTERVAL_STEP_US: int = 1250
MIN_CONNECTION_INTERVAL_US: int = 7500
MAX_CONNECTION_INTERVAL_US: int = 10_240_000

# experiment defaults
DEFAULT_NETWORKS: int = 3
DEFAULT_EXPERIMENT_CHANNELS: int = 2
DEFAULT_SWEEP_END_US: int = 100_000
DEFAULT_REPETITIONS: int = 20
DEFAULT_HORIZON_CAP_US: int = 1_000_000_000
MAX_HYPERPERIOD_US: int = 2 ** 63 - 1

RUNS_FILENAME = "runs_v1.csv"
SWEEP_FILENAME = "sweep_v1.csv"
CONFIG_FILENAME = "config.json"


def is_on_grid(value_us: int) -> bool:
    return value_us % CONNECTION_INTERVAL_STEP_US == 0


class Settings(BaseSettings):
    output_dir: Path = Field(Path("results"), env="BLESIM_OUTPUT_DIR")
    run_load_tests: bool = Field(False, env="LOAD_TESTS")


settings = Settings()
