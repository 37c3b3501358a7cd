"""Result files: per-run and per-sweep CSV tables plus the canonical experiment config."""
import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence

from pydantic import BaseModel, ValidationError

from blesim import config
from blesim.schemas import ExperimentConfig, ResultRow, SweepRow

logger = logging.getLogger(__name__)

RUN_COLUMNS = (
    "k",
    "t_max",
    "repetition",
    "mode",
    "collisions",
    "packets",
    "collision_rate",
    "events_executed",
    "cpu_time_s",
    "seed",
)

SWEEP_COLUMNS = (
    "k",
    "t_max",
    "runs",
    "mean_collision_rate",
    "speedup_min",
    "speedup_mean",
    "speedup_max",
    "event_reduction_min",
    "event_reduction_mean",
    "event_reduction_max",
    "event_reduction_pooled",
)


class StorageError(Exception):
    def __init__(self, path: Path, reason: str):
        self.path = path
        self.message = f"{path}: {reason}"
        super().__init__(self.message)


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def write_table(path: Path, columns: Sequence[str], rows: Iterable[BaseModel]) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_cell(getattr(row, column)) for column in columns])
    except OSError as e:
        raise StorageError(path, e.strerror or str(e))


def _read_table(path: Path, columns: Sequence[str], model):
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != tuple(columns):
                raise StorageError(path, f"unexpected header {reader.fieldnames}")
            return [
                model(**{key: (value if value != "" else None) for key, value in record.items()})
                for record in reader
            ]
    except OSError as e:
        raise StorageError(path, e.strerror or str(e))
    except ValidationError as e:
        raise StorageError(path, str(e))


def read_run_rows(path: Path) -> List[ResultRow]:
    return _read_table(path, RUN_COLUMNS, ResultRow)


def read_sweep_rows(path: Path) -> List[SweepRow]:
    return _read_table(path, SWEEP_COLUMNS, SweepRow)


def dump_config(experiment: ExperimentConfig, path: Path) -> None:
    try:
        path.write_text(experiment.canonical_json() + "\n")
    except OSError as e:
        raise StorageError(path, e.strerror or str(e))


def load_config(path: Path) -> dict:
    """Raw key-value document; validation happens once flags are merged in."""
    try:
        document = ExperimentConfig.__config__.json_loads(path.read_text())
    except OSError as e:
        raise StorageError(path, e.strerror or str(e))
    except ValueError as e:
        raise StorageError(path, f"invalid JSON: {e}")
    if not isinstance(document, dict):
        raise StorageError(path, "expected a JSON object")
    return document


def emit_results(
    rows: Sequence[ResultRow],
    sweep: Sequence[SweepRow],
    out_dir: Path,
    experiment: ExperimentConfig,
) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(out_dir, e.strerror or str(e))
    dump_config(experiment, out_dir / config.CONFIG_FILENAME)
    write_table(out_dir / config.RUNS_FILENAME, RUN_COLUMNS, rows)
    write_table(out_dir / config.SWEEP_FILENAME, SWEEP_COLUMNS, sweep)
    logger.info("wrote %d run rows and %d sweep rows to %s", len(rows), len(sweep), out_dir)
