import decimal
import logging
from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional, Sequence

import click
from pydantic import ValidationError

from blesim import storage
from blesim.config import settings
from blesim.schemas import ExperimentConfig, HorizonPolicy, RunMode

logger = logging.getLogger(__name__)

# option name -> ExperimentConfig fields it sets
OPTION_FIELDS = {
    "networks": ("networks",),
    "tmin": ("t_min",),
    "tmax": ("t_max_end",),
    "tmax_start": ("t_max_start",),
    "step": ("t_max_step",),
    "reps": ("repetitions",),
    "channels": ("n_channels",),
    "hop": ("hop",),
    "packet_bytes": ("n_pkg_m", "n_pkg_s"),
    "slave_bytes": ("n_pkg_s",),
    "ifs": ("d_ifs",),
    "noi_rank": ("noi_rank",),
    "seed": ("seed",),
    "mode": ("mode",),
    "horizon": ("horizon_policy",),
    "horizon_cap": ("horizon_cap",),
    "time_limit": ("wall_clock_limit_s",),
}


def parse_duration(text: str) -> int:
    """Microseconds from "7500", "7500us" or "7.5ms"."""
    text = text.strip().lower()
    scale = 1
    if text.endswith("ms"):
        text, scale = text[:-2], 1000
    elif text.endswith("us") or text.endswith("µs"):
        text = text[:-2]
    try:
        value = decimal.Decimal(text.strip()) * scale
    except decimal.InvalidOperation:
        raise ValueError(f"not a duration: {text!r}")
    if value != value.to_integral_value() or value < 0:
        raise ValueError(f"duration must be a whole non-negative number of µs, got {value}")
    return int(value)


class Duration(click.ParamType):
    name = "duration"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        try:
            return parse_duration(value)
        except ValueError as e:
            self.fail(str(e), param, ctx)


DURATION = Duration()


class Invocation(NamedTuple):
    experiment: ExperimentConfig
    out_dir: Path
    trace_path: Optional[Path]
    workers: int
    verbose: bool


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON experiment config.")
@click.option("--mode", type=click.Choice([mode.value for mode in RunMode]))
@click.option("--networks", type=int, help="Number of networks N.")
@click.option("--tmin", type=DURATION, help="Smallest connection interval.")
@click.option("--tmax", type=DURATION, help="Largest T_max of the sweep.")
@click.option("--tmax-start", type=DURATION, help="First T_max of the sweep (default: tmin).")
@click.option("--step", type=DURATION, help="Sweep step, a multiple of 1.25ms.")
@click.option("--reps", type=int, help="Repetitions per T_max.")
@click.option("--channels", type=int, help="Number of used channels.")
@click.option("--hop", type=int, help="Hop increment.")
@click.option("--packet-bytes", type=int, help="Payload of master and slave packets.")
@click.option("--slave-bytes", type=int, help="Slave payload, 0 for master-only events.")
@click.option("--ifs", type=DURATION, help="Interframe space.")
@click.option("--noi-rank", type=int, help="Rank of the network of interest, 1 = longest interval.")
@click.option("--seed", type=int)
@click.option("--horizon", type=click.Choice([policy.value for policy in HorizonPolicy]))
@click.option("--horizon-cap", type=DURATION, help="Horizon limit for --horizon capped.")
@click.option("--time-limit", type=float, help="Wall-clock seconds per run before it is skipped.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), help="Prediction trace file.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("-v", "--verbose", is_flag=True)
def command(**params):
    """Simulate BLE collisions with and without event skipping."""
    return params


def merge_options(document: Dict[str, Any], params: Dict[str, Any]) -> Dict[str, Any]:
    values = dict(document)
    for option, fields in OPTION_FIELDS.items():
        if params.get(option) is None:
            continue
        for name in fields:
            values[name] = params[option]
    return values


def parse_args(argv: Sequence[str]) -> Invocation:
    """Raises click exceptions for usage errors and ``click.exceptions.Exit`` for --help."""
    ctx = command.make_context("blesim", list(argv))
    params = ctx.params
    document = {}
    if params["config_path"]:
        try:
            document = storage.load_config(Path(params["config_path"]))
        except storage.StorageError as e:
            raise click.BadParameter(e.message, ctx=ctx, param_hint="--config")
    try:
        experiment = ExperimentConfig(**merge_options(document, params))
    except ValidationError as e:
        raise click.UsageError(str(e), ctx=ctx)

    workers = params["workers"]
    trace_path = Path(params["trace_path"]) if params["trace_path"] else None
    if trace_path is not None and workers > 1:
        logger.info("tracing predictions, running with a single worker")
        workers = 1
    out_dir = Path(params["out_dir"]) if params["out_dir"] else settings.output_dir
    return Invocation(experiment, out_dir, trace_path, workers, params["verbose"])
