"""Randomised experiments: scenario draws, repetitions over a T_max sweep and aggregation."""
import logging
import math
from dataclasses import dataclass, field
from itertools import groupby
from multiprocessing.pool import Pool
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from numpy.random import SFC64, Generator, SeedSequence

from blesim.ble import (HorizonOverflow, capped_sim_duration, connection_event_duration,
                        optimal_sim_duration, total_grid_points)
from blesim.config import CONNECTION_INTERVAL_STEP_US
from blesim.engine import SimulationTimeout
from blesim.schemas import (EquivalenceReport, ExperimentConfig, HorizonPolicy,
                            NetworkConfig, ResultRow, RunMode, RunResult, Scenario,
                            SweepRow)
from blesim.simulation import (BaselineSimulation, SkippingSimulation,
                               make_simulation)
from blesim.skip import SkipConfigurationError, SkipSafetyError

logger = logging.getLogger(__name__)

TRACE_LINES = 20


def stream_rng(seed: int, k: int, repetition: int) -> Generator:
    """Independent stream per sweep point and repetition, regardless of execution order."""
    return Generator(SFC64(SeedSequence(seed, spawn_key=(k, repetition))))


def scenario_horizon(networks: List[NetworkConfig], cfg: ExperimentConfig) -> int:
    if cfg.horizon_policy is HorizonPolicy.capped:
        return capped_sim_duration(
            networks, cfg.hop, cfg.n_channels, cfg.horizon_cap, cfg.max_hyperperiod
        )
    return optimal_sim_duration(networks, cfg.hop, cfg.n_channels, cfg.max_hyperperiod)


def draw_scenario(rng: Generator, cfg: ExperimentConfig, t_max: int) -> Scenario:
    points = total_grid_points(cfg.t_min, t_max, CONNECTION_INTERVAL_STEP_US)
    intervals = sorted(
        (
            cfg.t_min + CONNECTION_INTERVAL_STEP_US * int(point)
            for point in rng.integers(0, points, size=cfg.networks)
        ),
        reverse=True,
    )
    noi_id = cfg.noi_rank - 1
    noi_phi = connection_event_duration(cfg.n_pkg_m, cfg.n_pkg_s, cfg.d_ifs)
    networks = []
    for network_id, t_c in enumerate(intervals):
        phi = noi_phi if network_id == noi_id else int(rng.integers(0, t_c, endpoint=True))
        networks.append(
            NetworkConfig(
                network_id=network_id,
                t_c=t_c,
                phi=phi,
                n_pkg_m=cfg.n_pkg_m,
                n_pkg_s=cfg.n_pkg_s,
                d_ifs=cfg.d_ifs,
                hop=cfg.hop,
                n_channels=cfg.n_channels,
                initial_channel=int(rng.integers(0, cfg.n_channels)),
            )
        )
    return Scenario(networks=networks, noi_id=noi_id, d_sim=scenario_horizon(networks, cfg))


def run_single(
    scenario: Scenario,
    mode: RunMode,
    wall_clock_limit_s: Optional[float] = None,
    validate: bool = False,
) -> RunResult:
    return make_simulation(scenario, mode, wall_clock_limit_s, validate=validate).run()


def _divergence(
    baseline: BaselineSimulation, skipping: SkippingSimulation
) -> Tuple[str, List[str]]:
    noi = baseline.noi
    in_baseline = baseline.collided_packets()
    in_skipping = skipping.collided_packets()
    differing = sorted(in_baseline ^ in_skipping)
    if not differing:
        return (
            f"packets of interest: baseline executed {baseline.packets_of_interest()}, "
            f"skipping derived {skipping.packets_of_interest()}",
            [],
        )
    packet = differing[0]
    k = packet.conn_event_index
    description = (
        f"connection event {k} of network {noi.network_id} "
        f"({packet.role.name.lower()} packet, t={noi.anchor(k)}): "
        f"collided in baseline={packet in in_baseline}, in skipping={packet in in_skipping}"
    )
    spanning = [
        record.describe()
        for record in skipping.records or []
        if record.pair.noi_index <= k
        and (record.next_pair is None or record.next_pair.noi_index >= k)
    ]
    return description, spanning[-TRACE_LINES:]


def verify_equivalence(
    scenario: Scenario, wall_clock_limit_s: Optional[float] = None, label: str = "scenario"
) -> EquivalenceReport:
    """Run both engines and compare the figures of the network of interest."""
    baseline = BaselineSimulation(scenario, wall_clock_limit_s)
    skipping = SkippingSimulation(scenario, wall_clock_limit_s, validate=True, record=True)
    report = EquivalenceReport(label=label, baseline=baseline.run(), skipping=skipping.run())
    if not report.equal:
        report.first_divergence, report.pair_trace = _divergence(baseline, skipping)
    return report


class RepetitionOutcome(NamedTuple):
    rows: List[ResultRow]
    mismatch: Optional[str]
    skipped: bool


def run_repetition(cfg: ExperimentConfig, k: int, t_max: int, repetition: int) -> RepetitionOutcome:
    label = f"k={k} T_max={t_max} repetition={repetition}"
    mismatch = None
    try:
        scenario = draw_scenario(stream_rng(cfg.seed, k, repetition), cfg, t_max)
        if cfg.mode is RunMode.verify:
            report = verify_equivalence(scenario, cfg.wall_clock_limit_s, label)
            results = [report.baseline, report.skipping]
            if not report.equal:
                mismatch = report.dump()
                logger.error("verification mismatch\n%s", mismatch)
        else:
            results = [run_single(scenario, cfg.mode, cfg.wall_clock_limit_s)]
    except (HorizonOverflow, SimulationTimeout, SkipConfigurationError) as e:
        logger.warning("%s skipped: %s", label, e.message)
        return RepetitionOutcome([], None, True)
    except SkipSafetyError as e:
        logger.error("%s: %s", label, e.message)
        return RepetitionOutcome([], f"{label}: {e.message}", False)
    rows = [
        ResultRow(
            k=k,
            t_max=t_max,
            repetition=repetition,
            mode=result.mode,
            collisions=result.collisions_noi,
            packets=result.packets_noi,
            collision_rate=result.collision_rate,
            events_executed=result.events_executed,
            cpu_time_s=result.cpu_time_s,
            seed=cfg.seed,
        )
        for result in results
    ]
    return RepetitionOutcome(rows, mismatch, False)


def _run_job(job: Tuple[ExperimentConfig, int, int, int]) -> RepetitionOutcome:
    return run_repetition(*job)


def _summary(values: Sequence[float]) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    if not values:
        return None, None, None
    low, high = min(values), max(values)
    mean = math.fsum(values) / len(values)
    return low, min(max(mean, low), high), high


def aggregate(rows: Sequence[ResultRow]) -> List[SweepRow]:
    """Fold per-run rows into one sweep row per T_max, in (k, repetition) order.

    Runs whose skipping engine executed no event are left out of the
    per-run reduction statistics; the pooled reduction divides the summed
    event counts and keeps them.
    """
    ordered = sorted(rows, key=lambda row: (row.k, row.repetition, row.mode.value))
    sweep = []
    for (k, t_max), group in groupby(ordered, key=lambda row: (row.k, row.t_max)):
        by_repetition: Dict[int, Dict[RunMode, ResultRow]] = {}
        for row in group:
            by_repetition.setdefault(row.repetition, {})[row.mode] = row
        rates, speedups, reductions = [], [], []
        baseline_events = skipping_events = 0
        for runs in by_repetition.values():
            baseline, skipping = runs.get(RunMode.baseline), runs.get(RunMode.skip)
            rates.append((baseline or skipping).collision_rate)
            if baseline is None or skipping is None:
                continue
            if skipping.cpu_time_s > 0:
                speedups.append(baseline.cpu_time_s / skipping.cpu_time_s)
            baseline_events += baseline.events_executed
            skipping_events += skipping.events_executed
            if skipping.events_executed > 0:
                reductions.append(baseline.events_executed / skipping.events_executed)
        speedup_min, speedup_mean, speedup_max = _summary(speedups)
        reduction_min, reduction_mean, reduction_max = _summary(reductions)
        sweep.append(
            SweepRow(
                k=k,
                t_max=t_max,
                runs=len(by_repetition),
                mean_collision_rate=math.fsum(rates) / len(rates),
                speedup_min=speedup_min,
                speedup_mean=speedup_mean,
                speedup_max=speedup_max,
                event_reduction_min=reduction_min,
                event_reduction_mean=reduction_mean,
                event_reduction_max=reduction_max,
                event_reduction_pooled=baseline_events / skipping_events if skipping_events else None,
            )
        )
    return sweep


@dataclass
class SweepResult:
    rows: List[ResultRow] = field(default_factory=list)
    sweep: List[SweepRow] = field(default_factory=list)
    mismatches: List[str] = field(default_factory=list)
    skipped: int = 0


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    jobs = [
        (cfg, k, t_max, repetition)
        for k, t_max in enumerate(cfg.t_max_values())
        for repetition in range(cfg.repetitions)
    ]
    logger.info("running %d repetitions in %s mode", len(jobs), cfg.mode.value)
    if workers > 1:
        with Pool(workers) as pool:
            outcomes = list(pool.imap(_run_job, jobs))
    else:
        outcomes = [_run_job(job) for job in jobs]

    result = SweepResult()
    for outcome in outcomes:
        result.rows.extend(outcome.rows)
        if outcome.mismatch is not None:
            result.mismatches.append(outcome.mismatch)
        result.skipped += outcome.skipped
    result.sweep = aggregate(result.rows)
    if result.skipped:
        logger.warning("%d of %d repetitions skipped", result.skipped, len(jobs))
    return result
