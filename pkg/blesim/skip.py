"""Pairwise event skipping between an interfering network and the network of interest.

Two cyclic event trains with intervals T_l <= T_h are compared through the
offset phi = t_L - t_H of an L event against an H event. Stepping the H train
by one interval moves the offset of the L event closest to it by a constant
gamma, so the next pair that can overlap (|offset| <= d) is found in closed
form instead of by executing every event in between.

A prediction (k_h, k_l) names the pair k_h H intervals and k_l L intervals
ahead of the examined pair. Every overlapping pair other than the examined
one lies at or beyond the predicted pair in both trains.
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

from blesim.engine import SimulationError
from blesim.schemas import NetworkConfig

logger = logging.getLogger(__name__)
trace_logger = logging.getLogger("blesim.trace")


class SkipConfigurationError(SimulationError):
    def __init__(self, d: int, t_l: int):
        self.message = (
            f"overlap window {d} µs is too wide for skipping with T_l={t_l} µs "
            f"(requires 2*d < T_l)"
        )
        super().__init__(self.message)


class SkipSafetyError(SimulationError):
    def __init__(self, prediction: "SkipPrediction", overlap: Optional[Tuple[int, int]], phi: int):
        self.prediction = prediction
        self.message = (
            f"prediction {prediction} for phi={phi} skips the overlap "
            f"(k_l, k_h)={overlap}"
        )
        super().__init__(self.message)


class Mode(enum.Enum):
    constant = "constant"
    growing = "growing"
    shrinking = "shrinking"


class _Never:
    """Marks a pair that never overlaps. Supports no arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEVER"

    def __reduce__(self):
        return (_Never, ())


NEVER = _Never()

SkipCount = Union[int, _Never]


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


@dataclass(frozen=True)
class GammaProcess:
    t_l: int
    t_h: int
    gamma: int
    mode: Mode


def compute_gamma(t_l: int, t_h: int) -> GammaProcess:
    if not 0 < t_l <= t_h:
        raise ValueError(f"expected 0 < T_l <= T_h, got T_l={t_l}, T_h={t_h}")
    residue = t_h % t_l
    if residue == 0:
        return GammaProcess(t_l, t_h, 0, Mode.constant)
    if 2 * (t_l - residue) > t_l:
        return GammaProcess(t_l, t_h, residue, Mode.shrinking)
    return GammaProcess(t_l, t_h, t_l - residue, Mode.growing)


@dataclass(frozen=True)
class SkipPrediction:
    k_l: SkipCount
    k_h: SkipCount
    case: str
    k_p: Optional[int] = None
    k_pp: Optional[int] = None
    k_r: Optional[int] = None
    k_s: Optional[int] = None

    def __post_init__(self):
        if (self.k_l is NEVER) != (self.k_h is NEVER):
            raise ValueError("k_l and k_h must both be finite or both never")
        if self.k_l is not NEVER and (self.k_l < 1 or self.k_h < 1):
            raise ValueError(f"finite predictions must advance: {self}")

    @property
    def never(self) -> bool:
        return self.k_l is NEVER

    @classmethod
    def no_overlap(cls, case: str, **diagnostics) -> "SkipPrediction":
        return cls(NEVER, NEVER, case, **diagnostics)


def _normalize(phi: int, t_l: int, t_h: int, d: int) -> Tuple[int, int, int]:
    """Shift the examined pair so that phi lies in [-d, t_l - d).

    Returns the new offset and the H and L shifts. The L event of the shifted
    pair is the first one whose window does not end before the H event's.
    """
    if phi < -d:
        shift_l = ceil_div(-d - phi, t_l)
        return phi + shift_l * t_l, 0, shift_l
    if phi >= t_l - d:
        shift_h = ceil_div(phi - d, t_h)
        phi -= shift_h * t_h
        shift_l = max(0, ceil_div(-d - phi, t_l))
        return phi + shift_l * t_l, shift_h, shift_l
    return phi, 0, 0


def _matched_origin(shift_h: int, shift_l: int) -> SkipPrediction:
    if shift_h == 0:
        case = "early-match"
    elif shift_l == 0:
        case = "late-match"
    else:
        case = "realigned-match"
    return SkipPrediction(
        k_l=max(shift_l, 1), k_h=max(shift_h, 1), case=case, k_p=shift_l, k_s=shift_h
    )


def _advance(
    k_h: int, phi: int, t_l: int, t_h: int, d: int, shift_h: int, shift_l: int, case: str, **diagnostics
) -> SkipPrediction:
    # first L event whose window reaches the H event k_h intervals ahead
    k_l = ceil_div(k_h * t_h - phi - d, t_l)
    return SkipPrediction(
        k_l=k_l + shift_l, k_h=k_h + shift_h, case=case, k_s=shift_h, **diagnostics
    )


def predict_constant(phi: int, t_l: int, t_h: int, d: int) -> SkipPrediction:
    phi, shift_h, shift_l = _normalize(phi, t_l, t_h, d)
    if (shift_h or shift_l) and phi <= d:
        return _matched_origin(shift_h, shift_l)
    if phi > d:
        return SkipPrediction.no_overlap("1-never", k_p=shift_l, k_s=shift_h)
    k_r = ceil_div(t_h - phi - d, t_l) + shift_l
    return SkipPrediction(k_l=k_r, k_h=1 + shift_h, case="1-match", k_p=shift_l, k_r=k_r, k_s=shift_h)


def predict_growing(phi: int, t_l: int, t_h: int, d: int, gamma: int) -> SkipPrediction:
    phi, shift_h, shift_l = _normalize(phi, t_l, t_h, d)
    if (shift_h or shift_l) and phi <= d:
        return _matched_origin(shift_h, shift_l)
    # H intervals until the L offset wraps past t_l - d
    k_wrap = ceil_div(t_l - d - phi, gamma)
    k_p = (t_h - phi + d) // t_l
    if phi <= d:
        if phi + gamma <= d:
            return _advance(1, phi, t_l, t_h, d, shift_h, shift_l, "2c", k_p=k_p)
        k_pp = (t_h - phi) // t_l
        return _advance(k_wrap, phi, t_l, t_h, d, shift_h, shift_l, "2d", k_p=k_p, k_pp=k_pp)
    return _advance(k_wrap, phi, t_l, t_h, d, shift_h, shift_l, "2e", k_p=k_p)


def predict_shrinking(phi: int, t_l: int, t_h: int, d: int, gamma: int) -> SkipPrediction:
    phi, shift_h, shift_l = _normalize(phi, t_l, t_h, d)
    if (shift_h or shift_l) and phi <= d:
        return _matched_origin(shift_h, shift_l)
    if phi <= d:
        if phi - gamma >= -d:
            return _advance(1, phi, t_l, t_h, d, shift_h, shift_l, "3b", k_p=shift_l)
        k_h = max(1, ceil_div(t_l + phi - d, gamma))
        return _advance(k_h, phi, t_l, t_h, d, shift_h, shift_l, "3c", k_p=shift_l)
    return _advance(ceil_div(phi - d, gamma), phi, t_l, t_h, d, shift_h, shift_l, "3d", k_p=shift_l)


def predict(phi: int, process: GammaProcess, d: int) -> SkipPrediction:
    if 2 * d >= process.t_l:
        raise SkipConfigurationError(d, process.t_l)
    if process.mode is Mode.constant:
        return predict_constant(phi, process.t_l, process.t_h, d)
    if process.mode is Mode.growing:
        return predict_growing(phi, process.t_l, process.t_h, d, process.gamma)
    return predict_shrinking(phi, process.t_l, process.t_h, d, process.gamma)


def skip_quick_bound(phi: int, d: int, gamma: int) -> int:
    return (phi - d) // gamma


def total_packets(d_sim: int, t_c: int) -> int:
    if d_sim == 0:
        return 1
    return ceil_div(d_sim, t_c)


def default_oracle_steps(phi: int, t_l: int, t_h: int) -> int:
    return t_l // math.gcd(t_l, t_h) + ceil_div(abs(phi), t_h) + 1


def iter_overlaps(phi: int, t_l: int, t_h: int, d: int, max_steps: int) -> Iterator[Tuple[int, int]]:
    """Overlapping (k_l, k_h) with 0 <= k_h <= max_steps, by stepping both trains."""
    j = 0
    for i in range(max_steps + 1):
        start = i * t_h
        while phi + j * t_l < start - d:
            j += 1
        candidate = j
        while phi + candidate * t_l <= start + d:
            yield candidate, i
            candidate += 1


def oracle_next_overlap(
    phi: int, t_l: int, t_h: int, d: int, max_steps: Optional[int] = None
) -> Optional[Tuple[int, int]]:
    if max_steps is None:
        max_steps = default_oracle_steps(phi, t_l, t_h)
    for overlap in iter_overlaps(phi, t_l, t_h, d, max_steps):
        if overlap != (0, 0):
            return overlap
    return None


def is_safe_skip(prediction: SkipPrediction, k_l: int, k_h: int) -> bool:
    """Whether the overlap (k_l, k_h) is still executed under ``prediction``.

    Overlaps at or beyond the predicted pair are examined later; overlaps at
    the corners involve the examined events or the predicted ones.
    """
    if prediction.never:
        return (k_l, k_h) == (0, 0)
    if k_h >= prediction.k_h and k_l >= prediction.k_l:
        return True
    return k_h in (0, prediction.k_h) and k_l in (0, prediction.k_l)


class PairState(NamedTuple):
    """Connection-event ordinals of an interferer and the network of interest.

    Negative ordinals are virtual events before the first anchor.
    """

    network_id: int
    n_index: int
    noi_index: int


@dataclass(frozen=True)
class PairGeometry:
    process: GammaProcess
    d: int
    noi_is_h: bool


class PairUpdate(NamedTuple):
    prediction: SkipPrediction
    k_noi: SkipCount
    k_n: SkipCount
    pair: Optional[PairState]


@dataclass
class PredictionRecord:
    pair: PairState
    phi: int
    process: GammaProcess
    prediction: SkipPrediction
    next_pair: Optional[PairState]

    def describe(self) -> str:
        return (
            f"n={self.pair.network_id} pair=({self.pair.n_index},{self.pair.noi_index}) "
            f"phi={self.phi} T_l={self.process.t_l} T_h={self.process.t_h} "
            f"gamma={self.process.gamma} mode={self.process.mode.value} "
            f"case={self.prediction.case} k_l={self.prediction.k_l} k_h={self.prediction.k_h} "
            f"next={tuple(self.next_pair[1:]) if self.next_pair else None}"
        )


@dataclass
class SkipManager:
    noi: NetworkConfig
    validate: bool = False
    records: Optional[List[PredictionRecord]] = None
    _geometry: Dict[int, PairGeometry] = field(default_factory=dict)

    def geometry(self, net: NetworkConfig) -> PairGeometry:
        cached = self._geometry.get(net.network_id)
        if cached is None:
            noi_is_h = self.noi.t_c > net.t_c
            t_l, t_h = sorted((net.t_c, self.noi.t_c))
            d = max(net.d_e, self.noi.d_e)
            if 2 * d >= t_l:
                raise SkipConfigurationError(d, t_l)
            cached = PairGeometry(compute_gamma(t_l, t_h), d, noi_is_h)
            self._geometry[net.network_id] = cached
        return cached

    def offset(self, pair: PairState, net: NetworkConfig) -> int:
        t_n = net.anchor(pair.n_index)
        t_noi = self.noi.anchor(pair.noi_index)
        if self.geometry(net).noi_is_h:
            return t_n - t_noi
        return t_noi - t_n

    def can_overlap(self, pair: PairState, net: NetworkConfig) -> bool:
        return abs(self.offset(pair, net)) <= self.geometry(net).d

    def open_pair(self, net: NetworkConfig) -> PairState:
        """First examined pair: H event 0 against the first L event reaching its window."""
        geometry = self.geometry(net)
        phi = self.offset(PairState(net.network_id, 0, 0), net)
        l_index = ceil_div(-geometry.d - phi, geometry.process.t_l)
        if geometry.noi_is_h:
            return PairState(net.network_id, l_index, 0)
        return PairState(net.network_id, 0, l_index)

    def predict_pair(self, pair: PairState, net: NetworkConfig) -> PairUpdate:
        geometry = self.geometry(net)
        phi = self.offset(pair, net)
        prediction = predict(phi, geometry.process, geometry.d)
        if self.validate:
            self._check(prediction, phi, geometry)
        if prediction.never:
            update = PairUpdate(prediction, NEVER, NEVER, None)
        else:
            if geometry.noi_is_h:
                k_noi, k_n = prediction.k_h, prediction.k_l
            else:
                k_noi, k_n = prediction.k_l, prediction.k_h
            update = PairUpdate(
                prediction,
                k_noi,
                k_n,
                PairState(pair.network_id, pair.n_index + k_n, pair.noi_index + k_noi),
            )
        record = PredictionRecord(pair, phi, geometry.process, prediction, update.pair)
        if self.records is not None:
            self.records.append(record)
        if trace_logger.isEnabledFor(logging.DEBUG):
            trace_logger.debug(record.describe())
        return update

    @staticmethod
    def _check(prediction: SkipPrediction, phi: int, geometry: PairGeometry) -> None:
        process = geometry.process
        if prediction.never:
            overlap = oracle_next_overlap(phi, process.t_l, process.t_h, geometry.d)
            if overlap is not None:
                raise SkipSafetyError(prediction, overlap, phi)
            return
        for overlap in iter_overlaps(phi, process.t_l, process.t_h, geometry.d, prediction.k_h):
            if not is_safe_skip(prediction, *overlap):
                raise SkipSafetyError(prediction, overlap, phi)
