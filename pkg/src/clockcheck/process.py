"""Marked Poisson-clock simulation, run two distributionally identical ways.

The *serial* run drives one merged clock of rate N from a single sample
stream: each event costs two pipeline draws (one exponential time increment
at rate N, one uniform mark pick).  The *parallel* run gives each of the N
clocks its own rate-1 stream (or gives each worker a stream shared
round-robin by its clocks) and merges the per-clock event lists afterwards.
Superposition makes the two processes the same in law whenever the sample
source is actually uniform — so any statistical daylight between them is
evidence against the source, and that asymmetry (two draws per serial event
versus one per parallel tick) is exactly what makes a biased source damage
the two sides differently.

Draws pass through a three-stage pipeline: fault model (the injected
defect), optional measure-preserving transform, optional window
rejection-rescale repair.  Serial and per-clock-parallel runs have both a
scalar path and a vectorised block path that are bit-identical; the block
path is the default, and the scalar path doubles as the seam for injecting
degenerate test sources.

Horizon rule: an event whose time would exceed the horizon is suppressed
(its time draw is still consumed), and the trajectory ends at the last
emitted event.  Stream ids are fixed: serial = 0, clock i = 1 + i, worker w
= 10**6 + w, so any run can be replayed stream-by-stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .rng import (
    MASK64,
    MAPPING_STREAM,
    SERIAL_STREAM,
    FaultModel,
    GeneratorState,
    IDEAL,
    SourceStream,
    clock_stream,
    fault_block,
    next_unit,
    substream,
    worker_stream,
)
from .transforms import RescaleWindow, Transform, rejection_rescale, transform_block

__all__ = [
    "Event",
    "Trajectory",
    "StreamMode",
    "SerialConfig",
    "ParallelConfig",
    "exp_increment",
    "simulate_serial",
    "simulate_parallel",
    "merge",
    "PipelineSource",
    "build_pipeline",
    "pipeline_block",
    "block_mapping",
    "round_robin_mapping",
    "shuffle_mapping",
    "make_mapping",
    "MAPPING_KINDS",
]

_TOP = 1.0 - 2.0**-53
_STARVATION_DRAWS = 524_288  # zero window hits in this many draws = config bug


class Event(NamedTuple):
    """One clock tick: when, which clock, and the stream's draw count at emission."""

    time: float
    mark: int
    draw_index: int


@dataclass(frozen=True)
class Trajectory:
    """A time-sorted event record plus draw accounting.

    ``times``/``marks``/``draw_indices`` are parallel arrays.  ``total_draws``
    counts every raw draw the run consumed, including draws behind suppressed
    events and rejection retries, so it generally exceeds the draws visible
    in ``draw_indices``.
    """

    times: np.ndarray
    marks: np.ndarray
    draw_indices: np.ndarray
    total_draws: int
    n_clocks: int

    def __post_init__(self) -> None:
        if self.times.size and np.any(np.diff(self.times) < 0.0):
            raise RuntimeError("internal error: trajectory times are not sorted")

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def final_time(self) -> float:
        """Time of the last emitted event (0.0 for an empty trajectory)."""
        return float(self.times[-1]) if self.times.size else 0.0

    @property
    def per_clock_ticks(self) -> np.ndarray:
        return np.bincount(self.marks, minlength=self.n_clocks)

    def events(self) -> Iterator[Event]:
        for t, m, d in zip(self.times.tolist(), self.marks.tolist(), self.draw_indices.tolist()):
            yield Event(t, int(m), int(d))

    def inter_event_times(self) -> np.ndarray:
        """Gaps between consecutive events, the first measured from time 0."""
        return np.diff(self.times, prepend=0.0)


class StreamMode(str, Enum):
    PER_CLOCK = "per_clock"
    PER_WORKER = "per_worker"


def _validate_common(n_clocks: int, horizon: float, seed: int) -> None:
    if n_clocks < 1:
        raise ValueError(f"n_clocks must be >= 1, got {n_clocks}")
    if not (np.isfinite(horizon) and horizon > 0):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")


@dataclass(frozen=True)
class SerialConfig:
    """Merged-clock run: N clocks folded into one rate-N stream (id 0)."""

    n_clocks: int
    horizon: float
    seed: int
    fault: FaultModel = IDEAL
    transform: Optional[Transform] = None
    fix_window: Optional[RescaleWindow] = None

    def __post_init__(self) -> None:
        _validate_common(self.n_clocks, self.horizon, self.seed)


@dataclass(frozen=True)
class ParallelConfig:
    """Per-clock run: N independent rate-1 clocks hosted by ``workers`` workers.

    ``mapping[i]`` is the worker hosting clock ``i``.  In per-clock stream
    mode the mapping cannot influence the result (each clock owns stream
    ``1 + i``); in per-worker mode clocks draw round-robin from their
    worker's stream (id ``10**6 + w``), so the mapping changes the numbers
    but not the law.
    """

    n_clocks: int
    horizon: float
    seed: int
    fault: FaultModel = IDEAL
    transform: Optional[Transform] = None
    fix_window: Optional[RescaleWindow] = None
    workers: int = 1
    mapping: Optional[tuple[int, ...]] = None
    stream_mode: StreamMode = StreamMode.PER_CLOCK

    def __post_init__(self) -> None:
        _validate_common(self.n_clocks, self.horizon, self.seed)
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.mapping is None:
            object.__setattr__(self, "mapping", block_mapping(self.n_clocks, self.workers))
        if len(self.mapping) != self.n_clocks:
            raise ValueError("mapping must assign every clock a worker")
        if any(not 0 <= w < self.workers for w in self.mapping):
            raise ValueError(f"mapping worker ids must lie in [0, {self.workers})")


def exp_increment(u: float, rate: float) -> float:
    """Exponential waiting time ``-log(u) / rate``; finite and positive.

    Uses the numpy log kernel so the scalar and block simulation paths agree
    bitwise.
    """
    if not (0.0 < u < 1.0):
        raise ValueError(f"u must lie strictly inside (0, 1), got {u}")
    if not (np.isfinite(rate) and rate > 0):
        raise ValueError(f"rate must be positive and finite, got {rate}")
    return float(-np.log(np.float64(u)) / np.float64(rate))


# --------------------------------------------------------------------------
# the draw pipeline: fault -> transform -> window rescale


class PipelineSource:
    """Scalar draw cursor through the full fault/transform/fix pipeline."""

    __slots__ = ("stream", "transform", "window", "window_discards")

    def __init__(
        self,
        stream: SourceStream,
        transform: Optional[Transform] = None,
        window: Optional[RescaleWindow] = None,
    ):
        self.stream = stream
        self.transform = transform
        self.window = window
        self.window_discards = 0

    def _pre_window(self) -> float:
        u = self.stream.next()
        return self.transform(u) if self.transform is not None else u

    def next(self) -> float:
        if self.window is None:
            return self._pre_window()
        y, discarded = rejection_rescale(self.window, self._pre_window)
        self.window_discards += discarded
        return y

    @property
    def raw_draws(self) -> int:
        return self.stream.raw_draws

    @property
    def fault_discards(self) -> int:
        return self.stream.fault_discards


def build_pipeline(
    seed: int,
    stream_id: int,
    fault: FaultModel = IDEAL,
    transform: Optional[Transform] = None,
    window: Optional[RescaleWindow] = None,
) -> PipelineSource:
    return PipelineSource(SourceStream(seed, stream_id, fault), transform, window)


def pipeline_block(
    fault: FaultModel,
    transform: Optional[Transform],
    window: Optional[RescaleWindow],
    gs: GeneratorState,
    n: int,
) -> tuple[np.ndarray, np.ndarray]:
    """First ``n`` pipeline samples from ``gs`` with absolute raw-draw counts.

    Bit-identical to ``n`` scalar :class:`PipelineSource` draws from the
    same state (the scalar/block agreement of every stage composes).
    """
    if window is None:
        samples, at_draw, _ = fault_block(fault, gs, n)
        if transform is not None:
            samples = transform_block(transform, samples)
        return samples, at_draw
    keep_rate = max(window.width, 1e-3)
    m = max(64, int(1.5 * n / keep_rate) + 16)
    while True:
        samples, at_draw, _ = fault_block(fault, gs, m)
        if transform is not None:
            samples = transform_block(transform, samples)
        inside = (samples > window.a) & (samples < window.b)
        accepted = int(inside.sum())
        if accepted == 0 and m >= _STARVATION_DRAWS:
            # zero hits in this many draws means the window and the pipeline
            # are disjoint (any width above ~1e-4 would have landed by now);
            # doubling further would only spin until the machine gives out.
            raise RuntimeError(
                f"window ({window.a}, {window.b}) rejected {m} pipeline draws "
                "without a single acceptance; the pipeline never lands inside it"
            )
        if accepted < n:
            m *= 2
            continue
        kept = samples[inside]
        y = (kept - window.a) / window.width
        y[y >= 1.0] = _TOP
        y[y <= 0.0] = 5e-324
        return y[:n], at_draw[inside][:n]


# --------------------------------------------------------------------------
# simulators


def simulate_serial(cfg: SerialConfig, source=None) -> Trajectory:
    """Run the merged clock to the horizon.

    Each event consumes two pipeline draws: u1 sets the time increment
    ``exp_increment(u1, N)``, u2 sets the mark ``min(floor(u2*N), N-1)``.
    The loop stops at the first event whose time would exceed the horizon
    (that event's u1 is consumed, its u2 is not).

    ``source`` (scalar draw object with ``.next()`` and ``.raw_draws``)
    replaces the whole fault/transform/fix pipeline when given — the seam
    for degenerate test streams and scalar/block equality checks.
    """
    if source is not None:
        return _simulate_serial_scalar(cfg, source)
    n = cfg.n_clocks
    gs = substream(cfg.seed, SERIAL_STREAM)
    m = 2 * (int(2.5 * n * cfg.horizon) + 32)
    while True:
        samples, at_draw = pipeline_block(cfg.fault, cfg.transform, cfg.fix_window, gs, m)
        u1 = samples[0::2]
        u2 = samples[1::2]
        times = np.cumsum(-np.log(u1) / n)
        k = int(np.searchsorted(times, cfg.horizon, side="right"))
        if k >= u1.size:  # never saw the suppressed event; widen and redo
            m *= 2
            continue
        marks = np.minimum((u2[:k] * n).astype(np.int64), n - 1)
        return Trajectory(
            times=times[:k],
            marks=marks,
            draw_indices=at_draw[1::2][:k].astype(np.int64),
            total_draws=int(at_draw[2 * k]),
            n_clocks=n,
        )


def _simulate_serial_scalar(cfg: SerialConfig, source) -> Trajectory:
    n = cfg.n_clocks
    times, marks, draw_indices = [], [], []
    t = 0.0
    while True:
        u1 = source.next()
        t_next = t + exp_increment(u1, float(n))
        if t_next > cfg.horizon:
            break
        u2 = source.next()
        times.append(t_next)
        marks.append(min(int(u2 * n), n - 1))
        draw_indices.append(source.raw_draws)
        t = t_next
    return Trajectory(
        times=np.asarray(times, dtype=np.float64),
        marks=np.asarray(marks, dtype=np.int64),
        draw_indices=np.asarray(draw_indices, dtype=np.int64),
        total_draws=source.raw_draws,
        n_clocks=n,
    )


def simulate_parallel(cfg: ParallelConfig, source_factory=None) -> Trajectory:
    """Run N independent rate-1 clocks and merge their event lists.

    ``source_factory`` (stream-owner id -> scalar draw object) replaces the
    pipeline when given; the owner id is the clock index in per-clock mode
    and the worker index in per-worker mode.
    """
    if cfg.stream_mode is StreamMode.PER_CLOCK:
        return _simulate_per_clock(cfg, source_factory)
    return _simulate_per_worker(cfg, source_factory)


def _clock_events_block(cfg: ParallelConfig, clock: int) -> tuple[np.ndarray, np.ndarray, int]:
    gs = substream(cfg.seed, clock_stream(clock))
    m = int(2.5 * cfg.horizon) + 32
    while True:
        samples, at_draw = pipeline_block(cfg.fault, cfg.transform, cfg.fix_window, gs, m)
        times = np.cumsum(-np.log(samples) / 1.0)
        k = int(np.searchsorted(times, cfg.horizon, side="right"))
        if k >= samples.size:
            m *= 2
            continue
        return times[:k], at_draw[:k].astype(np.int64), int(at_draw[k])


def _clock_events_scalar(cfg: ParallelConfig, source) -> tuple[np.ndarray, np.ndarray, int]:
    times, draws = [], []
    t = 0.0
    while True:
        u = source.next()
        t_next = t + exp_increment(u, 1.0)
        if t_next > cfg.horizon:
            break
        times.append(t_next)
        draws.append(source.raw_draws)
        t = t_next
    return (np.asarray(times, dtype=np.float64),
            np.asarray(draws, dtype=np.int64),
            source.raw_draws)


def _simulate_per_clock(cfg: ParallelConfig, source_factory) -> Trajectory:
    parts_t, parts_m, parts_d = [], [], []
    total = 0
    for clock in range(cfg.n_clocks):
        if source_factory is None:
            t, d, consumed = _clock_events_block(cfg, clock)
        else:
            t, d, consumed = _clock_events_scalar(cfg, source_factory(clock))
        parts_t.append(t)
        parts_m.append(np.full(t.size, clock, dtype=np.int64))
        parts_d.append(d)
        total += consumed
    return _merge_arrays(parts_t, parts_m, parts_d, n_clocks=cfg.n_clocks, total_draws=total)


def _simulate_per_worker(cfg: ParallelConfig, source_factory) -> Trajectory:
    parts_t = [[] for _ in range(cfg.n_clocks)]
    parts_d = [[] for _ in range(cfg.n_clocks)]
    total = 0
    for w in range(cfg.workers):
        clocks = [i for i in range(cfg.n_clocks) if cfg.mapping[i] == w]
        if not clocks:
            continue
        if source_factory is None:
            source = build_pipeline(cfg.seed, worker_stream(w), cfg.fault,
                                    cfg.transform, cfg.fix_window)
        else:
            source = source_factory(w)
        clock_time = {i: 0.0 for i in clocks}
        alive = list(clocks)  # already ascending
        while alive:
            for i in tuple(alive):  # one tick per live clock, ascending id
                u = source.next()
                t_next = clock_time[i] + exp_increment(u, 1.0)
                if t_next > cfg.horizon:
                    alive.remove(i)
                    continue
                clock_time[i] = t_next
                parts_t[i].append(t_next)
                parts_d[i].append(source.raw_draws)
        total += source.raw_draws
    return _merge_arrays(
        [np.asarray(t, dtype=np.float64) for t in parts_t],
        [np.full(len(t), i, dtype=np.int64) for i, t in enumerate(parts_t)],
        [np.asarray(d, dtype=np.int64) for d in parts_d],
        n_clocks=cfg.n_clocks,
        total_draws=total,
    )


# --------------------------------------------------------------------------
# merging


def _merge_arrays(
    parts_t: Sequence[np.ndarray],
    parts_m: Sequence[np.ndarray],
    parts_d: Sequence[np.ndarray],
    *,
    n_clocks: int,
    total_draws: int,
) -> Trajectory:
    for t in parts_t:
        if t.size and np.any(np.diff(t) < 0.0):
            raise RuntimeError("internal error: unsorted per-clock event list")
    times = np.concatenate(parts_t) if parts_t else np.empty(0, dtype=np.float64)
    marks = np.concatenate(parts_m) if parts_m else np.empty(0, dtype=np.int64)
    draws = np.concatenate(parts_d) if parts_d else np.empty(0, dtype=np.int64)
    order = np.lexsort((marks, times))  # time first, ties by ascending mark
    return Trajectory(
        times=times[order],
        marks=marks[order],
        draw_indices=draws[order],
        total_draws=total_draws,
        n_clocks=n_clocks,
    )


def merge(
    parts: Sequence[Sequence[Event]],
    *,
    n_clocks: Optional[int] = None,
    total_draws: Optional[int] = None,
) -> Trajectory:
    """Time-sorted merge of per-clock event lists, ties broken by ascending mark.

    Each part must be individually time-sorted (violations raise
    RuntimeError: they indicate a simulator bug, not bad user input).  When
    ``total_draws`` is omitted it is estimated as the sum of each part's
    final draw index, which undercounts the draws behind suppressed events —
    the simulators always pass the exact figure.
    """
    parts_t = [np.asarray([e.time for e in p], dtype=np.float64) for p in parts]
    parts_m = [np.asarray([e.mark for e in p], dtype=np.int64) for p in parts]
    parts_d = [np.asarray([e.draw_index for e in p], dtype=np.int64) for p in parts]
    if n_clocks is None:
        n_clocks = max((int(m.max()) + 1 for m in parts_m if m.size), default=1)
    if total_draws is None:
        total_draws = sum(int(d[-1]) for d in parts_d if d.size)
    return _merge_arrays(parts_t, parts_m, parts_d, n_clocks=n_clocks, total_draws=total_draws)


# --------------------------------------------------------------------------
# clock -> worker mapping generators


def block_mapping(n_clocks: int, workers: int) -> tuple[int, ...]:
    """Contiguous blocks: clock i -> worker i*P//N."""
    return tuple(i * workers // n_clocks for i in range(n_clocks))


def round_robin_mapping(n_clocks: int, workers: int) -> tuple[int, ...]:
    """Cyclic: clock i -> worker i mod P."""
    return tuple(i % workers for i in range(n_clocks))


def shuffle_mapping(n_clocks: int, workers: int, seed: int) -> tuple[int, ...]:
    """Blocks over a seed-determined permutation of the clocks.

    The permutation is a Fisher–Yates shuffle driven by the reserved mapping
    substream, so the mapping is a pure function of (seed, N, P).
    """
    perm = list(range(n_clocks))
    gs = substream(seed, MAPPING_STREAM)
    for i in range(n_clocks - 1, 0, -1):
        u, gs = next_unit(gs)
        j = min(int(u * (i + 1)), i)
        perm[i], perm[j] = perm[j], perm[i]
    mapping = [0] * n_clocks
    for position, clock in enumerate(perm):
        mapping[clock] = position * workers // n_clocks
    return tuple(mapping)


MAPPING_KINDS = ("blocks", "round_robin", "shuffle")


def make_mapping(kind: str, n_clocks: int, workers: int, seed: int = 0) -> tuple[int, ...]:
    if kind == "blocks":
        return block_mapping(n_clocks, workers)
    if kind == "round_robin":
        return round_robin_mapping(n_clocks, workers)
    if kind == "shuffle":
        return shuffle_mapping(n_clocks, workers, seed)
    raise ValueError(f"unknown mapping name: {kind!r} (expected one of {MAPPING_KINDS})")
