"""Event-generation tests: serial merged clock, parallel clocks, merging,
clock-to-worker mappings, and the scalar/block agreement seams."""

import math

import numpy as np
import pytest

from clockcheck.process import (
    MAPPING_KINDS,
    Event,
    ParallelConfig,
    SerialConfig,
    StreamMode,
    Trajectory,
    block_mapping,
    build_pipeline,
    exp_increment,
    make_mapping,
    merge,
    round_robin_mapping,
    shuffle_mapping,
    simulate_parallel,
    simulate_serial,
)
from clockcheck.rng import (
    IDEAL,
    LowThinning,
    PowerBias,
    clock_stream,
    worker_stream,
)
from clockcheck.transforms import Compose, Reflect, RescaleWindow, RotateHalf

_INV_E = math.exp(-1.0)


class _FeedSource:
    """Scalar source that replays a fixed list (cycling), counting draws."""

    def __init__(self, values):
        self._values = list(values)
        self.raw_draws = 0
        self.fault_discards = 0
        self.window_discards = 0

    def next(self) -> float:
        u = self._values[self.raw_draws % len(self._values)]
        self.raw_draws += 1
        return u


# ---------------------------------------------------------------------------
# exponential increments
# ---------------------------------------------------------------------------


def test_exp_increment_unit_example():
    assert exp_increment(_INV_E, 1.0) == 1.0


def test_exp_increment_halving_by_rate():
    assert exp_increment(0.5, 2.0) == float(-np.log(np.float64(0.5)) / np.float64(2.0))


def test_exp_increment_domain_errors():
    for bad_u in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            exp_increment(bad_u, 1.0)
    for bad_rate in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            exp_increment(0.5, bad_rate)


# ---------------------------------------------------------------------------
# degenerate constant streams (hand-checkable trajectories)
# ---------------------------------------------------------------------------


def test_serial_constant_stream_single_clock():
    # Every increment is exactly 1; the event at t=4 overruns the horizon
    # and is suppressed after its time draw, hence 2K+1 draws for K events.
    cfg = SerialConfig(n_clocks=1, horizon=3.5, seed=0)
    traj = simulate_serial(cfg, source=_FeedSource([_INV_E]))
    assert traj.times.tolist() == [1.0, 2.0, 3.0]
    assert traj.marks.tolist() == [0, 0, 0]
    assert traj.draw_indices.tolist() == [2, 4, 6]
    assert traj.total_draws == 7
    assert len(traj) == 3
    assert traj.final_time == 3.0


def test_serial_constant_stream_marks_scale_with_clock_count():
    cfg = SerialConfig(n_clocks=4, horizon=0.6, seed=0)
    traj = simulate_serial(cfg, source=_FeedSource([_INV_E, 0.9]))
    # rate N=4 quarters every gap; mark = min(floor(0.9 * 4), 3) = 3
    assert traj.times.tolist() == [0.25, 0.5]
    assert traj.marks.tolist() == [3, 3]
    assert traj.total_draws == 5


def test_parallel_constant_stream_interleaves_clocks():
    cfg = ParallelConfig(n_clocks=2, horizon=2.5, seed=0)
    traj = simulate_parallel(cfg, source_factory=lambda clock: _FeedSource([_INV_E]))
    assert traj.times.tolist() == [1.0, 1.0, 2.0, 2.0]
    assert traj.marks.tolist() == [0, 1, 0, 1]  # ties break by ascending mark
    assert traj.total_draws == 6  # each clock: 2 events + 1 suppressed draw


def test_per_worker_round_robin_hand_check():
    cfg = ParallelConfig(
        n_clocks=2,
        horizon=1.5,
        seed=0,
        workers=1,
        stream_mode=StreamMode.PER_WORKER,
    )
    feeds = []

    def factory(worker):
        feeds.append(_FeedSource([_INV_E]))
        return feeds[-1]

    traj = simulate_parallel(cfg, source_factory=factory)
    assert len(feeds) == 1  # single worker hosts both clocks
    assert traj.times.tolist() == [1.0, 1.0]
    assert traj.marks.tolist() == [0, 1]
    # round-robin order: c0 tick, c1 tick, then one overrun draw per clock
    assert traj.draw_indices.tolist() == [1, 2]
    assert traj.total_draws == 4


def test_per_worker_unequal_feeds_follow_rotation_order():
    # Distinct gaps per draw expose the strict c0, c1, c0, c1 rotation.
    cfg = ParallelConfig(
        n_clocks=2, horizon=1.0, seed=0, workers=1, stream_mode=StreamMode.PER_WORKER
    )
    feed = _FeedSource([math.exp(-0.3), math.exp(-0.7)])

    traj = simulate_parallel(cfg, source_factory=lambda worker: feed)
    # draws: c0 +0.3 -> 0.3, c1 +0.7 -> 0.7, c0 -> 0.6, c1 -> 1.4 (out),
    # c0 -> 0.9, c0 -> 1.2 (out); merged order interleaves c1 at 0.7
    assert traj.marks.tolist() == [0, 0, 1, 0]
    assert traj.draw_indices.tolist() == [1, 3, 2, 5]
    assert traj.times == pytest.approx([0.3, 0.6, 0.7, 0.9], abs=1e-12)
    assert traj.total_draws == 6


# ---------------------------------------------------------------------------
# scalar/block agreement through the seams
# ---------------------------------------------------------------------------


_PIPELINES = [
    (IDEAL, None, None),
    (PowerBias(2.0), Reflect(), None),
    (LowThinning(0.3, 0.8), None, RescaleWindow(0.1, 0.9)),
    (PowerBias(0.7), Compose([RotateHalf(), Reflect()]), RescaleWindow(0.2, 1.0)),
]


@pytest.mark.parametrize("fault,transform,window", _PIPELINES)
def test_serial_block_path_equals_scalar_path(fault, transform, window):
    cfg = SerialConfig(
        n_clocks=6, horizon=40.0, seed=1234, fault=fault, transform=transform,
        fix_window=window,
    )
    fast = simulate_serial(cfg)
    slow = simulate_serial(cfg, source=build_pipeline(cfg.seed, 0, fault, transform, window))
    assert np.array_equal(fast.times, slow.times)
    assert np.array_equal(fast.marks, slow.marks)
    assert np.array_equal(fast.draw_indices, slow.draw_indices)
    assert fast.total_draws == slow.total_draws


@pytest.mark.parametrize("fault,transform,window", _PIPELINES)
def test_parallel_block_path_equals_scalar_path(fault, transform, window):
    cfg = ParallelConfig(
        n_clocks=6, horizon=40.0, seed=77, fault=fault, transform=transform,
        fix_window=window,
    )
    fast = simulate_parallel(cfg)
    slow = simulate_parallel(
        cfg,
        source_factory=lambda clock: build_pipeline(
            cfg.seed, clock_stream(clock), fault, transform, window
        ),
    )
    assert np.array_equal(fast.times, slow.times)
    assert np.array_equal(fast.marks, slow.marks)
    assert np.array_equal(fast.draw_indices, slow.draw_indices)
    assert fast.total_draws == slow.total_draws


def test_starved_window_raises_instead_of_spinning():
    # The thinning fault leaves only (0.5, 1); reflecting moves that mass to
    # (0, 0.5); a window still aimed at (0.5, 1) can then never accept.
    cfg = SerialConfig(
        n_clocks=4,
        horizon=10.0,
        seed=0,
        fault=LowThinning(0.5, 1.0),
        transform=Reflect(),
        fix_window=RescaleWindow(0.5, 1.0),
    )
    with pytest.raises(RuntimeError, match="never lands inside"):
        simulate_serial(cfg)


def test_per_worker_default_equals_explicit_factory():
    cfg = ParallelConfig(
        n_clocks=5, horizon=30.0, seed=9, workers=2,
        stream_mode=StreamMode.PER_WORKER,
    )
    fast = simulate_parallel(cfg)
    slow = simulate_parallel(
        cfg, source_factory=lambda w: build_pipeline(cfg.seed, worker_stream(w))
    )
    assert np.array_equal(fast.times, slow.times)
    assert np.array_equal(fast.marks, slow.marks)
    assert fast.total_draws == slow.total_draws


# ---------------------------------------------------------------------------
# mapping invariance and worker counts
# ---------------------------------------------------------------------------


def test_per_clock_result_ignores_worker_count_and_mapping():
    base = None
    for workers in (1, 3, 4, 12):
        for kind in MAPPING_KINDS:
            cfg = ParallelConfig(
                n_clocks=12,
                horizon=50.0,
                seed=31,
                workers=workers,
                mapping=make_mapping(kind, 12, workers, seed=31),
            )
            traj = simulate_parallel(cfg)
            if base is None:
                base = traj
            else:
                assert np.array_equal(traj.times, base.times), (workers, kind)
                assert np.array_equal(traj.marks, base.marks), (workers, kind)
                assert np.array_equal(traj.draw_indices, base.draw_indices)
                assert traj.total_draws == base.total_draws


def test_per_worker_labels_move_with_mapping_but_law_holds():
    # blocks and round_robin host the same number of clocks per worker, so
    # each worker realises the same tick times — but on differently labelled
    # clocks.  The merged law stays Poisson(N*T) either way.
    cfgs = [
        ParallelConfig(
            n_clocks=8, horizon=100.0, seed=5, workers=4,
            mapping=make_mapping(kind, 8, 4, seed=5),
            stream_mode=StreamMode.PER_WORKER,
        )
        for kind in ("blocks", "round_robin")
    ]
    a, b = (simulate_parallel(c) for c in cfgs)
    assert not np.array_equal(a.marks, b.marks)
    mean, sd = 800.0, math.sqrt(800.0)
    for traj in (a, b):
        assert abs(len(traj) - mean) < 4.0 * sd


def test_event_volume_matches_poisson_band():
    # N*T = 1600 expected events, checked at 4 sigma on both paths.
    serial = simulate_serial(SerialConfig(n_clocks=16, horizon=100.0, seed=11))
    parallel = simulate_parallel(ParallelConfig(n_clocks=16, horizon=100.0, seed=11))
    mean, sd = 1600.0, math.sqrt(1600.0)
    assert abs(len(serial) - mean) < 4.0 * sd
    assert abs(len(parallel) - mean) < 4.0 * sd
    assert abs(serial.times.mean() / parallel.times.mean() - 1.0) < 0.1
    # every parallel clock ticks about horizon times
    ticks = parallel.per_clock_ticks
    assert ticks.sum() == len(parallel)
    assert all(abs(t - 100.0) < 4.0 * 10.0 for t in ticks)


# ---------------------------------------------------------------------------
# merge
# ---------------------------------------------------------------------------


def test_merge_orders_by_time():
    traj = merge([[Event(1.0, 0, 1)], [Event(2.0, 1, 1)]])
    assert traj.times.tolist() == [1.0, 2.0]
    assert traj.marks.tolist() == [0, 1]
    assert traj.n_clocks == 2


def test_merge_breaks_ties_by_mark():
    traj = merge([[Event(1.0, 1, 1)], [Event(1.0, 0, 1)]])
    assert traj.marks.tolist() == [0, 1]


def test_merge_of_empty_parts():
    traj = merge([[], []])
    assert len(traj) == 0
    assert traj.final_time == 0.0
    assert traj.inter_event_times().size == 0


def test_merge_rejects_unsorted_part():
    with pytest.raises(RuntimeError):
        merge([[Event(2.0, 0, 1), Event(1.0, 0, 2)]])


def test_merge_respects_explicit_totals():
    traj = merge([[Event(0.5, 0, 3)]], n_clocks=4, total_draws=11)
    assert traj.n_clocks == 4
    assert traj.total_draws == 11
    assert traj.per_clock_ticks.tolist() == [1, 0, 0, 0]


# ---------------------------------------------------------------------------
# trajectory object
# ---------------------------------------------------------------------------


def test_trajectory_rejects_unsorted_times():
    with pytest.raises(RuntimeError):
        Trajectory(
            times=np.array([2.0, 1.0]),
            marks=np.array([0, 0]),
            draw_indices=np.array([1, 2]),
            total_draws=4,
            n_clocks=1,
        )


def test_trajectory_event_iteration_round_trips():
    traj = simulate_serial(SerialConfig(n_clocks=3, horizon=5.0, seed=2))
    events = list(traj.events())
    assert [e.time for e in events] == traj.times.tolist()
    assert [e.mark for e in events] == traj.marks.tolist()
    assert [e.draw_index for e in events] == traj.draw_indices.tolist()
    gaps = traj.inter_event_times()
    assert gaps[0] == traj.times[0]
    assert np.allclose(np.cumsum(gaps), traj.times)


# ---------------------------------------------------------------------------
# mappings
# ---------------------------------------------------------------------------


def test_block_mapping_layout():
    assert block_mapping(8, 2) == (0, 0, 0, 0, 1, 1, 1, 1)
    assert block_mapping(3, 3) == (0, 1, 2)


def test_round_robin_layout():
    assert round_robin_mapping(5, 2) == (0, 1, 0, 1, 0)


def test_shuffle_mapping_is_seeded_and_balanced():
    a = shuffle_mapping(16, 4, seed=1)
    b = shuffle_mapping(16, 4, seed=1)
    c = shuffle_mapping(16, 4, seed=2)
    assert a == b
    assert a != c  # overwhelmingly likely; same-law, different layout
    assert sorted(np.bincount(a, minlength=4)) == sorted(np.bincount(block_mapping(16, 4), minlength=4))


def test_make_mapping_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown mapping"):
        make_mapping("striped", 8, 2)


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SerialConfig(n_clocks=0, horizon=10.0, seed=0)
    with pytest.raises(ValueError):
        SerialConfig(n_clocks=4, horizon=0.0, seed=0)
    with pytest.raises(ValueError):
        SerialConfig(n_clocks=4, horizon=10.0, seed=-1)
    with pytest.raises(ValueError):
        ParallelConfig(n_clocks=4, horizon=10.0, seed=0, workers=0)
    with pytest.raises(ValueError):
        ParallelConfig(n_clocks=4, horizon=10.0, seed=0, workers=2, mapping=(0, 1))
    with pytest.raises(ValueError):
        ParallelConfig(n_clocks=2, horizon=10.0, seed=0, workers=2, mapping=(0, 5))
    assert StreamMode("per_worker") is StreamMode.PER_WORKER
