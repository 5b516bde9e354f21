"""Event-driven Monte-Carlo model of a binary detector with dead time.

The detector is non-paralyzable: after a click it ignores every arrival
for one dead time, and ignored arrivals do not extend the blocked
interval.  Pulsed illumination defines a time grid with one detection
opportunity per repetition period; a pulse raises a click candidate with
probability ``1 - exp(-mu)`` for per-pulse mean photon number ``mu``
(efficiency already folded in).  Dark counts arrive as an independent
homogeneous Poisson process; they both respect and cause dead time.
Continuous-wave input is the limit of an extremely fast pulse train
carrying correspondingly little energy per slot, so the same engine
serves both cases as long as the slot width stays far below the dead
time.

A candidate occurring exactly one dead time after a click is still
blocked (the detector goes live strictly after the dead time elapses);
this matches the slot-counting convention of the first-order analytic
correction, where a repetition period equal to the dead time already
loses pulses.

Reproducibility
---------------
All randomness derives from the 64-bit config seed through a
counter-based scheme:

* the pulse grid is partitioned into fixed blocks determined only by the
  total number of slots (``_block_bounds``),
* block ``b`` draws from ``Philox(SeedSequence(seed))`` advanced by
  ``b * 2**70`` states, consuming first the candidate-slot geometric
  gaps, then the dark-count times,
* the optional afterpulse hook draws from a dedicated stream far outside
  the block range.

Blocks are generated independently (optionally on a thread pool capped
by the ``APDLAB_THREADS`` environment variable) and the dead-time scan
then runs over blocks in time order, so results are bit-identical for
any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .apd_model import DetectorParams, correction_factor, dead_time_slots
from .errors import ConfigurationError

# Fixed partition of the slot grid; results depend on these constants,
# never on the worker count.
_TARGET_BLOCK_SLOTS = 1 << 20
_MAX_BLOCKS = 4096
_BLOCK_STRIDE = 1 << 70
_AFTERPULSE_STREAM = 1 << 24

# cw discretization: default slot width and the coarsest acceptable one.
CW_SLOT_DIVISOR_DEFAULT = 1000
CW_SLOT_DIVISOR_MIN = 100


@dataclass(frozen=True)
class PulseTrainConfig:
    """One simulation run: a pulse grid plus detector properties.

    ``mu_per_pulse`` is the effective (efficiency-folded) mean photon
    number per pulse.  ``afterpulse_prob`` is a hook for injecting an
    extra re-trigger candidate right when the detector recovers from a
    click; it defaults to off.
    """

    f_rep: float
    mu_per_pulse: float
    dead_time: float
    dark_rate: float
    duration: float
    seed: int
    afterpulse_prob: float = 0.0

    def __post_init__(self):
        if self.f_rep <= 0:
            raise ValueError(f"f_rep must be > 0, got {self.f_rep}")
        if self.mu_per_pulse < 0:
            raise ValueError(f"mu_per_pulse must be >= 0, got {self.mu_per_pulse}")
        if self.dead_time <= 0:
            raise ValueError(f"dead_time must be > 0, got {self.dead_time}")
        if self.dark_rate < 0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.duration * self.f_rep < 1:
            raise ValueError("duration must cover at least one pulse")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0.0 <= self.afterpulse_prob < 1.0:
            raise ValueError("afterpulse_prob must be in [0, 1)")

    @property
    def n_pulses(self) -> int:
        return int(round(self.duration * self.f_rep))

    @property
    def rep_period(self) -> float:
        return 1.0 / self.f_rep

    @property
    def click_probability(self) -> float:
        """Per-pulse click probability for a live detector."""
        return -math.expm1(-self.mu_per_pulse)


@dataclass(frozen=True)
class SimResult:
    """Click totals of one run; event timestamps only when requested."""

    clicks: int
    count_rate: float
    stderr_rate: float
    duration: float
    n_pulses: int
    event_times: np.ndarray | None = None

    def __post_init__(self):
        if self.event_times is not None:
            times = np.asarray(self.event_times, dtype=float)
            times.flags.writeable = False
            object.__setattr__(self, "event_times", times)


@dataclass(frozen=True)
class InterarrivalHistogram:
    """Histogram of gaps between consecutive clicks."""

    counts: np.ndarray
    bin_edges: np.ndarray

    @property
    def is_empty(self) -> bool:
        return self.counts.size == 0


def _block_bounds(n_pulses: int) -> np.ndarray:
    """Fixed slot-grid partition: boundaries of the per-block index ranges."""
    n_blocks = min(_MAX_BLOCKS, max(1, -(-n_pulses // _TARGET_BLOCK_SLOTS)))
    base, rem = divmod(n_pulses, n_blocks)
    sizes = np.full(n_blocks, base, dtype=np.int64)
    sizes[:rem] += 1
    bounds = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(sizes, out=bounds[1:])
    return bounds


def _block_rng(seed: int, stream: int) -> np.random.Generator:
    bitgen = np.random.Philox(np.random.SeedSequence(seed))
    bitgen.advance(stream * _BLOCK_STRIDE)
    return np.random.Generator(bitgen)


def _candidate_slots(rng: np.random.Generator, n_slots: int, p: float) -> np.ndarray:
    """Sorted slot indices of Bernoulli(p) successes over ``n_slots`` slots.

    Sampled through geometric gaps so the cost scales with the number of
    successes, not with the (possibly astronomically large) slot count.
    """
    if p <= 0.0 or n_slots == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_slots, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        expected = (n_slots - 1 - pos) * p
        size = int(expected + 8.0 * math.sqrt(expected + 1.0) + 16.0)
        slots = pos + np.cumsum(rng.geometric(p, size=size))
        if slots[-1] >= n_slots:
            chunks.append(slots[slots < n_slots])
            break
        chunks.append(slots)
        pos = int(slots[-1])
    return chunks[0] if len(chunks) == 1 else np.concatenate(chunks)


def _block_candidates(config: PulseTrainConfig, bounds: np.ndarray, block: int):
    """Candidate events of one block: (grid slot indices, dark times)."""
    lo = int(bounds[block])
    hi = int(bounds[block + 1])
    rng = _block_rng(config.seed, block)
    slots = _candidate_slots(rng, hi - lo, config.click_probability)
    if slots.size:
        slots = slots + lo
    if config.dark_rate > 0:
        period = config.rep_period
        t_lo = lo * period
        window = (hi - lo) * period
        n_dark = rng.poisson(config.dark_rate * window)
        dark_times = np.sort(t_lo + window * rng.random(n_dark))
    else:
        dark_times = np.empty(0)
    return slots, dark_times


def _worker_count(shards: int) -> int:
    cap = int(os.environ.get("APDLAB_THREADS", "0") or 0)
    workers = max(1, shards)
    if cap > 0:
        workers = min(workers, cap)
    return min(workers, os.cpu_count() or 1)


def simulate_pulsed(
    config: PulseTrainConfig,
    record_events: bool = False,
    shards: int = 1,
) -> SimResult:
    """Run one pulse-train simulation.

    ``shards`` sets how many worker threads generate candidate blocks;
    it has no effect on the result, which is a pure function of the
    config and ``record_events``.
    """
    n_pulses = config.n_pulses
    period = config.rep_period
    bounds = _block_bounds(n_pulses)
    n_blocks = len(bounds) - 1

    workers = _worker_count(shards)
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_block = list(
                pool.map(lambda b: _block_candidates(config, bounds, b), range(n_blocks))
            )
    else:
        per_block = [_block_candidates(config, bounds, b) for b in range(n_blocks)]

    blocked_slots = dead_time_slots(config.dead_time, period)
    use_times = config.dark_rate > 0 or config.afterpulse_prob > 0
    ap_rng = (
        _block_rng(config.seed, _AFTERPULSE_STREAM) if config.afterpulse_prob > 0 else None
    )

    clicks = 0
    times_out: list[np.ndarray] = []

    if not use_times:
        # Dark-free grid: scan in integer slot units, which keeps the
        # blocked-slot boundary exact even at rational period ratios.
        last = -(1 << 62)
        for slots, _ in per_block:
            if slots.size == 0:
                continue
            if blocked_slots == 0:
                clicks += slots.size
                if record_events:
                    times_out.append(slots * period)
                last = int(slots[-1])
                continue
            accepted = []
            s_last = last
            for s in slots.tolist():
                if s - s_last > blocked_slots:
                    accepted.append(s)
                    s_last = s
            last = s_last
            clicks += len(accepted)
            if record_events and accepted:
                times_out.append(np.array(accepted, dtype=np.int64) * period)
    else:
        dead = config.dead_time
        q_ap = config.afterpulse_prob
        last_t = -math.inf
        for slots, dark_times in per_block:
            if slots.size == 0 and dark_times.size == 0:
                continue
            if dark_times.size == 0:
                cand = slots * period
            elif slots.size == 0:
                cand = dark_times
            else:
                cand = np.concatenate([slots * period, dark_times])
                cand.sort(kind="stable")
            accepted = []
            for t in cand.tolist():
                if t - last_t > dead:
                    accepted.append(t)
                    last_t = t
                    if q_ap > 0:
                        # Re-trigger chain right at the end of each dead time.
                        while ap_rng.random() < q_ap:
                            last_t += dead
                            accepted.append(last_t)
            clicks += len(accepted)
            if record_events and accepted:
                times_out.append(np.array(accepted))

    if config.duration > 0:
        rate = clicks / config.duration
        if config.dark_rate > 0:
            stderr_clicks = math.sqrt(clicks)
        else:
            phat = clicks / n_pulses if n_pulses else 0.0
            stderr_clicks = math.sqrt(max(clicks * (1.0 - phat), 0.0))
        stderr = stderr_clicks / config.duration
    else:
        rate = 0.0
        stderr = 0.0

    events = None
    if record_events:
        events = np.concatenate(times_out) if times_out else np.empty(0)
    return SimResult(
        clicks=clicks,
        count_rate=rate,
        stderr_rate=stderr,
        duration=config.duration,
        n_pulses=n_pulses,
        event_times=events,
    )


def simulate_cw(
    target_rate: float,
    slot_width: float | None,
    params: DetectorParams,
    duration: float,
    seed: int,
    record_events: bool = False,
    shards: int = 1,
) -> SimResult:
    """Continuous-wave run as the fast-pulse limit of the grid engine.

    ``target_rate`` is the photon arrival rate at the detector input in
    photons/s; the per-slot pulse energy is chosen so the average
    optical power matches it exactly.  ``slot_width`` defaults to
    dead_time / 1000 and must not exceed dead_time / 100, which keeps
    the discretization bias far below statistical resolution.
    """
    if target_rate < 0:
        raise ValueError(f"target_rate must be >= 0, got {target_rate}")
    if slot_width is None:
        slot_width = params.dead_time / CW_SLOT_DIVISOR_DEFAULT
    if slot_width <= 0:
        raise ConfigurationError(f"slot_width must be > 0, got {slot_width}")
    if slot_width > params.dead_time / CW_SLOT_DIVISOR_MIN:
        raise ConfigurationError(
            f"slot_width {slot_width:.3e} s too coarse for dead time "
            f"{params.dead_time:.3e} s; need <= dead_time/{CW_SLOT_DIVISOR_MIN}"
        )
    config = PulseTrainConfig(
        f_rep=1.0 / slot_width,
        mu_per_pulse=params.eta_apd * target_rate * slot_width,
        dead_time=params.dead_time,
        dark_rate=params.dark_rate,
        duration=duration,
        seed=seed,
    )
    return simulate_pulsed(config, record_events=record_events, shards=shards)


def interarrival_histogram(result: SimResult, bin_width: float) -> InterarrivalHistogram:
    """Histogram of time differences between consecutive clicks.

    For a non-paralyzable detector every count lands at or above the
    dead time, so the first occupied bin reads off the dead time from
    simulated (or recorded) data.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if result.event_times is None:
        raise ValueError("event_times were not retained; rerun with record_events=True")
    if result.event_times.size < 2:
        return InterarrivalHistogram(np.empty(0, dtype=np.int64), np.empty(0))
    gaps = np.diff(result.event_times)
    n_bins = int(gaps.max() / bin_width) + 1
    edges = np.arange(n_bins + 1) * bin_width
    counts, _ = np.histogram(gaps, bins=edges)
    return InterarrivalHistogram(counts.astype(np.int64), edges)


def correction_curve_cw(
    rates,
    params: DetectorParams,
    duration: float,
    seed: int,
    slot_width: float | None = None,
    shards: int = 1,
) -> list[tuple[float, float]]:
    """Simulated dead-time correction factors along a cw intensity sweep.

    For each target photon rate the detector is simulated and the
    correction factor true/measured is evaluated against the known
    linear prediction eta * rate + dark.  Returns (measured rate,
    correction) pairs in input order.  Sweep point ``i`` derives its
    seed from ``SeedSequence(seed).generate_state``.
    """
    rates = list(rates)
    if not rates:
        raise ValueError("rates must be non-empty")
    point_seeds = np.random.SeedSequence(seed).generate_state(len(rates), np.uint64)
    curve = []
    for target, point_seed in zip(rates, point_seeds):
        result = simulate_cw(
            target, slot_width, params, duration, int(point_seed), shards=shards
        )
        linear = params.eta_apd * target + params.dark_rate
        curve.append((result.count_rate, correction_factor(linear, result.count_rate)))
    return curve
