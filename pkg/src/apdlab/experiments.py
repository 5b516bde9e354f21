"""Sweep orchestration: turn a config document into a result table.

Each runner expands its sweep axis, derives one child seed per point
from the config seed (``SeedSequence(seed).generate_state``), executes
the point, and collects a flat table.  Tables are pure functions of the
request, so reruns and shard-count changes reproduce files byte for
byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dataio
from .calibrate import FitResult, SweepRecord, correction_table, fit_linear, fit_mean_clicks, fit_saturation
from .dead_time_sim import (
    CW_SLOT_DIVISOR_DEFAULT,
    PulseTrainConfig,
    correction_curve_cw,
    simulate_cw,
    simulate_pulsed,
)
from .photon_stats import coherent_distribution, default_n_max, mandel_q
from .schemas import CorrectionTableRequest, FitRequest, SimulateRequest, TmdRequest
from .tmd import (
    ClickStatistics,
    SplittingNetwork,
    convolution_matrix,
    deconvolve,
    forward_click_statistics,
    loss_matrix,
)


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: list[list]

    def to_csv(self) -> str:
        return dataio.csv_text(self.columns, self.rows)


def _point_seeds(seed: int, n_points: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_points, np.uint64)]


def run_simulate(req: SimulateRequest) -> Table:
    """Monte-Carlo sweep for the cw and pulsed experiment modes."""
    detector = req.detector.to_params()
    sim = req.sim
    src = req.source

    if req.mode == "pulsed-constant-energy":
        xs = src.f_rep_sweep_hz.values()
    else:
        xs = src.transmission.values()
    seeds = _point_seeds(sim.seed, len(xs))

    rows = []
    for x, point_seed in zip(xs, seeds):
        if req.mode == "cw":
            result = simulate_cw(
                target_rate=src.photon_rate_hz * x,
                slot_width=src.slot_width_s,
                params=detector,
                duration=sim.duration_s,
                seed=point_seed,
                shards=sim.shards,
            )
            slot = src.slot_width_s or detector.dead_time / CW_SLOT_DIVISOR_DEFAULT
            config = PulseTrainConfig(
                f_rep=1.0 / slot,
                mu_per_pulse=detector.eta_apd * src.photon_rate_hz * x * slot,
                dead_time=detector.dead_time,
                dark_rate=detector.dark_rate,
                duration=sim.duration_s,
                seed=point_seed,
            )
        else:
            if req.mode == "pulsed-constant-frequency":
                f_rep = src.f_rep_hz
                mu_eff = detector.eta_apd * src.mu_max * x
            else:
                f_rep = x
                mu_eff = detector.eta_apd * src.mu_per_pulse
            config = PulseTrainConfig(
                f_rep=f_rep,
                mu_per_pulse=mu_eff,
                dead_time=detector.dead_time,
                dark_rate=detector.dark_rate,
                duration=sim.duration_s,
                seed=point_seed,
            )
            result = simulate_pulsed(config, shards=sim.shards)
        rows.append([x, result.count_rate, result.stderr_rate]
                    + dataio.sim_result_row(config, result))
    return Table(columns=("x", "y", "y_err") + dataio.SIM_COLUMNS, rows=rows)


def _tmd_point(p: ClickStatistics, conv_sq, loss_sq, dark_clicks: float):
    """Raw and deconvolved descriptors of one click distribution."""
    mean_raw = p.mean_clicks() + dark_clicks
    try:
        q_raw = mandel_q(p)
    except ValueError:
        q_raw = math.nan
    rho = deconvolve(p, conv_sq, loss_sq)
    n = np.arange(rho.probs.size)
    mean_deconv = float(n @ rho.probs) + dark_clicks
    try:
        q_deconv = mandel_q(rho)
    except ValueError:
        q_deconv = math.nan
    return mean_raw, mean_deconv, q_raw, q_deconv


def run_tmd(req: TmdRequest) -> Table:
    """Click-statistics sweep through a splitting network.

    Transmission scales the coherent input mean (attenuated coherent
    light stays coherent); a fixed system loss, when below one, is
    applied through the loss matrix and inverted during deconvolution.
    Exact per-pulse distributions by default; ``n_pulses_per_point``
    switches to multinomial sampling for finite-statistics studies.
    """
    net = req.network
    if net.ratios is None:
        network = SplittingNetwork.symmetric(net.stages, net.base_delay_s)
    else:
        network = SplittingNetwork(net.stages, tuple(net.ratios), net.base_delay_s)
    n_bins = network.n_bins

    n_fwd = req.n_max if req.n_max is not None else default_n_max(req.mu_max)
    n_fwd = max(n_fwd, n_bins)
    conv_fwd = convolution_matrix(network, n_fwd)
    conv_sq = convolution_matrix(network, n_bins)
    if req.system_transmission < 1.0:
        loss_fwd = loss_matrix(req.system_transmission, n_fwd)
        loss_sq = loss_matrix(req.system_transmission, n_bins)
    else:
        loss_fwd = loss_sq = None

    xs = req.transmission.values()
    seeds = _point_seeds(req.seed, len(xs))
    rows = []
    for x, point_seed in zip(xs, seeds):
        rho = coherent_distribution(req.mu_max * x, n_fwd)
        p = forward_click_statistics(rho, conv_fwd, loss_fwd)
        if req.n_pulses_per_point > 0:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(point_seed)))
            counts = rng.multinomial(req.n_pulses_per_point, p.probs)
            p = ClickStatistics(counts / req.n_pulses_per_point, n_bins=n_bins)
        mean_raw, mean_deconv, q_raw, q_deconv = _tmd_point(
            p, conv_sq, loss_sq, req.dark_clicks_per_pulse
        )
        rows.append([x, mean_raw, mean_deconv, q_raw, q_deconv])
    return Table(
        columns=(
            "transmission",
            "mean_clicks_raw",
            "mean_clicks_deconvolved",
            "q_raw",
            "q_deconvolved",
        ),
        rows=rows,
    )


def run_correction_table(req: CorrectionTableRequest) -> Table:
    """Correction factors either from a cw simulation or from sweep records."""
    if req.cw is not None:
        cw = req.cw
        curve = correction_curve_cw(
            cw.target_rates_hz,
            cw.detector.to_params(),
            cw.duration_s,
            cw.seed,
            slot_width=cw.slot_width_s,
            shards=cw.shards,
        )
    else:
        records = [SweepRecord(r.x, r.y, r.y_err, r.n_samples) for r in req.records]
        linear = fit_linear(records, window=req.linear_window_points)
        curve = correction_table(records, linear)
    rows = [[rate, corr] for rate, corr in curve]
    return Table(columns=("rate_hz", "correction"), rows=rows)


def run_fit(req: FitRequest) -> FitResult:
    records = [SweepRecord(r.x, r.y, r.y_err, r.n_samples) for r in req.records]
    if req.model == "linear":
        return fit_linear(records, window=req.window)
    if req.model == "saturation":
        return fit_saturation(records, req.f_rep_hz)
    return fit_mean_clicks(records, req.n_bins)
