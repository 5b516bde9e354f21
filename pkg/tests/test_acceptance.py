"""Acceptance gate: one test per release criterion, each printing a
PASS line with the measured numbers (run with ``pytest -s`` to see them
inline).  Tolerances are fixed here, not tuned at runtime; every
expected value is either exact arithmetic or an independent oracle
(brute-force enumeration, closed-form occupancy, the non-paralyzable
rate formula, or frozen direct evaluation)."""

import json
import math
import time

import numpy as np
import pytest

from apdlab.apd_model import DetectorParams
from apdlab.calibrate import SweepRecord, fit_mean_clicks, fit_saturation
from apdlab.cli import main
from apdlab.dead_time_sim import PulseTrainConfig, correction_curve_cw, simulate_pulsed
from apdlab.photon_stats import PhotonNumberDistribution, coherent_distribution, mandel_q
from apdlab.schemas import SimulateRequest
from apdlab.experiments import run_simulate
from apdlab.tmd import (
    SplittingNetwork,
    bin_probabilities,
    convolution_matrix,
    convolution_matrix_symmetric,
    deconvolve,
    expected_mean_clicks,
    forward_click_statistics,
    splitting_ratio_sensitivity,
)
from conftest import brute_force_click_matrix

DEAD = 53e-9
F_REP = 1e6
MU_FIT = 0.836
DARK_FIT = 9.9e3


def report(criterion: int, name: str, detail: str) -> None:
    print(f"ACCEPTANCE {criterion} {name}: PASS ({detail})")


def test_1_saturation_fit_reproduction():
    start = time.perf_counter()
    xs = np.linspace(1 / 30, 1.0, 30)
    ys = F_REP * (1 - np.exp(-MU_FIT * xs)) + DARK_FIT

    clean = fit_saturation(
        [SweepRecord(float(x), float(y)) for x, y in zip(xs, ys)], F_REP
    )
    assert clean.converged
    assert clean.params["mu_eff"] == pytest.approx(MU_FIT, rel=1e-6)
    assert clean.params["dark_rate"] == pytest.approx(DARK_FIT, rel=1e-6)

    worst = 0.0
    for child in np.random.SeedSequence(20260810).generate_state(100, np.uint64):
        rng = np.random.default_rng(int(child))
        noisy = ys * (1 + 0.01 * rng.standard_normal(30))
        records = [
            SweepRecord(float(x), float(y), float(0.01 * y0))
            for x, y, y0 in zip(xs, noisy, ys)
        ]
        fit = fit_saturation(records, F_REP)
        worst = max(worst, abs(fit.params["mu_eff"] - MU_FIT))
    assert worst < 0.01

    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(1, "saturation fit", f"noiseless exact, max |dmu|={worst:.4f} over 100 seeds, {elapsed:.2f}s")


@pytest.mark.parametrize("p_gamma", [0.01, 0.1, 0.5])
def test_2_monte_carlo_vs_analytic_constant_frequency(p_gamma):
    start = time.perf_counter()
    cfg = PulseTrainConfig(
        f_rep=F_REP,
        mu_per_pulse=-math.log(1 - p_gamma),
        dead_time=DEAD,
        dark_rate=0.0,
        duration=10.0,  # 1e7 pulses
        seed=8000 + int(1000 * p_gamma),
    )
    result = simulate_pulsed(cfg)
    expected = F_REP * p_gamma  # no dead-time overlap at 1 MHz
    deviation = abs(result.count_rate - expected)
    assert deviation < 3 * result.stderr_rate
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report(
        2,
        f"MC vs analytic p={p_gamma}",
        f"rate {result.count_rate:.0f} vs {expected:.0f}, "
        f"|dev|={deviation:.0f} < 3se={3 * result.stderr_rate:.0f}, {elapsed:.2f}s",
    )


def test_3_frequency_sweep_linearity_regimes():
    start = time.perf_counter()
    p_gamma = 0.05
    request = SimulateRequest.model_validate(
        {
            "mode": "pulsed-constant-energy",
            "detector": {"eta_apd": 1.0, "dark_rate_hz": 0.0, "dead_time_s": DEAD},
            "source": {
                "mu_per_pulse": -math.log(1 - p_gamma),
                "f_rep_sweep_hz": {"start": 0.5e6, "stop": 40e6, "num": 80},
            },
            "sim": {"duration_s": 1.0, "seed": 31415, "shards": 4},
        }
    )
    table = run_simulate(request)
    freqs = np.array([row[0] for row in table.rows])
    rates = np.array([row[1] for row in table.rows])

    def regime(lo, hi):
        mask = (freqs >= lo) & (freqs <= hi)
        slope, intercept = np.polyfit(freqs[mask], rates[mask], 1)
        fitted = slope * freqs[mask] + intercept
        ss_res = float(((rates[mask] - fitted) ** 2).sum())
        ss_tot = float(((rates[mask] - rates[mask].mean()) ** 2).sum())
        return slope, intercept, 1 - ss_res / ss_tot

    slope_1, icpt_1, r2_1 = regime(0.5e6, 15e6)
    slope_2, _, r2_2 = regime(23e6, 36e6)
    assert r2_1 > 0.9999
    assert r2_2 > 0.9999

    ratio = slope_2 / slope_1
    assert ratio == pytest.approx(1 - p_gamma, rel=0.02)

    # first sweep point falling visibly below the low-frequency line
    line_1 = slope_1 * freqs + icpt_1
    below = freqs[rates < 0.97 * line_1]
    breakpoint_hz = float(below.min())
    assert breakpoint_hz == pytest.approx(1 / DEAD, abs=0.6e6)

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    report(
        3,
        "frequency sweep regimes",
        f"R2=({r2_1:.6f}, {r2_2:.6f}), slope ratio {ratio:.4f} vs {1 - p_gamma}, "
        f"break at {breakpoint_hz / 1e6:.1f} MHz, {elapsed:.1f}s",
    )


def test_4_cw_correction_curve():
    start = time.perf_counter()
    params = DetectorParams(eta_apd=1.0, dark_rate=0.0, dead_time=DEAD)
    targets = [50e3, 100e3, 200e3, 300e3]
    curve = correction_curve_cw(targets, params, duration=60.0, seed=2718, shards=4)
    corrections = [c for _, c in curve]
    worst = 0.0
    for target, correction in zip(targets, corrections):
        oracle = 1 + target * DEAD
        worst = max(worst, abs(correction - oracle) / oracle)
    assert worst < 0.002
    assert corrections == sorted(corrections)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    report(
        4,
        "cw correction curve",
        f"max |dC|/C={worst:.2e} over {[int(t) for t in targets]}, monotone, {elapsed:.1f}s",
    )


def test_5_convolution_matrix_exactness(rng):
    start = time.perf_counter()
    ratios = tuple(rng.uniform(0.3, 0.7, 7))
    network = SplittingNetwork(3, ratios)
    dp = convolution_matrix(network, 6)
    brute = brute_force_click_matrix(bin_probabilities(network), 6)
    dp_error = float(np.abs(dp.entries - brute).max())
    assert dp_error < 1e-12

    sym_dp = convolution_matrix(SplittingNetwork.symmetric(3), 8)
    closed = convolution_matrix_symmetric(8, 8)
    sym_error = float(np.abs(sym_dp.entries - closed.entries).max())
    assert sym_error < 1e-12

    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    report(
        5,
        "convolution exactness",
        f"brute-force dev {dp_error:.1e}, closed-form dev {sym_error:.1e}, {elapsed:.1f}s",
    )


def test_6_deconvolution_round_trip_and_q_restoration():
    start = time.perf_counter()
    network = SplittingNetwork.symmetric(3)
    conv_sq = convolution_matrix(network, 8)
    mus = [0.1, 0.5, 1.0, 2.232, 3.0]

    worst_roundtrip = 0.0
    q_raw_values = []
    q_deconv_values = []
    for mu in mus:
        # exact inverse composition on the square system
        truncated = coherent_distribution(mu, 8)
        rho = PhotonNumberDistribution(truncated.probs / truncated.probs.sum())
        p = forward_click_statistics(rho, conv_sq)
        recovered = deconvolve(p, conv_sq)
        worst_roundtrip = max(worst_roundtrip, float(np.abs(recovered.probs - rho.probs).max()))

        # Q restoration from the full coherent click statistics
        rho_full = coherent_distribution(mu)
        p_full = forward_click_statistics(rho_full, convolution_matrix(network, rho_full.n_max))
        q_raw_values.append(mandel_q(p_full))
        q_deconv_values.append(mandel_q(deconvolve(p_full, conv_sq)))

    assert worst_roundtrip < 1e-9
    for q in q_deconv_values:
        assert q == pytest.approx(1.0, abs=1e-3)
    assert all(q < 1.0 for q in q_raw_values)
    assert all(b < a for a, b in zip(q_raw_values, q_raw_values[1:]))

    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(
        6,
        "deconvolution round trip",
        f"roundtrip dev {worst_roundtrip:.1e}, Q_deconv in "
        f"[{min(q_deconv_values):.4f}, {max(q_deconv_values):.4f}], "
        f"Q_raw {q_raw_values[0]:.3f} -> {q_raw_values[-1]:.3f} decreasing, {elapsed:.2f}s",
    )


def test_7_mean_clicks_fit():
    start = time.perf_counter()
    mu_true = 2.232
    xs = np.linspace(0.05, 1.0, 20)
    exact = [expected_mean_clicks(mu_true * x, 8, 0.0, 1e6) for x in xs]
    clean = fit_mean_clicks(
        [SweepRecord(float(x), float(y)) for x, y in zip(xs, exact)], 8
    )
    assert clean.converged
    assert clean.params["mu_eff"] == pytest.approx(mu_true, rel=1e-6)

    # finite statistics: 1e5 pulses per sweep point
    network = SplittingNetwork.symmetric(3)
    rho_cache = {}
    records = []
    n_pulses = 100_000
    rng = np.random.default_rng(1234)
    for x in xs:
        rho = coherent_distribution(mu_true * x)
        conv = rho_cache.get(rho.n_max)
        if conv is None:
            conv = rho_cache[rho.n_max] = convolution_matrix(network, rho.n_max)
        p = forward_click_statistics(rho, conv)
        counts = rng.multinomial(n_pulses, p.probs)
        clicks = np.arange(counts.size)
        mean = float(clicks @ counts) / n_pulses
        var = float((clicks**2) @ counts) / n_pulses - mean**2
        records.append(SweepRecord(float(x), mean, math.sqrt(max(var, 1e-12) / n_pulses)))
    sampled = fit_mean_clicks(records, 8)
    deviation = abs(sampled.params["mu_eff"] - mu_true)
    assert deviation < 0.05

    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    report(
        7,
        "mean-clicks fit",
        f"noiseless exact, sampled |dmu|={deviation:.4f} at 1e5 pulses/point, {elapsed:.1f}s",
    )


def test_8_splitting_ratio_robustness():
    symmetric = (0.5,) * 7
    skewed = (0.45,) * 7
    difference = splitting_ratio_sensitivity(symmetric, skewed, 8)
    assert difference < 0.02
    report(
        8,
        "splitting-ratio robustness",
        f"max entry difference {difference:.6f} (bound 0.02, N=8, n<=8)",
    )


def test_9_cli_determinism_across_shards(tmp_path):
    config = {
        "mode": "pulsed-constant-energy",
        "detector": {"eta_apd": 1.0, "dark_rate_hz": 100.0, "dead_time_s": DEAD},
        "source": {
            "mu_per_pulse": 0.05,
            "f_rep_sweep_hz": {"start": 1e6, "stop": 30e6, "num": 6},
        },
        "sim": {"duration_s": 0.05, "seed": 99},
    }
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(config))
    outputs = []
    for run, shards in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / f"{run}.csv"
        code = main(
            ["simulate", "--config", str(path), "--out", str(out), "--shards", str(shards)]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    report(9, "CLI determinism", f"{len(outputs[0])} bytes, identical at 1/1/8 shards")
