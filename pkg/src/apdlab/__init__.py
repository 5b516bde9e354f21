"""Binary-detector count statistics: analytic models, Monte-Carlo dead-time
simulation, calibration fits, and time-multiplexed click-statistics
deconvolution."""

__version__ = "0.1.0"

from .apd_model import (
    DetectorParams,
    RatePrediction,
    corrected_pulsed_rate,
    correction_factor,
    dead_time_slots,
    effective_count_rate_coherent,
    expected_count_rate,
    pulsed_correction,
)
from .calibrate import (
    FitResult,
    SweepRecord,
    correction_table,
    fit_linear,
    fit_mean_clicks,
    fit_saturation,
)
from .dead_time_sim import (
    InterarrivalHistogram,
    PulseTrainConfig,
    SimResult,
    correction_curve_cw,
    interarrival_histogram,
    simulate_cw,
    simulate_pulsed,
)
from .errors import (
    ApdLabError,
    CapacityError,
    ConfigurationError,
    SingularFitError,
    TruncationError,
)
from .photon_stats import (
    PhotonNumberDistribution,
    attenuate_coherent,
    coherent_distribution,
    mandel_q,
    vacuum_probability,
)
from .tmd import (
    ClickStatistics,
    SplittingNetwork,
    TransferMatrix,
    bin_probabilities,
    convolution_matrix,
    convolution_matrix_symmetric,
    deconvolve,
    expected_mean_clicks,
    forward_click_statistics,
    loss_matrix,
    splitting_ratio_sensitivity,
)

__all__ = [
    "__version__",
    "ApdLabError",
    "CapacityError",
    "ClickStatistics",
    "ConfigurationError",
    "DetectorParams",
    "FitResult",
    "InterarrivalHistogram",
    "PhotonNumberDistribution",
    "PulseTrainConfig",
    "RatePrediction",
    "SimResult",
    "SingularFitError",
    "SplittingNetwork",
    "SweepRecord",
    "TransferMatrix",
    "TruncationError",
    "attenuate_coherent",
    "bin_probabilities",
    "coherent_distribution",
    "convolution_matrix",
    "convolution_matrix_symmetric",
    "corrected_pulsed_rate",
    "correction_curve_cw",
    "correction_factor",
    "correction_table",
    "dead_time_slots",
    "deconvolve",
    "effective_count_rate_coherent",
    "expected_count_rate",
    "expected_mean_clicks",
    "fit_linear",
    "fit_mean_clicks",
    "fit_saturation",
    "forward_click_statistics",
    "interarrival_histogram",
    "loss_matrix",
    "mandel_q",
    "pulsed_correction",
    "simulate_cw",
    "simulate_pulsed",
    "splitting_ratio_sensitivity",
    "vacuum_probability",
]
