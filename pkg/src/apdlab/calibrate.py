"""Least-squares calibration of the analytic count-rate models.

Sweep data (count rate or mean clicks against transmission) is fitted
either with a weighted straight line in the low-power window or with the
two-parameter saturation model A (1 - exp(-r x)) + d, where the
amplitude A is the repetition rate (count-rate fits) or the bin count
(mean-clicks fits).  The nonlinear fits run a damped least-squares
iteration with an analytic Jacobian, multi-started from the linear-fit
initialization; candidates are ranked by residual with ties broken by
start index, so results are deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SingularFitError

MAX_ITERATIONS = 200
GRADIENT_TOL = 1e-10

# Largest mu*x for which the saturation curve stays within 1% of its
# tangent at the origin: solves (z - 1 + e^-z) / (1 - e^-z) = 0.01.
_LINEAR_WINDOW_Z = 0.0201340


@dataclass(frozen=True)
class SweepRecord:
    """One calibration point: abscissa, measured value, optional error."""

    x: float
    y: float
    y_err: float | None = None
    n_samples: int | None = None

    def __post_init__(self):
        if self.y < 0:
            raise ValueError(f"y must be >= 0, got {self.y}")
        if self.y_err is not None and self.y_err < 0:
            raise ValueError(f"y_err must be >= 0, got {self.y_err}")


@dataclass(frozen=True)
class FitResult:
    """Named parameter estimates with 1-sigma errors and diagnostics.

    ``converged`` is set only when the gradient norm fell below the
    relative tolerance; ``residual_norm`` is the weighted RMS residual.
    ``window`` reports the low-power prefix in which the model is
    linear to 1% (diagnostic only, never silently applied).
    """

    params: dict[str, float]
    param_errs: dict[str, float]
    residual_norm: float
    converged: bool
    n_iterations: int = 0
    window: dict | None = None
    message: str = ""


def _weights(records: list[SweepRecord]) -> np.ndarray:
    """Inverse-variance weights; Poisson default when no errors given."""
    if all(r.y_err is not None and r.y_err > 0 for r in records):
        return np.array([1.0 / r.y_err**2 for r in records])
    return np.array([1.0 / max(r.y, 1.0) for r in records])


def fit_linear(records, window: int | None = None) -> FitResult:
    """Weighted straight-line fit, closed form.

    ``window`` restricts the fit to the first ``window`` records (the
    low-power prefix); parameters are named ``slope`` and ``intercept``.
    """
    records = list(records)
    if window is not None:
        records = records[:window]
    if len(records) < 2:
        raise SingularFitError(f"need at least 2 points, got {len(records)}")
    x = np.array([r.x for r in records])
    y = np.array([r.y for r in records])
    w = _weights(records)
    if np.ptp(x) == 0.0:
        raise SingularFitError("all abscissae identical; slope is undetermined")
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - slope * x - intercept
    dof = max(len(records) - 2, 1)
    residual_norm = math.sqrt((w * resid**2).sum() / dof)
    slope_err = math.sqrt(1.0 / sxx)
    intercept_err = math.sqrt(1.0 / sw + xm**2 / sxx)
    return FitResult(
        params={"slope": float(slope), "intercept": float(intercept)},
        param_errs={"slope": slope_err, "intercept": intercept_err},
        residual_norm=residual_norm,
        converged=True,
        n_iterations=0,
    )


def linear_window(xs, mu: float, threshold_z: float = _LINEAR_WINDOW_Z) -> int:
    """Length of the sweep prefix where saturation is below 1%.

    A point is linear when mu * x stays below the 1%-deviation bound of
    the exponential saturation curve.  Returns the number of leading
    points satisfying the bound (the sweep is assumed sorted in x).
    """
    count = 0
    for x in xs:
        if mu * x <= threshold_z:
            count += 1
        else:
            break
    return count


def _exp_model(x: np.ndarray, amplitude: float, rate: float, offset: float) -> np.ndarray:
    return amplitude * -np.expm1(-rate * x) + offset


def _exp_jacobian(x: np.ndarray, amplitude: float, rate: float) -> np.ndarray:
    jac = np.empty((x.size, 2))
    jac[:, 0] = amplitude * x * np.exp(-rate * x)
    jac[:, 1] = 1.0
    return jac


def _damped_least_squares(x, y, w, amplitude, start):
    """Levenberg-damped Gauss-Newton for (rate, offset); analytic Jacobian."""
    params = np.array(start, dtype=float)
    resid = y - _exp_model(x, amplitude, *params)
    cost = float(w @ resid**2)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        jac = _exp_jacobian(x, amplitude, params[0])
        grad = jac.T @ (w * resid)
        if np.linalg.norm(grad) <= GRADIENT_TOL * (1.0 + cost):
            converged = True
            break
        normal = jac.T @ (w[:, None] * jac)
        stepped = False
        for _ in range(40):
            damped = normal + lam * np.diag(np.diag(normal))
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            trial_resid = y - _exp_model(x, amplitude, *trial)
            trial_cost = float(w @ trial_resid**2)
            if trial_cost < cost:
                params, resid, cost = trial, trial_resid, trial_cost
                lam = max(lam * 0.3, 1e-14)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            # Damping saturated without improvement: local optimum within
            # float resolution.  Declare convergence if the gradient is
            # small on the scale of the data.
            converged = bool(np.linalg.norm(grad) <= 1e-8 * (1.0 + float(w @ y**2)))
            break
    return params, cost, converged, iterations


def _param_errors(x, w, amplitude, params) -> np.ndarray:
    jac = _exp_jacobian(x, amplitude, params[0])
    normal = jac.T @ (w[:, None] * jac)
    try:
        cov = np.linalg.inv(normal)
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        return np.full(2, math.inf)


def _fit_exponential(records, amplitude: float, rate_name: str, offset_name: str,
                     rate_scale: float) -> FitResult:
    records = list(records)
    if len(records) < 3:
        raise SingularFitError(f"need at least 3 points, got {len(records)}")
    x = np.array([r.x for r in records])
    y = np.array([r.y for r in records])
    w = _weights(records)
    if np.ptp(x) == 0.0:
        raise SingularFitError("all abscissae identical")

    # Multi-start: linear initialization plus bracketing variants.
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    n_init = max(2, len(records) // 4)
    try:
        lin = fit_linear([records[i] for i in order[:n_init]])
        slope0 = max(lin.params["slope"] / amplitude, 1e-12)
        offset0 = max(lin.params["intercept"], 0.0)
    except SingularFitError:
        slope0, offset0 = 1.0, float(ys.min())
    starts = [
        (slope0, offset0),
        (slope0 * 0.3, offset0),
        (slope0 * 3.0, offset0),
        (max((ys.max() - ys.min()) / (amplitude * max(xs.max(), 1e-300)), 1e-12), offset0),
    ]

    best = None
    for index, start in enumerate(starts):
        candidate = _damped_least_squares(x, y, w, amplitude, start)
        key = (candidate[1], index)  # lowest cost wins, ties by start index
        if best is None or key < best[0]:
            best = (key, candidate)
    _, (params, cost, converged, iterations) = best

    errs = _param_errors(x, w, amplitude, params)
    dof = max(len(records) - 2, 1)
    window = {
        "n_points": linear_window(xs, params[0]),
        "criterion": "saturation within 1% of its tangent",
    }
    return FitResult(
        params={rate_name: float(params[0] * rate_scale), offset_name: float(params[1])},
        param_errs={rate_name: float(errs[0] * rate_scale), offset_name: float(errs[1])},
        residual_norm=math.sqrt(cost / dof),
        converged=converged,
        n_iterations=iterations,
        window=window,
        message="" if converged else "gradient tolerance not reached",
    )


def fit_saturation(records, f_rep: float) -> FitResult:
    """Fit count rates y = f_rep (1 - exp(-mu x)) + dark over (mu, dark).

    Parameters
    ----------
    records : iterable of SweepRecord
        (transmission, count rate) sweep spanning enough range to
        resolve the exponential curvature.
    f_rep : float
        Pulse repetition frequency in Hz (the saturation amplitude).

    Returns
    -------
    FitResult with parameters ``mu_eff`` (effective mean photon number
    at unit transmission) and ``dark_rate``.
    """
    if f_rep <= 0:
        raise ValueError(f"f_rep must be > 0, got {f_rep}")
    return _fit_exponential(records, f_rep, "mu_eff", "dark_rate", rate_scale=1.0)


def fit_mean_clicks(records, n_bins: int) -> FitResult:
    """Fit mean clicks c(x) = N (1 - exp(-mu x / N)) + d over (mu, d).

    Same model family as :func:`fit_saturation` with amplitude N; the
    offset is the per-pulse dark-click contribution.  With N = 1 this
    reduces to the single-detector saturation fit at unit repetition
    rate.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    return _fit_exponential(records, float(n_bins), "mu_eff", "dark_clicks",
                            rate_scale=float(n_bins))


def correction_table(records, linear: FitResult) -> list[tuple[float, float]]:
    """Correction factor of each record against a linear prediction.

    C = (slope x + intercept) / y per record; zero-rate records are
    skipped with a warning since the ratio is undefined there.
    """
    slope = linear.params["slope"]
    intercept = linear.params["intercept"]
    table = []
    for record in records:
        if record.y <= 0:
            warnings.warn(f"skipping zero-rate record at x={record.x}", stacklevel=2)
            continue
        table.append((record.y, (slope * record.x + intercept) / record.y))
    return table


def saturation_model(x, mu: float, dark: float, f_rep: float) -> np.ndarray:
    """Model curve used by :func:`fit_saturation` (exposed for validation)."""
    return _exp_model(np.asarray(x, dtype=float), f_rep, mu, dark)


def saturation_jacobian(x, mu: float, f_rep: float) -> np.ndarray:
    """Analytic Jacobian of the saturation model wrt (mu, dark)."""
    return _exp_jacobian(np.asarray(x, dtype=float), f_rep, mu)
