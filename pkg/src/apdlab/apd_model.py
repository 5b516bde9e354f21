"""Closed-form count-rate model for a binary click detector.

An avalanche photodiode fires at most one click per pulse regardless of
how many photons arrive, so the expected count rate at repetition
frequency f is

    R = f * eta * (1 - P0) + R_dark

with P0 the per-pulse vacuum probability.  Once the repetition period
drops below the detector dead time, pulses arriving while the detector
recovers are lost; to first order in the click probability this costs a
factor (1 - p_gamma)^n where n is the number of grid periods that fit
inside the dead time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class DetectorParams:
    """Static detector characteristics.

    eta_apd : power quantum efficiency in [0, 1]
    dark_rate : background click rate in counts/s
    dead_time : recovery time after a click in seconds
    """

    eta_apd: float
    dark_rate: float
    dead_time: float

    def __post_init__(self):
        if not 0.0 <= self.eta_apd <= 1.0:
            raise ValueError(f"eta_apd must be in [0, 1], got {self.eta_apd}")
        if self.dark_rate < 0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")
        if self.dead_time <= 0:
            raise ValueError(f"dead_time must be > 0, got {self.dead_time}")


@dataclass(frozen=True)
class RatePrediction:
    """A predicted count rate plus the dead-time factor already applied."""

    rate: float
    correction_applied: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if not 0.0 < self.correction_applied <= 1.0:
            raise ValueError("correction_applied must be in (0, 1]")


def expected_count_rate(f_rep: float, params: DetectorParams, p0: float) -> float:
    """Linear-regime count rate f * eta * (1 - p0) + dark."""
    if f_rep <= 0:
        raise ValueError(f"f_rep must be > 0, got {f_rep}")
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must be in [0, 1], got {p0}")
    return f_rep * params.eta_apd * (1.0 - p0) + params.dark_rate


def effective_count_rate_coherent(f_rep: float, mu_eff: float, dark_rate: float) -> float:
    """Count rate for coherent pulses, f * (1 - exp(-mu_eff)) + dark.

    The quantum efficiency is absorbed into the effective mean photon
    number, which is what a transmission sweep actually calibrates.
    """
    if f_rep <= 0:
        raise ValueError(f"f_rep must be > 0, got {f_rep}")
    if mu_eff < 0:
        raise ValueError(f"mu_eff must be >= 0, got {mu_eff}")
    return f_rep * -math.expm1(-mu_eff) + dark_rate


def correction_factor(r_real: float, r_measured: float) -> float:
    """Ratio of true to measured count rate."""
    if r_measured <= 0:
        raise ValueError(f"measured rate must be > 0, got {r_measured}")
    return r_real / r_measured


def dead_time_slots(dead_time: float, rep_period: float) -> int:
    """Number of repetition periods fitting inside the dead time.

    Returns the largest n with n * rep_period <= dead_time; exact
    multiples count as occupied slots.  The comparison is done on the
    product rather than on a rounded quotient so the boundary convention
    survives floating-point division.
    """
    if dead_time <= 0:
        raise ValueError(f"dead_time must be > 0, got {dead_time}")
    if rep_period <= 0:
        raise ValueError(f"rep_period must be > 0, got {rep_period}")
    if rep_period > dead_time:
        return 0
    n = int(dead_time / rep_period)
    while (n + 1) * rep_period <= dead_time:
        n += 1
    while n > 0 and n * rep_period > dead_time:
        n -= 1
    return n


def pulsed_correction(p_gamma: float, dead_time: float, rep_period: float) -> float:
    """First-order dead-time correction factor (1 - p_gamma)^n.

    n counts the pulse slots preceding a potential click that fall
    within one dead time; the detector is live only if all of them were
    empty.  Equals 1 whenever the repetition period exceeds the dead
    time.  Valid for small p_gamma: higher-order recovery effects make
    this an overestimate of the loss at large click probabilities.
    """
    if not 0.0 <= p_gamma <= 1.0:
        raise ValueError(f"p_gamma must be in [0, 1], got {p_gamma}")
    n = dead_time_slots(dead_time, rep_period)
    return (1.0 - p_gamma) ** n


def corrected_pulsed_rate(f_rep: float, params: DetectorParams, p0: float) -> RatePrediction:
    """Pulsed count rate including the first-order dead-time correction.

    rate = f * eta * (1 - p0) * C + dark, with C computed from the
    analytic click probability p_gamma = eta * (1 - p0).
    """
    if f_rep <= 0:
        raise ValueError(f"f_rep must be > 0, got {f_rep}")
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must be in [0, 1], got {p0}")
    p_gamma = params.eta_apd * (1.0 - p0)
    c_puls = pulsed_correction(p_gamma, params.dead_time, 1.0 / f_rep)
    rate = f_rep * p_gamma * c_puls + params.dark_rate
    return RatePrediction(rate=rate, correction_applied=c_puls)
