"""Photon-number statistics for coherent light.

Laser light in a coherent state has a Poissonian photon-number
distribution whose only free parameter is the mean photon number
``mu = |alpha|^2``.  Attenuation maps a coherent state onto another
coherent state with a scaled mean, so the field amplitude never needs to
be represented: every function here works with ``mu`` (a plain float)
and with power transmissions in [0, 1].  Detection efficiencies that
cannot be calibrated independently are folded into an effective mean,
which is the same kind of number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TruncationError

# Normalization slack allowed for a stored distribution: the entries plus
# the declared tail mass must account for all probability to this level.
NORM_TOL = 1e-9

# Auto-truncation target: choose n_max so the discarded Poisson tail is
# below this mass.
TAIL_TARGET = 1e-12


def default_n_max(mu: float) -> int:
    """Truncation index with Poisson tail mass below ``TAIL_TARGET``.

    ``mu + 12*sqrt(mu) + 20`` overshoots the 1e-12 quantile of a Poisson
    distribution for all mu of interest.
    """
    return int(math.ceil(mu + 12.0 * math.sqrt(max(mu, 0.0)) + 20.0))


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Probability vector over photon number n = 0..n_max.

    ``probs[n]`` is the probability of exactly n photons; ``tail_mass``
    is the probability assigned to n > n_max by whatever produced the
    vector (zero for an exact finite distribution).  Entries plus tail
    must sum to one within ``NORM_TOL``.

    Deconvolution of noisy click data can yield small negative entries.
    Such vectors are constructed with ``allow_negative=True`` and flag
    themselves through ``has_negative``; they are never silently clipped.
    """

    probs: np.ndarray
    tail_mass: float = 0.0
    allow_negative: bool = field(default=False, repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        if self.tail_mass < -NORM_TOL:
            raise ValueError(f"tail_mass must be >= 0, got {self.tail_mass}")
        if not self.allow_negative and np.any(probs < -NORM_TOL):
            raise ValueError("negative probability entry; use allow_negative for deconvolved data")
        if np.any(probs > 1.0 + NORM_TOL):
            raise ValueError("probability entry exceeds 1")
        total = probs.sum() + self.tail_mass
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities + tail_mass sum to {total}, expected 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def has_negative(self) -> bool:
        """True if statistical noise pushed any entry below zero."""
        return bool(np.any(self.probs < 0.0))

    def mean(self) -> float:
        n = np.arange(self.probs.size)
        return float(n @ self.probs)

    def variance(self) -> float:
        n = np.arange(self.probs.size)
        mean = float(n @ self.probs)
        return float((n * n) @ self.probs) - mean * mean


def coherent_distribution(
    mu: float,
    n_max: int | None = None,
    tail_tol: float | None = None,
) -> PhotonNumberDistribution:
    """Poissonian photon-number distribution of a coherent state.

    Parameters
    ----------
    mu : float
        Mean photon number, >= 0.
    n_max : int, optional
        Explicit truncation.  When omitted, the vector is extended until
        the discarded tail is below ``TAIL_TARGET``.
    tail_tol : float, optional
        When given together with an explicit ``n_max``, raise
        ``TruncationError`` if the truncated tail exceeds this mass.

    Returns
    -------
    PhotonNumberDistribution
        ``probs[n] = exp(-mu) mu^n / n!`` with the actual truncated tail
        reported in ``tail_mass``.

    Notes
    -----
    Terms are built by the recurrence ``p[n+1] = p[n] * mu / (n + 1)``,
    which is stable up to photon numbers in the hundreds where direct
    factorials would overflow.
    """
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    if n_max is None:
        n_max = default_n_max(mu)
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    probs = np.empty(n_max + 1)
    probs[0] = math.exp(-mu)
    for n in range(n_max):
        probs[n + 1] = probs[n] * mu / (n + 1)
    tail = max(0.0, 1.0 - probs.sum())
    if tail_tol is not None and tail > tail_tol:
        raise TruncationError(
            f"tail mass {tail:.3e} above {tail_tol:.3e} at n_max={n_max}; increase n_max"
        )
    return PhotonNumberDistribution(probs, tail_mass=tail)


def attenuate_coherent(mu: float, transmission: float) -> float:
    """Mean photon number after a beam splitter of given power transmission.

    An attenuated coherent state is again coherent, so attenuation is a
    plain scaling of the mean.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    return transmission * mu


def vacuum_probability(mu: float) -> float:
    """Probability that a coherent pulse of mean ``mu`` contains no photon."""
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    return math.exp(-mu)


def mandel_q(dist) -> float:
    """Mandel Q parameter, variance over mean, of a count distribution.

    Accepts a :class:`PhotonNumberDistribution`, a click-statistics
    object (anything with a ``probs`` vector), or a bare probability
    vector.  Q = 1 for Poissonian counts; Q < 1 indicates
    narrower-than-Poissonian statistics.
    """
    probs = np.asarray(getattr(dist, "probs", dist), dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("need a 1-D count distribution")
    total = probs.sum()
    if total <= 0:
        raise ValueError("distribution has no mass")
    n = np.arange(probs.size)
    mean = float(n @ probs) / total
    if mean <= 0:
        raise ValueError("Mandel Q undefined for zero-mean distribution")
    var = float((n * n) @ probs) / total - mean * mean
    return var / mean
