"""Time-multiplexed detection: click statistics of photons spread over bins.

A pulse entering a binary splitting tree of k stages leaves through one
of N = 2^k time/space bins, each watched by a binary detector.  With
several photons per pulse, some bins collect more than one photon and
the click count under-reports the photon number.  The occupancy
statistics are linear: a photon-number distribution rho maps to click
statistics p through a column-stochastic, triangular convolution matrix,
and optical losses act as one binomial-thinning beam splitter in front
of the network.  Both maps invert by triangular substitution, which
recovers photon statistics from measured clicks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CapacityError
from .photon_stats import NORM_TOL, PhotonNumberDistribution

# Guard for the exact occupancy DP, whose cost grows like N^2 * n_max^2.
DEFAULT_WORK_LIMIT = 2_000_000_000
# Binomial coefficients beyond this order overflow float64.
_N_MAX_HARD_CAP = 1000


@dataclass(frozen=True)
class SplittingNetwork:
    """Binary splitting tree with one power-transmission ratio per node.

    ``ratios`` is in level order (root first; children of node i sit at
    2i+1 and 2i+2) and gives the probability of taking the first branch
    at each node.  ``base_delay`` is the temporal spacing of adjacent
    output bins; it must be at least the dead time of the downstream
    detectors for the bins to be read out independently.
    """

    stages: int
    ratios: tuple[float, ...]
    base_delay: float = 100e-9

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError(f"stages must be >= 1, got {self.stages}")
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) != 2**self.stages - 1:
            raise ValueError(
                f"{self.stages}-stage tree needs {2**self.stages - 1} ratios, got {len(ratios)}"
            )
        if any(not 0.0 < r < 1.0 for r in ratios):
            raise ValueError("all splitting ratios must lie strictly inside (0, 1)")
        if self.base_delay <= 0:
            raise ValueError(f"base_delay must be > 0, got {self.base_delay}")
        object.__setattr__(self, "ratios", ratios)

    @classmethod
    def symmetric(cls, stages: int, base_delay: float = 100e-9) -> "SplittingNetwork":
        return cls(stages, (0.5,) * (2**stages - 1), base_delay)

    @property
    def n_bins(self) -> int:
        return 2**self.stages


@dataclass(frozen=True)
class ClickStatistics:
    """Probability vector over click count m = 0..n_bins."""

    probs: np.ndarray
    n_bins: int

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size != self.n_bins + 1:
            raise ValueError(f"need {self.n_bins + 1} click probabilities, got {probs.size}")
        if np.any(probs < -NORM_TOL) or np.any(probs > 1.0 + NORM_TOL):
            raise ValueError("click probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"click probabilities sum to {probs.sum()}, expected 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def mean_clicks(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)


@dataclass(frozen=True)
class TransferMatrix:
    """Column-stochastic map from photon number to click (or survivor) count.

    ``entries[m, n]`` is the probability that n input photons produce m
    clicks (convolution matrix) or m surviving photons (loss matrix).
    Columns are probability distributions and entries vanish for m > n.
    """

    entries: np.ndarray
    kind: str = "convolution"

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError("entries must be a 2-D matrix")
        if np.any(entries < -NORM_TOL):
            raise ValueError("matrix entries must be non-negative")
        if not np.allclose(entries.sum(axis=0), 1.0, rtol=0.0, atol=NORM_TOL):
            raise ValueError("every column must sum to 1")
        rows, cols = entries.shape
        for n in range(cols):
            if n + 1 < rows and np.any(entries[n + 1 :, n] != 0.0):
                raise ValueError("entries below the m = n diagonal must be exactly 0")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def n_outcomes(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def n_max(self) -> int:
        return self.entries.shape[1] - 1


def bin_probabilities(network: SplittingNetwork) -> np.ndarray:
    """Chance of a single photon leaving through each output bin.

    The bin probability is the product of branch transmissions along the
    root-to-leaf path; the vector sums to 1 exactly.
    """
    k = network.stages
    probs = np.ones(network.n_bins)
    for leaf in range(network.n_bins):
        node = 0
        p = 1.0
        for level in range(k):
            bit = (leaf >> (k - 1 - level)) & 1
            r = network.ratios[node]
            p *= r if bit == 0 else 1.0 - r
            node = 2 * node + 1 + bit
        probs[leaf] = p
    return probs


def _occupancy_matrix(bin_probs: np.ndarray, n_max: int, work_limit: int) -> np.ndarray:
    """Exact distribution of occupied-bin counts for 0..n_max photons.

    Dynamic programming over bins with factorially-scaled occupancy
    generating functions: after absorbing bin i with probability q, the
    accumulator obeys acc'[m, n] = acc[m, n] + sum_j C(n, j) q^j
    acc[m-1, n-j].  Every stored value is itself a probability, so the
    recursion is immune to overflow; the cost is polynomial in the bin
    count and n_max where naive enumeration over N^n assignments grows
    exponentially.
    """
    n_bins = len(bin_probs)
    if n_max > _N_MAX_HARD_CAP:
        raise CapacityError(f"n_max={n_max} exceeds the hard cap {_N_MAX_HARD_CAP}")
    work = (n_bins * (n_max + 1)) ** 2
    if work > work_limit:
        raise CapacityError(
            f"occupancy DP for {n_bins} bins and n_max={n_max} exceeds the work bound"
        )
    binom = np.zeros((n_max + 1, n_max + 1))
    binom[:, 0] = 1.0
    for n in range(1, n_max + 1):
        binom[n, 1 : n + 1] = binom[n - 1, : n] + binom[n - 1, 1 : n + 1]
    acc = np.zeros((n_bins + 1, n_max + 1))
    acc[0, 0] = 1.0
    powers = np.arange(1, n_max + 1)
    for q in bin_probs:
        g = np.zeros(n_max + 1)
        g[1:] = q**powers
        new = acc.copy()
        for n in range(1, n_max + 1):
            # weight w[j-1] = C(n, j) q^j pairs with acc[m-1, n-j].
            w = binom[n, 1 : n + 1] * g[1 : n + 1]
            new[1:, n] += acc[:-1, n - 1 :: -1] @ w
        acc = new
    return acc


def convolution_matrix(
    network: SplittingNetwork,
    n_max: int,
    work_limit: int = DEFAULT_WORK_LIMIT,
) -> TransferMatrix:
    """Convolution matrix of a splitting network for up to n_max photons.

    ``entries[m, n]`` is the probability that n photons, distributed
    independently over the bins, occupy exactly m distinct bins.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    entries = _occupancy_matrix(bin_probabilities(network), n_max, work_limit)
    return TransferMatrix(entries, kind="convolution")


def convolution_matrix_symmetric(n_bins: int, n_max: int) -> TransferMatrix:
    """Closed-form convolution matrix for perfectly balanced splitting.

    entries[m, n] = C(N, m) * sum_j (-1)^j C(m, j) ((m - j)/N)^n, the
    classical occupancy formula for equally likely bins.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    entries = np.zeros((n_bins + 1, n_max + 1))
    entries[0, 0] = 1.0
    for n in range(1, n_max + 1):
        for m in range(1, min(n, n_bins) + 1):
            s = 0.0
            for j in range(m):
                s += (-1) ** j * math.comb(m, j) * ((m - j) / n_bins) ** n
            entries[m, n] = math.comb(n_bins, m) * s
    return TransferMatrix(entries, kind="convolution")


def loss_matrix(transmission: float, n_max: int) -> TransferMatrix:
    """Binomial-thinning matrix of a single lumped beam splitter.

    entries[m, n] = C(n, m) t^m (1 - t)^(n - m): each of n photons
    survives independently with probability t.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    t = transmission
    entries = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for m in range(n + 1):
            entries[m, n] = math.comb(n, m) * t**m * (1.0 - t) ** (n - m)
    return TransferMatrix(entries, kind="loss")


def forward_click_statistics(
    rho: PhotonNumberDistribution,
    conv: TransferMatrix,
    loss: TransferMatrix | None = None,
) -> ClickStatistics:
    """Click statistics p = C (L rho) of a photon-number distribution.

    Loss acts before the splitting network.  The result is renormalized
    only to absorb truncation residue up to ``NORM_TOL``; anything
    larger means rho was truncated too aggressively for this network.
    """
    vec = rho.probs
    if loss is not None:
        if loss.entries.shape[1] != vec.size:
            raise ValueError(
                f"loss matrix covers n_max={loss.n_max} but rho has n_max={rho.n_max}"
            )
        vec = loss.entries @ vec
    if conv.entries.shape[1] != vec.size:
        raise ValueError(
            f"convolution matrix covers n_max={conv.n_max} but rho has n_max={rho.n_max}"
        )
    p = conv.entries @ vec
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(
            f"click probabilities sum to {total}; rho is truncated too hard "
            "(tail mass above the normalization tolerance)"
        )
    return ClickStatistics(p / total, n_bins=conv.n_outcomes)


def deconvolve(
    p: ClickStatistics,
    conv: TransferMatrix,
    loss: TransferMatrix | None = None,
    clip_negative: bool = False,
) -> PhotonNumberDistribution:
    """Recover photon-number statistics from click statistics.

    Solves C x = p and then L rho = x by back-substitution on the
    triangular structures; no explicit inverse is formed.  Requires the
    convolution matrix restricted to a square system (n_max = n_bins) or
    smaller; more photon components than bins are underdetermined.
    Noisy input can produce small negative entries, which are reported
    through the result's ``has_negative`` flag rather than clipped;
    ``clip_negative=True`` applies an optional non-negativity projection
    (clip and renormalize) afterwards.
    """
    n_sys = conv.n_max
    if n_sys > p.n_bins:
        raise ValueError(
            f"underdetermined: convolution matrix resolves n_max={n_sys} photons "
            f"but only {p.n_bins} bins were measured"
        )
    c_square = conv.entries[: n_sys + 1, : n_sys + 1]
    if np.any(np.diag(c_square) <= 0.0):
        raise ValueError("convolution matrix has a vanishing diagonal; cannot invert")
    x = solve_triangular(c_square, p.probs[: n_sys + 1], lower=False)
    if loss is not None:
        if loss.entries.shape != (n_sys + 1, n_sys + 1):
            raise ValueError("loss matrix dimensions do not match the convolution system")
        if np.any(np.diag(loss.entries) <= 0.0):
            raise ValueError("loss matrix is singular (zero transmission)")
        x = solve_triangular(loss.entries, x, lower=False)
    leftover = float(p.probs[n_sys + 1 :].sum())
    if clip_negative:
        x = np.clip(x, 0.0, None)
        total = x.sum()
        if total <= 0:
            raise ValueError("all deconvolved entries non-positive; cannot project")
        return PhotonNumberDistribution(x / total)
    return PhotonNumberDistribution(x, tail_mass=leftover, allow_negative=True)


def expected_mean_clicks(mu_eff: float, n_bins: int, dark_rate: float, f_rep: float) -> float:
    """Mean clicks per pulse for coherent light on a balanced N-bin network.

    Each bin sees a coherent state of mean mu_eff / N, so the expected
    click count is N (1 - exp(-mu_eff / N)) plus the per-pulse dark
    contribution dark_rate / f_rep.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if f_rep <= 0:
        raise ValueError(f"f_rep must be > 0, got {f_rep}")
    if mu_eff < 0:
        raise ValueError(f"mu_eff must be >= 0, got {mu_eff}")
    return n_bins * -math.expm1(-mu_eff / n_bins) + dark_rate / f_rep


def splitting_ratio_sensitivity(ratios_a, ratios_b, n_max: int) -> float:
    """Largest entrywise difference between two convolution matrices.

    Both ratio tuples must describe trees of the same depth.  Deep
    balanced-ish networks are remarkably insensitive to the individual
    splitting ratios; a single splitter is not.
    """
    ratios_a = tuple(ratios_a)
    ratios_b = tuple(ratios_b)
    if len(ratios_a) != len(ratios_b):
        raise ValueError("ratio lists describe trees of different depth")
    stages = (len(ratios_a) + 1).bit_length() - 1
    net_a = SplittingNetwork(stages, ratios_a)
    net_b = SplittingNetwork(stages, ratios_b)
    c_a = convolution_matrix(net_a, n_max)
    c_b = convolution_matrix(net_b, n_max)
    return float(np.abs(c_a.entries - c_b.entries).max())
