"""Shared test oracles.

The brute-force enumerations here are deliberately naive: they spell out
the defining sums so the fast implementations can be checked against
something independently convincing.
"""

import itertools
import math

import numpy as np
import pytest


def brute_force_click_matrix(bin_probs, n_max: int) -> np.ndarray:
    """Occupancy matrix by explicit enumeration of all N^n assignments.

    Each of the n photons picks a bin independently with the given
    probabilities; the entry [m, n] accumulates the weight of every
    assignment touching exactly m distinct bins.
    """
    n_bins = len(bin_probs)
    matrix = np.zeros((n_bins + 1, n_max + 1))
    matrix[0, 0] = 1.0
    for n in range(1, n_max + 1):
        for assignment in itertools.product(range(n_bins), repeat=n):
            weight = 1.0
            for bin_index in assignment:
                weight *= bin_probs[bin_index]
            matrix[len(set(assignment)), n] += weight
    return matrix


def poisson_pmf(mu: float, n_max: int) -> np.ndarray:
    """Direct Poisson evaluation through factorials (oracle only)."""
    return np.array(
        [math.exp(-mu) * mu**n / math.factorial(n) for n in range(n_max + 1)]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
