import numpy as np
import pytest

from apdlab.errors import CapacityError
from apdlab.photon_stats import PhotonNumberDistribution, coherent_distribution, mandel_q
from apdlab.tmd import (
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
from conftest import brute_force_click_matrix


def truncated_coherent(mu: float, n_max: int) -> PhotonNumberDistribution:
    """Coherent state restricted to 0..n_max and renormalized."""
    raw = coherent_distribution(mu, n_max)
    return PhotonNumberDistribution(raw.probs / raw.probs.sum())


class TestNetwork:
    def test_symmetric_bins(self):
        net = SplittingNetwork.symmetric(3)
        assert net.n_bins == 8
        assert np.allclose(bin_probabilities(net), 1 / 8, atol=1e-15)

    def test_single_splitter(self):
        net = SplittingNetwork(1, (0.6,))
        assert np.allclose(bin_probabilities(net), [0.6, 0.4])

    def test_two_stage_path_products(self):
        net = SplittingNetwork(2, (0.5, 0.4, 0.7))
        assert np.allclose(bin_probabilities(net), [0.20, 0.30, 0.35, 0.15], atol=1e-15)

    def test_bin_probabilities_sum_to_one(self, rng):
        for stages in (1, 2, 3, 4):
            ratios = tuple(rng.uniform(0.1, 0.9, 2**stages - 1))
            probs = bin_probabilities(SplittingNetwork(stages, ratios))
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            SplittingNetwork(1, (0.5, 0.5))  # wrong count
        with pytest.raises(ValueError):
            SplittingNetwork(1, (1.0,))  # ratio on the boundary
        with pytest.raises(ValueError):
            SplittingNetwork(0, ())


class TestConvolutionMatrix:
    def test_no_photons_column(self):
        conv = convolution_matrix(SplittingNetwork.symmetric(3), 5)
        assert conv.entries[0, 0] == 1.0
        assert np.all(conv.entries[1:, 0] == 0.0)

    def test_symmetric_two_and_three_photons(self):
        conv = convolution_matrix(SplittingNetwork.symmetric(3), 3)
        assert conv.entries[1, 2] == pytest.approx(1 / 8, abs=1e-15)
        assert conv.entries[2, 2] == pytest.approx(7 / 8, abs=1e-15)
        assert conv.entries[1, 3] == pytest.approx(1 / 64, abs=1e-15)
        assert conv.entries[2, 3] == pytest.approx(21 / 64, abs=1e-15)
        assert conv.entries[3, 3] == pytest.approx(42 / 64, abs=1e-15)

    def test_matches_brute_force_arbitrary_ratios(self, rng):
        ratios = tuple(rng.uniform(0.25, 0.75, 7))
        net = SplittingNetwork(3, ratios)
        conv = convolution_matrix(net, 5)
        oracle = brute_force_click_matrix(bin_probabilities(net), 5)
        assert np.abs(conv.entries - oracle).max() < 1e-12

    def test_matches_brute_force_small_networks(self, rng):
        for stages in (1, 2):
            ratios = tuple(rng.uniform(0.1, 0.9, 2**stages - 1))
            net = SplittingNetwork(stages, ratios)
            conv = convolution_matrix(net, 6)
            oracle = brute_force_click_matrix(bin_probabilities(net), 6)
            assert np.abs(conv.entries - oracle).max() < 1e-12

    def test_columns_stochastic_and_triangular(self, rng):
        ratios = tuple(rng.uniform(0.2, 0.8, 15))
        conv = convolution_matrix(SplittingNetwork(4, ratios), 12)
        assert np.abs(conv.entries.sum(axis=0) - 1.0).max() < 1e-12
        for n in range(13):
            assert np.all(conv.entries[n + 1 :, n] == 0.0)

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            convolution_matrix(SplittingNetwork.symmetric(3), 2000)
        with pytest.raises(CapacityError):
            convolution_matrix(SplittingNetwork.symmetric(3), 64, work_limit=10)


class TestSymmetricClosedForm:
    def test_matches_dp(self):
        dp = convolution_matrix(SplittingNetwork.symmetric(3), 8)
        closed = convolution_matrix_symmetric(8, 8)
        assert np.abs(dp.entries - closed.entries).max() < 1e-12

    def test_single_bin(self):
        conv = convolution_matrix_symmetric(1, 4)
        for n in range(1, 5):
            assert conv.entries[1, n] == pytest.approx(1.0, abs=1e-15)

    def test_one_photon(self):
        conv = convolution_matrix_symmetric(8, 1)
        assert conv.entries[1, 1] == pytest.approx(1.0, abs=1e-15)


class TestLossMatrix:
    def test_identity_at_unit_transmission(self):
        loss = loss_matrix(1.0, 5)
        assert np.array_equal(loss.entries, np.eye(6))

    def test_binomial_column(self):
        loss = loss_matrix(0.5, 2)
        assert np.allclose(loss.entries[:, 2], [0.25, 0.5, 0.25], atol=1e-15)

    def test_columns_normalized(self):
        loss = loss_matrix(0.37, 20)
        assert np.abs(loss.entries.sum(axis=0) - 1.0).max() < 1e-12


class TestForwardModel:
    net = SplittingNetwork.symmetric(3)

    def test_vacuum(self):
        rho = coherent_distribution(0.0, 8)
        p = forward_click_statistics(rho, convolution_matrix(self.net, 8))
        assert p.probs[0] == pytest.approx(1.0, abs=1e-12)

    def test_single_photon_single_click(self):
        probs = np.zeros(9)
        probs[1] = 1.0
        rho = PhotonNumberDistribution(probs)
        p = forward_click_statistics(rho, convolution_matrix(self.net, 8))
        assert p.probs[1] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("mu", [0.3, 1.0, 2.232])
    def test_mean_clicks_closed_form(self, mu):
        rho = coherent_distribution(mu)
        conv = convolution_matrix(self.net, rho.n_max)
        p = forward_click_statistics(rho, conv)
        assert p.mean_clicks() == pytest.approx(
            expected_mean_clicks(mu, 8, 0.0, 1e6), rel=1e-9
        )

    @pytest.mark.parametrize("transmission", [0.25, 0.6, 1.0])
    def test_mean_clicks_with_loss(self, transmission):
        # loss on coherent light only rescales the effective mean
        mu = 2.0
        rho = coherent_distribution(mu)
        conv = convolution_matrix(self.net, rho.n_max)
        loss = loss_matrix(transmission, rho.n_max) if transmission < 1 else None
        p = forward_click_statistics(rho, conv, loss)
        assert p.mean_clicks() == pytest.approx(
            expected_mean_clicks(transmission * mu, 8, 0.0, 1e6), rel=1e-9
        )

    def test_rejects_hard_truncation(self):
        rho = coherent_distribution(2.0, 4)  # tail ~ 5e-2
        with pytest.raises(ValueError):
            forward_click_statistics(rho, convolution_matrix(self.net, 4))

    def test_raw_q_below_one_and_decreasing(self):
        qs = []
        for mu in [0.5, 1.0, 2.0, 3.0]:
            rho = coherent_distribution(mu)
            conv = convolution_matrix(self.net, rho.n_max)
            qs.append(mandel_q(forward_click_statistics(rho, conv)))
        assert all(q < 1.0 for q in qs)
        assert all(b < a for a, b in zip(qs, qs[1:]))


class TestDeconvolve:
    net = SplittingNetwork.symmetric(3)
    conv = convolution_matrix(net, 8)

    @pytest.mark.parametrize("mu", [0.2, 1.0, 2.232])
    def test_roundtrip_identity(self, mu):
        rho = truncated_coherent(mu, 8)
        p = forward_click_statistics(rho, self.conv)
        recovered = deconvolve(p, self.conv)
        assert np.abs(recovered.probs - rho.probs).max() < 1e-9

    def test_roundtrip_with_loss(self):
        rho = truncated_coherent(1.3, 8)
        loss = loss_matrix(0.55, 8)
        p = forward_click_statistics(rho, self.conv, loss)
        recovered = deconvolve(p, self.conv, loss)
        assert np.abs(recovered.probs - rho.probs).max() < 1e-9

    def test_vacuum_clicks(self):
        probs = np.zeros(9)
        probs[0] = 1.0
        recovered = deconvolve(ClickStatistics(probs, 8), self.conv)
        assert recovered.probs[0] == pytest.approx(1.0, abs=1e-12)
        assert np.abs(recovered.probs[1:]).max() < 1e-12

    def test_q_restored_from_full_statistics(self):
        # clicks of an untruncated coherent state, inverted on the square
        # system: the first two moments extrapolate correctly
        rho = coherent_distribution(2.232)
        p = forward_click_statistics(rho, convolution_matrix(self.net, rho.n_max))
        recovered = deconvolve(p, self.conv)
        assert mandel_q(recovered) == pytest.approx(1.0, abs=1e-3)

    def test_negative_entries_flagged_not_clipped(self, rng):
        rho = coherent_distribution(2.5)
        p_exact = forward_click_statistics(rho, convolution_matrix(self.net, rho.n_max))
        counts = rng.multinomial(2000, p_exact.probs)
        noisy = ClickStatistics(counts / 2000, 8)
        recovered = deconvolve(noisy, self.conv)
        assert recovered.has_negative  # 2000 shots leave visible noise
        projected = deconvolve(noisy, self.conv, clip_negative=True)
        assert not projected.has_negative
        assert projected.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_underdetermined_rejected(self):
        tall = convolution_matrix(self.net, 12)
        rho = coherent_distribution(1.0)
        p = forward_click_statistics(rho, convolution_matrix(self.net, rho.n_max))
        with pytest.raises(ValueError, match="underdetermined"):
            deconvolve(p, tall)

    def test_singular_loss_rejected(self):
        rho = truncated_coherent(0.5, 8)
        p = forward_click_statistics(rho, self.conv)
        with pytest.raises(ValueError, match="singular"):
            deconvolve(p, self.conv, loss_matrix(0.0, 8))


class TestExpectedMeanClicks:
    def test_zero_input(self):
        assert expected_mean_clicks(0.0, 8, 0.0, 1e6) == 0.0

    def test_operating_point(self):
        # 8 * (1 - exp(-2.232/8)) = 1.947680774279621 by direct evaluation
        assert expected_mean_clicks(2.232, 8, 0.0, 2e6) == pytest.approx(
            1.947680774279621, rel=1e-12
        )

    def test_dark_offset(self):
        assert expected_mean_clicks(0.0, 8, 16e3, 2e6) == pytest.approx(8e-3)

    def test_saturation(self):
        assert expected_mean_clicks(1e4, 8, 0.0, 1e6) == pytest.approx(8.0)


class TestSplittingRatioSensitivity:
    def test_identical(self):
        assert splitting_ratio_sensitivity((0.5,) * 7, (0.5,) * 7, 8) == 0.0

    def test_deep_network_insensitive(self):
        diff = splitting_ratio_sensitivity((0.5,) * 7, (0.45,) * 7, 8)
        assert diff < 0.02

    def test_single_splitter_sensitive(self):
        # P(2 clicks | 2 photons) = 2 r (1-r): 0.5 vs 0.18
        diff = splitting_ratio_sensitivity((0.5,), (0.9,), 2)
        assert diff == pytest.approx(0.32, abs=1e-12)

    def test_depth_mismatch(self):
        with pytest.raises(ValueError):
            splitting_ratio_sensitivity((0.5,), (0.5,) * 3, 2)


class TestTransferMatrixType:
    def test_validation(self):
        with pytest.raises(ValueError):
            TransferMatrix(np.array([[0.5, 0.0], [0.4, 1.0]]))  # column sum
        with pytest.raises(ValueError):
            TransferMatrix(np.array([[1.0, 0.5], [-0.0001, 0.5001]]))

    def test_shape_properties(self):
        conv = convolution_matrix(SplittingNetwork.symmetric(2), 6)
        assert conv.n_outcomes == 4
        assert conv.n_max == 6
