import numpy as np
import pytest
from hypothesis import given, strategies as st

from ofdmest.channel import PowerDelayProfile, frequency_response
from ofdmest.estimators import (ChannelEstimate, FreqCorrelation,
                                estimate_lmmse, estimate_lowrank, estimate_ls,
                                estimate_ml, estimate_mmse, interpolate_comb,
                                lmmse_matrix, ml_projection,
                                resolve_scale_ambiguity, track_lms)
from ofdmest.modem import Constellation

from conftest import crandn

PDP4 = PowerDelayProfile.exponential()


def draw_channel(rng, pdp, n_fft, size=None):
    shape = (pdp.n_taps,) if size is None else (size, pdp.n_taps)
    taps = crandn(rng, *shape) * np.sqrt(pdp.powers)
    return frequency_response(taps, pdp.delays, n_fft)


def random_hpd(rng, n, floor=0.1):
    a = crandn(rng, n, n)
    return a @ a.conj().T / n + floor * np.eye(n)


class TestChannelEstimate:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            ChannelEstimate(np.array([[np.nan]]), "ls", np.array([True]))

    def test_valid_flags_shape(self):
        with pytest.raises(ValueError):
            ChannelEstimate(np.zeros((2, 4)), "ls", np.array([True]))


class TestLs:
    def test_identity(self, rng):
        x = crandn(rng, 8)
        np.testing.assert_allclose(estimate_ls(x, x), np.ones(8))

    def test_elementwise(self):
        np.testing.assert_allclose(estimate_ls([2, 1j], [1, 1j]), [2, 1])

    def test_noiseless_recovers_channel(self, rng):
        h = draw_channel(rng, PDP4, 64)
        x = Constellation.from_name("qam16").points[rng.integers(0, 16, 64)]
        np.testing.assert_allclose(estimate_ls(h * x, x), h, atol=1e-10)

    def test_zero_pilot(self):
        with pytest.raises(ValueError):
            estimate_ls([1, 2], [1, 0])


class TestLms:
    def test_hand_iteration(self):
        out = track_lms(np.full((3, 1), 2.0), np.ones((3, 1)), 0.5, initial=[0.0])
        np.testing.assert_allclose(out[:, 0], [0, 1, 1.5])

    @pytest.mark.parametrize("mu", [0.1, 0.5, 1.0])
    def test_constant_channel_stays_exact(self, mu):
        h = 0.7 - 0.2j
        x = np.exp(1j * np.linspace(0, 3, 20))[:, None]
        out = track_lms(h * x, x, mu)
        np.testing.assert_allclose(out, h, atol=1e-14)

    def test_geometric_convergence(self):
        h, mu = 1 + 1j, 0.3
        out = track_lms(np.full((10, 1), h), np.ones((10, 1)), mu, initial=[0])
        err = np.abs(out[:, 0] - h)
        np.testing.assert_allclose(err, (1 - mu) ** np.arange(10) * abs(h), rtol=1e-12)

    def test_divergence(self):
        out = track_lms(np.ones((12, 1)), np.ones((12, 1)), 2.5, initial=[0])
        err = np.abs(out[:, 0] - 1)
        assert np.all(np.diff(err) > 0)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            track_lms(np.ones((2, 1)), np.ones((2, 1)), 0.0)


class TestMmse:
    def test_low_noise_limit_is_ls(self, rng):
        h = draw_channel(rng, PDP4, 32)
        x = np.exp(2j * np.pi * rng.random(32))
        y = h * x
        np.testing.assert_allclose(estimate_mmse(y, x, PDP4, 1e-12), estimate_ls(y, x),
                                   atol=1e-6)

    def test_single_tap_noiseless(self):
        h = 0.3 + 0.8j
        x = np.ones(16)
        np.testing.assert_allclose(
            estimate_mmse(h * x, x, PowerDelayProfile.single(), 0.0), h, atol=1e-12)

    def test_beats_ls_at_5db(self):
        rng = np.random.default_rng(5)
        n, noise_var = 64, 10 ** -0.5
        x = np.ones(n)
        err_ls, err_mmse = [], []
        for _ in range(500):
            h = draw_channel(rng, PDP4, n)
            y = h * x + np.sqrt(noise_var) * crandn(rng, n)
            err_ls.append(np.sum(np.abs(estimate_ls(y, x) - h) ** 2))
            err_mmse.append(np.sum(np.abs(estimate_mmse(y, x, PDP4, noise_var) - h) ** 2))
        assert np.mean(err_mmse) < np.mean(err_ls)

    def test_pilot_positions(self, rng):
        h = draw_channel(rng, PDP4, 64)
        pos = np.arange(0, 64, 4)
        est = estimate_mmse(h[pos], np.ones(16), PDP4, 0.0, n_fft=64, positions=pos)
        np.testing.assert_allclose(est, h[pos], atol=1e-10)


class TestLmmse:
    def test_identity_correlation(self, rng):
        h_ls = crandn(rng, 6)
        corr = FreqCorrelation(np.eye(6), snr=1.0)
        np.testing.assert_allclose(estimate_lmmse(h_ls, corr), 0.5 * h_ls, atol=1e-14)

    def test_high_snr_limit(self, rng):
        h_ls = crandn(rng, 8)
        corr = FreqCorrelation(random_hpd(rng, 8), snr=1e12)
        np.testing.assert_allclose(estimate_lmmse(h_ls, corr), h_ls, atol=1e-8)

    def test_matches_direct_inverse(self, rng):
        r = random_hpd(rng, 8)
        corr = FreqCorrelation(r, snr=3.0, beta=17 / 9)
        w = r @ np.linalg.inv(r + (17 / 9) / 3.0 * np.eye(8))
        np.testing.assert_allclose(lmmse_matrix(corr), w, atol=1e-12)

    @pytest.mark.parametrize("name, beta", [("qam16", 17 / 9), ("qpsk", 1.0), ("bpsk", 1.0)])
    def test_beta(self, name, beta):
        assert Constellation.from_name(name).beta == pytest.approx(beta, abs=1e-12)

    def test_beta_below_one_rejected(self):
        with pytest.raises(ValueError):
            FreqCorrelation(np.eye(2), 1.0, beta=0.5)

    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100.0))
    def test_shrinkage_bound(self, seed, snr):
        rng = np.random.default_rng(seed)
        r = random_hpd(rng, 6, floor=0.0)
        corr = FreqCorrelation(r, snr)
        h_ls = crandn(rng, 6)
        lam = np.linalg.eigvalsh(r)
        dmax = np.max(lam / (lam + 1.0 / snr))
        assert dmax < 1
        assert np.linalg.norm(estimate_lmmse(h_ls, corr)) <= np.linalg.norm(h_ls) * dmax + 1e-12

    def test_from_pdp_diagonal(self):
        corr = FreqCorrelation.from_pdp(PDP4, 16, 10.0)
        np.testing.assert_allclose(np.diag(corr.R_HH).real, 1.0, atol=1e-12)

    def test_from_samples_recovers_correlation(self):
        rng = np.random.default_rng(3)
        h = draw_channel(rng, PDP4, 16, size=20_000)
        corr = FreqCorrelation.from_samples(h + 0.1 * crandn(rng, *h.shape), 100.0,
                                            noise_var=0.01)
        truth = FreqCorrelation.from_pdp(PDP4, 16, 100.0).R_HH
        assert np.max(np.abs(corr.R_HH - truth)) < 0.05
        assert np.linalg.eigvalsh(corr.R_HH).min() >= -1e-12


class TestLowRank:
    def test_full_rank_equals_lmmse(self, rng):
        corr = FreqCorrelation(random_hpd(rng, 8), 5.0, 17 / 9)
        h_ls = crandn(rng, 8)
        np.testing.assert_allclose(estimate_lowrank(h_ls, corr, 8),
                                   estimate_lmmse(h_ls, corr), atol=1e-10)

    def test_exact_rank_equals_lmmse(self, rng):
        corr = FreqCorrelation.from_pdp(PDP4, 32, 10.0)
        h_ls = crandn(rng, 32)
        np.testing.assert_allclose(estimate_lowrank(h_ls, corr, PDP4.n_taps),
                                   estimate_lmmse(h_ls, corr), atol=1e-10)

    def test_rank_one(self, rng):
        u = crandn(rng, 6)
        corr = FreqCorrelation(np.outer(u, u.conj()), 2.0)
        h_ls = crandn(rng, 6)
        lam = np.vdot(u, u).real
        delta = lam / (lam + 0.5)
        un = u / np.sqrt(lam)
        np.testing.assert_allclose(estimate_lowrank(h_ls, corr, 1),
                                   delta * un * np.vdot(un, h_ls), atol=1e-12)

    @pytest.mark.parametrize("rank", [0, 9])
    def test_rank_range(self, rank):
        with pytest.raises(ValueError):
            estimate_lowrank(np.zeros(8), FreqCorrelation(np.eye(8), 1.0), rank)

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 7), st.integers(1, 7))
    def test_monotone_in_rank(self, seed, p1, p2):
        p1, p2 = sorted((p1, p2))
        rng = np.random.default_rng(seed)
        corr = FreqCorrelation(random_hpd(rng, 8, floor=0.0), 10.0)
        h_ls = crandn(rng, 8)
        full = estimate_lmmse(h_ls, corr)
        r1 = np.linalg.norm(estimate_lowrank(h_ls, corr, p1) - full)
        r2 = np.linalg.norm(estimate_lowrank(h_ls, corr, p2) - full)
        assert r2 <= r1 + 1e-12


class TestMl:
    def test_exact_in_signal_subspace(self, rng):
        taps = crandn(rng, 8)
        h = frequency_response(taps, range(8), 64)
        np.testing.assert_allclose(estimate_ml(h, 8), h, atol=1e-10)

    def test_projection_properties(self):
        p = ml_projection(64, 8)
        assert np.linalg.norm(p @ p - p) <= 1e-10
        assert np.linalg.norm(p - p.conj().T) <= 1e-10
        assert np.trace(p).real == pytest.approx(8, abs=1e-10)

    def test_noise_rejection(self):
        rng = np.random.default_rng(1)
        y = crandn(rng, 10_000, 64)
        p = ml_projection(64, 8)
        ratio = np.sum(np.abs(y @ p.T) ** 2) / np.sum(np.abs(y) ** 2)
        assert ratio == pytest.approx(8 / 64, rel=0.05)

    def test_idempotent_on_random_input(self, rng):
        y = crandn(rng, 32)
        once = estimate_ml(y, 5)
        np.testing.assert_allclose(estimate_ml(once, 5), once, atol=1e-10)

    @pytest.mark.parametrize("n_taps", [0, 17])
    def test_out_of_range(self, n_taps):
        with pytest.raises(ValueError):
            estimate_ml(np.zeros(64), n_taps, cp_length=16)

    def test_cached_read_only(self):
        p = ml_projection(16, 4)
        assert p is ml_projection(16, 4)
        with pytest.raises(ValueError):
            p[0, 0] = 1


class TestScaleAmbiguity:
    def _setup(self, rng):
        h = crandn(rng, 4)
        x = 1 + 0j
        y = x * np.sum(h)  # response at subcarrier 0
        return h, x, y

    def test_already_aligned(self, rng):
        h, x, y = self._setup(rng)
        np.testing.assert_allclose(resolve_scale_ambiguity(h, x, y), h, atol=1e-10)

    @pytest.mark.parametrize("c", [1j, 0.5 * np.exp(1j * np.pi / 3)])
    def test_rotation_and_scale(self, rng, c):
        h, x, y = self._setup(rng)
        np.testing.assert_allclose(resolve_scale_ambiguity(c * h, x, y), h, atol=1e-10)

    def test_other_subcarrier(self, rng):
        h = crandn(rng, 3)
        resp = frequency_response(h, range(3), 16)
        x = np.exp(0.4j)
        out = resolve_scale_ambiguity(2j * h, x, x * resp[5], subcarrier=5, n_fft=16)
        np.testing.assert_allclose(out, h, atol=1e-10)

    def test_zero_estimate(self):
        with pytest.raises(ValueError):
            resolve_scale_ambiguity(np.zeros(3), 1, 1)


class TestInterpolateComb:
    @pytest.mark.parametrize("method", ["linear", "transform"])
    def test_constant(self, method):
        out = interpolate_comb(np.full(8, 0.3 - 0.1j), np.arange(0, 32, 4), 32, method)
        np.testing.assert_allclose(out, 0.3 - 0.1j, atol=1e-12)

    def test_transform_exact_for_short_channel(self, rng):
        pos = np.arange(0, 64, 4)
        h = frequency_response(crandn(rng, 10), range(10), 64)
        np.testing.assert_allclose(interpolate_comb(h[pos], pos, 64, "transform"), h,
                                   atol=1e-10)

    def test_linear_chord_error(self):
        n, s = 64, 4
        k = np.arange(n)
        h = np.exp(-2j * np.pi * k / n)
        pos = np.arange(0, n, s)
        err = np.abs(interpolate_comb(h[pos], pos, n, "linear") - h)
        # every segment is a rotated copy of the first chord
        t = np.arange(s + 1) / s
        chord = (1 - t) + t * np.exp(-2j * np.pi * s / n)
        arc = np.exp(-2j * np.pi * t * s / n)
        assert err.max() == pytest.approx(np.abs(chord - arc).max(), rel=1e-12)

    def test_batched_rows(self, rng):
        pos = np.arange(0, 16, 4)
        rows = crandn(rng, 3, 4)
        out = interpolate_comb(rows, pos, 16)
        for r, o in zip(rows, out):
            np.testing.assert_allclose(interpolate_comb(r, pos, 16), o)

    @pytest.mark.parametrize("pos", [[0, 3, 8, 12], [1, 5, 9, 13]])
    def test_bad_positions(self, pos):
        with pytest.raises(ValueError):
            interpolate_comb(np.ones(4), pos, 16)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            interpolate_comb(np.ones(4), [0, 4, 8, 12], 16, "spline")
