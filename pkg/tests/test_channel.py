"""Channel operator, noise, and effective-matrix oracles."""

import numpy as np
import pytest

from ddlink.channel import (
    ChannelProfile,
    add_awgn,
    apply_channel,
    apply_channel_linear,
    build_effective_dd_matrix,
    circular_shift,
    dd_shift_coupling,
    noise_variance,
    sample_channel,
)
from ddlink.core import DDChannel, DDGrid, FrameParams, PathTap, RngStream, TimeSignal
from ddlink.modem import ModemPath, otfs_demodulate, otfs_modulate


def random_dd(params, seed=0):
    g = np.random.default_rng(seed)
    data = g.standard_normal((params.m, params.n)) + 1j * g.standard_normal((params.m, params.n))
    return DDGrid(data, params)


class TestSampleChannel:
    def test_normalization_and_reference_path(self):
        p = FrameParams(32, 16)
        prof = ChannelProfile(num_paths=3, l_max=5, k_max=7)
        power = []
        for t in range(4000):
            ch = sample_channel(RngStream(0).child("ch", t), prof, p)
            assert ch.taps[0].delay == 0.0
            assert ch.num_paths == 3
            power.append(sum(abs(tap.gain) ** 2 for tap in ch.taps))
        # E sum |h_p|^2 = 1
        assert abs(np.mean(power) - 1.0) < 0.05

    def test_integer_and_fractional_modes(self):
        p = FrameParams(32, 16)
        ch = sample_channel(RngStream(1), ChannelProfile(integer_taps=True), p)
        assert ch.is_integer()
        ch = sample_channel(RngStream(1), ChannelProfile(integer_taps=False), p)
        assert not ch.is_integer()
        for tap in ch.taps:
            assert 0 <= tap.delay <= 5 and -7 <= tap.doppler <= 7

    def test_pdp_decay(self):
        # later delays carry exponentially less average power
        p = FrameParams(32, 16)
        prof = ChannelProfile(num_paths=2, l_max=5, k_max=7, pdp_exponent=2.76)
        by_delay = {}
        for t in range(6000):
            ch = sample_channel(RngStream(2).child("pdp", t), prof, p)
            tap = ch.taps[1]
            by_delay.setdefault(tap.delay, []).append(abs(tap.gain) ** 2)
        m0 = np.mean(by_delay[0.0])
        m1 = np.mean(by_delay[1.0])
        # normalization to unit total power: with two paths the second tap
        # carries e^{-g d} / (1 + e^{-g d}) of the energy
        g = np.exp(-2.76)
        assert m1 / m0 == pytest.approx((g / (1 + g)) / 0.5, rel=0.15)
        assert m1 < m0

    def test_profile_validation(self):
        p = FrameParams(8, 8)
        with pytest.raises(ValueError, match="l_max"):
            ChannelProfile(l_max=8).validate(p)
        with pytest.raises(ValueError, match="k_max"):
            ChannelProfile(l_max=5, k_max=4).validate(p)
        with pytest.raises(ValueError, match="num_paths"):
            ChannelProfile(num_paths=0).validate(p)


class TestCircularShift:
    def test_integer_is_roll(self):
        x = np.arange(8, dtype=complex)
        assert np.array_equal(circular_shift(x, 3), np.roll(x, 3))

    def test_fractional_composes(self):
        g = np.random.default_rng(0)
        x = g.standard_normal(16) + 1j * g.standard_normal(16)
        y = circular_shift(circular_shift(x, 0.3), 0.7)
        assert np.max(np.abs(y - np.roll(x, 1))) < 1e-12

    def test_fractional_on_single_tone_is_phase(self):
        n = np.arange(16)
        x = np.exp(2j * np.pi * 3 * n / 16)
        y = circular_shift(x, 2.5)
        assert np.max(np.abs(y - x * np.exp(-2j * np.pi * 3 * 2.5 / 16))) < 1e-12


class TestApplyChannel:
    def test_identity_channel(self):
        p = FrameParams(8, 4, cp_len=2)
        s = otfs_modulate(random_dd(p, 1))
        out = apply_channel(s, DDChannel((PathTap(1.0 + 0j, 0.0, 0.0),)))
        assert np.max(np.abs(out.samples - s.samples)) < 1e-12

    def test_pure_doppler_is_phase_ramp(self):
        p = FrameParams(8, 8)
        x = np.ones(64, dtype=complex)
        out = apply_channel(TimeSignal(x, p), DDChannel((PathTap(1.0 + 0j, 0.0, 3.0),)))
        q = np.arange(64)
        assert np.max(np.abs(out.samples - np.exp(2j * np.pi * 3 * q / 64))) < 1e-12

    def test_definition_oracle(self):
        # r[q] = sum_p h_p e^{j2pi k_p (q-l_p)/MN} s[(q-l_p) mod MN]
        p = FrameParams(8, 4)
        g = np.random.default_rng(9)
        s = g.standard_normal(32) + 1j * g.standard_normal(32)
        taps = (PathTap(0.8 - 0.1j, 0.0, 1.0), PathTap(0.3j, 3.0, -1.0),
                PathTap(0.2 + 0.2j, 5.0, 1.0))
        out = apply_channel(TimeSignal(s, p), DDChannel(taps)).samples
        expect = np.zeros(32, dtype=complex)
        for q in range(32):
            for tap in taps:
                l, k = int(tap.delay), tap.doppler
                expect[q] += tap.gain * np.exp(2j * np.pi * k * (q - l) / 32) * s[(q - l) % 32]
        assert np.max(np.abs(out - expect)) < 1e-12

    def test_circular_equals_cp_protected_linear(self):
        # with cp_len >= max delay, stripping the CP of the linear output
        # reproduces the circular model (integer delays, Doppler-free)
        p = FrameParams(8, 4, cp_len=4)
        s = otfs_modulate(random_dd(p, 3))
        h = DDChannel((PathTap(0.9 + 0j, 0.0, 0.0), PathTap(0.3 - 0.2j, 3.0, 0.0)))
        circ = apply_channel(s, h).payload
        lin = apply_channel_linear(s, h).payload
        assert np.max(np.abs(lin - circ)) < 1e-12

    def test_linear_rejects_fractional_delay(self):
        p = FrameParams(8, 4)
        with pytest.raises(ValueError, match="integer"):
            apply_channel_linear(TimeSignal(np.ones(32, dtype=complex), p),
                                 DDChannel((PathTap(1.0 + 0j, 0.5, 0.0),)))

    def test_linearity_in_paths(self):
        p = FrameParams(8, 4)
        s = TimeSignal(np.random.default_rng(4).standard_normal(32) + 0j, p)
        t1 = PathTap(0.7 + 0.1j, 2.0, 1.0)
        t2 = PathTap(0.2 - 0.4j, 4.0, -1.0)
        both = apply_channel(s, DDChannel((t1, t2))).samples
        parts = apply_channel(s, DDChannel((t1,))).samples + apply_channel(
            s, DDChannel((t2,))).samples
        assert np.max(np.abs(both - parts)) < 1e-12


class TestAwgn:
    def test_empirical_snr(self):
        p = FrameParams(64, 32)
        x = TimeSignal(np.ones(2048, dtype=complex), p)
        for snr in (0.0, 10.0, 20.0):
            errs = []
            for t in range(40):
                y = add_awgn(x, snr, RngStream(5).child("n", t))
                errs.append(np.mean(np.abs(y.samples - x.samples) ** 2))
            measured = -10 * np.log10(np.mean(errs))
            assert abs(measured - snr) < 0.1

    def test_infinite_snr_noop(self):
        p = FrameParams(8, 4)
        x = TimeSignal(np.ones(32, dtype=complex), p)
        assert np.array_equal(add_awgn(x, np.inf, RngStream(0)).samples, x.samples)

    def test_noise_variance_helper(self):
        assert noise_variance(2.0, 10.0) == pytest.approx(0.2)
        assert noise_variance(1.0, np.inf) == 0.0


class TestEffectiveMatrix:
    @pytest.mark.parametrize("path", list(ModemPath))
    def test_single_tap_is_phase_decorated_permutation(self, path):
        p = FrameParams(4, 4)
        h = DDChannel((PathTap(1.0 + 0j, 1.0, 1.0),))
        H = build_effective_dd_matrix(h, path, p).h
        # exactly one entry per row/column, all unit modulus
        nz = np.abs(H) > 1e-12
        assert np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)
        assert np.max(np.abs(np.abs(H[nz]) - 1.0)) < 1e-12
        # and it is unitary
        assert np.max(np.abs(H.conj().T @ H - np.eye(16))) < 1e-12

    def test_coupling_matches_matrix(self):
        p = FrameParams(4, 4)
        C = dd_shift_coupling(1, 1, p)
        H = build_effective_dd_matrix(
            DDChannel((PathTap(1.0 + 0j, 1.0, 1.0),)), ModemPath.DIRECT_DZT, p).h
        for l in range(4):
            for k in range(4):
                out_q = l + 4 * k
                in_q = (l - 1) % 4 + 4 * ((k - 1) % 4)
                assert abs(H[out_q, in_q] - C[l, k]) < 1e-12

    @pytest.mark.parametrize("integer", [True, False])
    @pytest.mark.parametrize("path", list(ModemPath))
    def test_matrix_reproduces_chain(self, integer, path):
        p = FrameParams(8, 8)
        prof = ChannelProfile(num_paths=3, l_max=5, k_max=3, integer_taps=integer)
        for t in range(3):
            h = sample_channel(RngStream(6).child("hm", t), prof, p)
            H = build_effective_dd_matrix(h, path, p)
            x = random_dd(p, seed=100 + t)
            direct = otfs_demodulate(apply_channel(otfs_modulate(x, path), h), path)
            assert np.max(np.abs(H.apply(x).vec() - direct.vec())) < 1e-9

    def test_sparsity_for_integer_channels(self):
        p = FrameParams(8, 8)
        h = sample_channel(RngStream(7), ChannelProfile(num_paths=3, l_max=5, k_max=3), p)
        H = build_effective_dd_matrix(h, ModemPath.DIRECT_DZT, p).h
        distinct_shifts = {(tap.delay % 8, tap.doppler % 8) for tap in h.taps}
        assert np.count_nonzero(np.abs(H) > 1e-12) <= 64 * len(distinct_shifts)

    def test_linearity_in_gains(self):
        p = FrameParams(4, 4)
        t1 = PathTap(0.5 + 0.5j, 1.0, 1.0)
        t2 = PathTap(0.1 - 0.3j, 2.0, -1.0)
        H12 = build_effective_dd_matrix(DDChannel((t1, t2)), ModemPath.DIRECT_DZT, p).h
        H1 = build_effective_dd_matrix(DDChannel((t1,)), ModemPath.DIRECT_DZT, p).h
        H2 = build_effective_dd_matrix(DDChannel((t2,)), ModemPath.DIRECT_DZT, p).h
        assert np.max(np.abs(H12 - H1 - H2)) < 1e-12

    def test_size_guard(self):
        p = FrameParams(128, 64)
        with pytest.raises(ValueError, match="guard"):
            build_effective_dd_matrix(
                DDChannel((PathTap(1.0 + 0j, 0.0, 0.0),)), ModemPath.DIRECT_DZT, p)
