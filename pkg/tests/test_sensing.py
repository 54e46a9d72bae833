"""Range-Doppler processing, ambiguity function, ML estimation, and CRB."""

import numpy as np
import pytest

from ddlink.core import Constellation, DDGrid, FrameParams, RngStream, TimeSignal, map_bits
from ddlink.modem import otfs_modulate
from ddlink.sensing import (
    AmbiguitySurface,
    MlResult,
    SensingConfig,
    SensingScene,
    Target,
    ambiguity_function,
    crb,
    echo,
    ml_estimate,
    nmse_eval,
    range_doppler_map,
)

PARAMS = FrameParams(16, 8)


def qpsk_frame(params, seed=0):
    c = Constellation(4)
    g = np.random.default_rng(seed)
    bits = g.integers(0, 2, size=params.grid_size * 2)
    return DDGrid.from_vec(map_bits(bits, c), params)


def tx_payload(frame):
    return TimeSignal(otfs_modulate(frame).payload, frame.params)


class TestSceneTypes:
    def test_target_validation(self):
        Target(15.9, -3.9).validate(PARAMS)
        with pytest.raises(ValueError, match="delay"):
            Target(16.0, 0.0).validate(PARAMS)
        with pytest.raises(ValueError, match="Doppler"):
            Target(0.0, 4.0).validate(PARAMS)

    def test_scene_needs_targets(self):
        with pytest.raises(ValueError, match="target"):
            SensingScene((), qpsk_frame(PARAMS))

    def test_scene_channel_taps(self):
        scene = SensingScene((Target(2.0, 1.0, 0.5j),), qpsk_frame(PARAMS))
        ch = scene.channel()
        assert ch.taps[0].delay == 2.0 and ch.taps[0].gain == 0.5j

    def test_surface_shape_check(self):
        with pytest.raises(ValueError, match="shape"):
            AmbiguitySurface(np.zeros((3, 3)), np.arange(3), np.arange(4))


class TestRangeDoppler:
    def test_integer_target_peak_is_exact(self):
        frame = qpsk_frame(PARAMS, 1)
        s = tx_payload(frame)
        scene = SensingScene((Target(5.0, 2.0),), frame)
        r = echo(scene, PARAMS, tx=s)
        surf = range_doppler_map(r, s, PARAMS)
        l, k, v = surf.peak()
        assert (l, k) == (5.0, 2.0)
        # noise-free unit target: peak equals ||s||^2
        assert v == pytest.approx(float(np.sum(np.abs(s.samples) ** 2)), rel=1e-9)

    def test_definition_oracle(self):
        # RD(l,k) = |sum_q r[q] conj(e^{j2pi k(q-l)/MN} s[(q-l) mod MN])|
        p = FrameParams(4, 4)
        g = np.random.default_rng(2)
        s = g.standard_normal(16) + 1j * g.standard_normal(16)
        r = g.standard_normal(16) + 1j * g.standard_normal(16)
        surf = range_doppler_map(TimeSignal(r, p), TimeSignal(s, p), p)
        q = np.arange(16)
        for li, l in enumerate(surf.delays):
            for ki, k in enumerate(surf.dopplers):
                ref = np.exp(2j * np.pi * k * (q - l) / 16) * np.roll(s, int(l))
                expect = abs(np.vdot(ref, r))
                assert surf.values[li, ki] == pytest.approx(expect, abs=1e-9)

    def test_oversampled_axes(self):
        s = tx_payload(qpsk_frame(PARAMS, 3))
        surf = range_doppler_map(s, s, PARAMS, oversample=4)
        assert surf.values.shape == (64, 32)
        assert surf.delays[1] == 0.25
        assert surf.dopplers.min() == -4.0

    def test_length_checks(self):
        p = FrameParams(4, 4)
        with pytest.raises(ValueError, match="mismatch"):
            range_doppler_map(TimeSignal(np.zeros(16, dtype=complex), p),
                              np.zeros(8, dtype=complex), p)
        with pytest.raises(ValueError, match="payload"):
            range_doppler_map(np.zeros(8, dtype=complex), np.zeros(8, dtype=complex), p)


class TestAmbiguity:
    def test_zero_offset_is_energy_and_maximal(self):
        s = tx_payload(qpsk_frame(PARAMS, 4))
        surf = ambiguity_function(s, PARAMS, oversample=2)
        energy = float(np.sum(np.abs(s.samples) ** 2))
        i = list(surf.delays).index(0.0)
        j = list(surf.dopplers).index(0.0)
        assert surf.values[i, j] == pytest.approx(energy, rel=1e-12)
        assert surf.values.max() <= energy * (1 + 1e-12)

    def test_symmetric_under_conjugation(self):
        # |A(l, k)| of a constant-modulus single-carrier payload is invariant
        # to the Doppler sign for the zero-delay cut
        s = tx_payload(qpsk_frame(PARAMS, 5))
        surf = ambiguity_function(s, PARAMS)
        i = list(surf.delays).index(0.0)
        for k in range(1, 4):
            jp = list(surf.dopplers).index(float(k))
            jm = list(surf.dopplers).index(float(-k))
            assert surf.values[i, jp] == pytest.approx(surf.values[i, jm], rel=1e-9)


class TestMlEstimate:
    def test_noise_free_integer_targets_exact(self):
        frame = qpsk_frame(PARAMS, 6)
        s = tx_payload(frame)
        scene = SensingScene((Target(5.0, 2.0, 0.8 + 0.1j), Target(9.0, -3.0, 0.4j)), frame)
        r = echo(scene, PARAMS, tx=s)
        est = ml_estimate(r, s, 2, PARAMS, oversample=2)
        got = sorted(est.targets)
        assert abs(got[0][0] - 5.0) < 1e-6 and abs(got[0][1] - 2.0) < 1e-6
        assert abs(got[1][0] - 9.0) < 1e-6 and abs(got[1][1] - (-3.0)) < 1e-6
        assert abs(got[0][2] - (0.8 + 0.1j)) < 1e-6
        assert abs(got[1][2] - 0.4j) < 1e-6

    def test_noise_free_fractional_consistency(self):
        frame = qpsk_frame(PARAMS, 7)
        s = tx_payload(frame)
        scene = SensingScene((Target(4.37, 1.62, 1.0),), frame)
        r = echo(scene, PARAMS, tx=s)
        est = ml_estimate(r, s, 1, PARAMS, oversample=4, tol=1e-6, max_iter=400)
        l, k, _ = est.targets[0]
        assert abs(l - 4.37) < 1e-3
        assert abs(k - 1.62) < 1e-3

    def test_two_close_fractional_targets(self):
        frame = qpsk_frame(PARAMS, 8)
        s = tx_payload(frame)
        scene = SensingScene((Target(4.1, 2.2, 1.0), Target(4.3, 2.7, 0.7)), frame)
        r = echo(scene, PARAMS, tx=s)
        est = ml_estimate(r, s, 2, PARAMS, oversample=4, tol=1e-6, max_iter=600)
        got = sorted(est.targets)
        assert abs(got[0][0] - 4.1) < 1e-2 and abs(got[0][1] - 2.2) < 1e-2
        assert abs(got[1][0] - 4.3) < 1e-2 and abs(got[1][1] - 2.7) < 1e-2

    def test_n_targets_bounds(self):
        s = tx_payload(qpsk_frame(PARAMS, 9))
        with pytest.raises(ValueError, match="n_targets"):
            ml_estimate(s, s, 0, PARAMS)
        with pytest.raises(ValueError, match="n_targets"):
            ml_estimate(s, s, 5, PARAMS)

    def test_outputs_wrapped_to_canonical_ranges(self):
        frame = qpsk_frame(PARAMS, 10)
        s = tx_payload(frame)
        scene = SensingScene((Target(0.05, -3.9),), frame)
        r = echo(scene, PARAMS, tx=s)
        est = ml_estimate(r, s, 1, PARAMS, oversample=4)
        l, k, _ = est.targets[0]
        assert 0 <= l < 16
        assert -4 <= k < 4


class TestCrb:
    def scene(self, snr=30.0, seed=11):
        frame = qpsk_frame(PARAMS, seed)
        return SensingScene((Target(4.1, 2.2, 1.0), Target(9.5, -2.5, 0.7)), frame,
                            snr_db=snr), frame

    def test_positive_and_symmetric_in_noise(self):
        scene, _ = self.scene()
        bounds = crb(scene, PARAMS)
        assert len(bounds) == 2
        for bl, bk in bounds:
            assert bl > 0 and bk > 0

    def test_snr_scaling_exact(self):
        # +3.0103 dB (factor 2 in noise power) halves every CRB entry
        scene_lo, frame = self.scene(snr=20.0)
        scene_hi = SensingScene(scene_lo.targets, frame, snr_db=20.0 + 10 * np.log10(2))
        lo = np.array(crb(scene_lo, PARAMS))
        hi = np.array(crb(scene_hi, PARAMS))
        assert np.max(np.abs(hi * 2 - lo) / lo) < 1e-6

    def test_richardson_step_stability(self):
        scene, _ = self.scene()
        a = np.array(crb(scene, PARAMS, fd_step=1e-4))
        b = np.array(crb(scene, PARAMS, fd_step=1e-5))
        assert np.max(np.abs(a - b) / b) < 0.01

    def test_coincident_targets_singular(self):
        frame = qpsk_frame(PARAMS, 12)
        scene = SensingScene((Target(4.0, 2.0), Target(4.0, 2.0)), frame, snr_db=20.0)
        with pytest.raises(np.linalg.LinAlgError, match="singular|Singular"):
            crb(scene, PARAMS)

    def test_requires_noise(self):
        scene, _ = self.scene(snr=np.inf)
        with pytest.raises(ValueError, match="noise"):
            crb(scene, PARAMS)


class TestNmseSweep:
    def test_rows_and_determinism(self):
        cfg = SensingConfig(PARAMS, target_positions=((4.1, 2.2),),
                            reflectivity_db=(0.0,), snrs_db=(20.0,), trials=3, seed=13)
        r1 = nmse_eval(cfg)
        r2 = nmse_eval(cfg)
        assert r1 == r2
        assert len(r1) == 2  # one target x (delay, doppler)
        for snr, par, idx, nmse, stderr, bound in r1:
            assert snr == 20.0 and idx == 0
            assert par in ("delay", "doppler")
            assert nmse >= 0 and stderr >= 0 and bound > 0

    def test_nmse_decreases_with_snr_and_tracks_crb(self):
        cfg = SensingConfig(PARAMS, target_positions=((4.1, 2.2),),
                            reflectivity_db=(0.0,), snrs_db=(15.0, 35.0), trials=6,
                            seed=14)
        rows = nmse_eval(cfg)
        by_snr = {}
        for snr, par, idx, nmse, _se, bound in rows:
            by_snr.setdefault(snr, []).append((nmse, bound))
        lo = np.mean([n for n, _ in by_snr[15.0]])
        hi = np.mean([n for n, _ in by_snr[35.0]])
        assert hi < lo
        for nmse, bound in by_snr[35.0]:
            assert nmse >= 0.2 * bound  # cannot beat the bound (allow MC slack)
            assert nmse <= 10 * bound  # and stays near it at high SNR

    def test_config_validation(self):
        with pytest.raises(ValueError, match="trials"):
            SensingConfig(PARAMS, trials=0).validate()
        with pytest.raises(ValueError, match="reflectivity"):
            SensingConfig(PARAMS, target_positions=((1.0, 1.0),),
                          reflectivity_db=(0.0, -3.0)).validate()
