"""Core domain types: frame geometry, grids, constellations, RNG streams."""

import numpy as np
import pytest

from ddlink.core import (
    Constellation,
    DDChannel,
    DDGrid,
    FrameParams,
    PathTap,
    RngStream,
    TimeSignal,
    demap_hard,
    map_bits,
)


class TestFrameParams:
    def test_resolution_identities(self):
        # delay resolution * (M * delta_f) = 1 and Doppler * (N * T) = 1 exactly
        for m, n, df in [(8, 4, 15e3), (32, 16, 30e3), (64, 32, 120e3)]:
            p = FrameParams(m, n, delta_f=df)
            assert p.delay_resolution * m * df == 1.0
            assert p.doppler_resolution * n * p.symbol_duration == 1.0
            assert p.symbol_duration * p.delta_f == 1.0

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ValueError, match="M >= 2"):
            FrameParams(1, 16)
        with pytest.raises(ValueError, match="M >= 2"):
            FrameParams(8, 0)
        with pytest.raises(ValueError):
            FrameParams(8, 4, cp_len=-1)
        with pytest.raises(ValueError):
            FrameParams(8, 4, order=8)

    def test_overhead_accessors(self):
        p = FrameParams(32, 16, cp_len=8)
        assert p.otfs_overhead == 512 / 520
        assert p.ofdm_overhead == 32 / 40
        assert FrameParams(32, 16).otfs_overhead == 1.0


class TestGrids:
    def test_vec_order_is_delay_fast(self):
        p = FrameParams(3, 2)
        g = DDGrid(np.arange(6, dtype=complex).reshape(3, 2, order="F"), p)
        # q = l + k*M
        v = g.vec()
        for l in range(3):
            for k in range(2):
                assert v[l + k * 3] == g.data[l, k]
        assert np.array_equal(DDGrid.from_vec(v, p).data, g.data)

    def test_shape_and_finite_validation(self):
        p = FrameParams(4, 4)
        with pytest.raises(ValueError, match="shape"):
            DDGrid(np.zeros((4, 3)), p)
        bad = np.zeros((4, 4), dtype=complex)
        bad[1, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            DDGrid(bad, p)

    def test_grid_data_is_readonly(self):
        g = DDGrid.zeros(FrameParams(4, 4))
        with pytest.raises(ValueError):
            g.data[0, 0] = 1.0


class TestTimeSignal:
    def test_lengths_and_payload(self):
        p = FrameParams(4, 4, cp_len=3)
        body = np.arange(16, dtype=complex)
        s = TimeSignal(np.concatenate([body[-3:], body]), p, has_cp=True)
        assert np.array_equal(s.payload, body)
        assert TimeSignal(body, p).payload.size == 16
        with pytest.raises(ValueError, match="length"):
            TimeSignal(body, p, has_cp=True)

    def test_per_symbol_cp_length(self):
        p = FrameParams(4, 4, cp_len=2)
        s = TimeSignal(np.zeros(4 * (4 + 2), dtype=complex), p, per_symbol_cp=True)
        with pytest.raises(ValueError, match="payload"):
            _ = s.payload


class TestChannelTypes:
    def test_path_tap_bounds(self):
        p = FrameParams(8, 8)
        PathTap(1.0, 7.9, 3.9).validate(p)
        with pytest.raises(ValueError, match="delay"):
            PathTap(1.0, 8.0, 0.0).validate(p)
        with pytest.raises(ValueError, match="Doppler"):
            PathTap(1.0, 0.0, 4.0).validate(p)
        with pytest.raises(ValueError, match="Doppler"):
            PathTap(1.0, 0.0, -4.0).validate(p)

    def test_channel_sparsity_and_accessors(self):
        taps = tuple(PathTap(0.1j, p, -p) for p in range(3))
        h = DDChannel(taps)
        assert h.num_paths == 3
        assert h.max_delay == 2.0
        assert h.max_doppler == 2.0
        assert h.is_integer()
        assert not DDChannel((PathTap(1.0, 0.5, 0.0),)).is_integer()
        with pytest.raises(ValueError):
            DDChannel(())


class TestConstellation:
    def test_qpsk_pinned_mapping(self):
        # bits 00 -> (+1+j)/sqrt(2) under the pinned Gray table
        c = Constellation(4)
        s = map_bits([0, 0], c)
        assert abs(s[0] - (1 + 1j) / np.sqrt(2)) < 1e-15
        # first bit flips the real sign, second the imaginary sign (Gray, 1 level each)
        assert np.real(map_bits([1, 0], c)[0]) < 0 < np.imag(map_bits([1, 0], c)[0])

    def test_empty_bits(self):
        c = Constellation(4)
        assert map_bits([], c).size == 0
        assert demap_hard([], c).size == 0

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_unit_energy(self, order):
        c = Constellation(order)
        assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_roundtrip_all_symbols(self, order):
        c = Constellation(order)
        k = c.bits_per_symbol
        bits = ((np.arange(order)[:, None] >> np.arange(k)[::-1]) & 1).reshape(-1)
        assert np.array_equal(demap_hard(map_bits(bits, c), c), bits)

    def test_demap_is_nearest_neighbor(self):
        c = Constellation(16)
        g = np.random.default_rng(7).standard_normal(200) * 0.5
        noisy = map_bits(np.random.default_rng(8).integers(0, 2, 800), c) + g[:200] * (1 + 1j)
        got = demap_hard(noisy, c).reshape(-1, 4)
        for sym, row in zip(noisy, got):
            brute = np.argmin(np.abs(sym - c.points))
            expect = [(brute >> b) & 1 for b in (3, 2, 1, 0)]
            assert np.abs(sym - c.points[brute]) == pytest.approx(
                np.abs(sym - c.points[row.dot([8, 4, 2, 1])]), abs=1e-12)
            # distances equal implies same point unless an exact tie
            assert list(row) == expect or np.abs(sym - c.points[brute]) == np.abs(
                sym - c.points[row.dot([8, 4, 2, 1])])

    def test_tie_break_toward_smaller_re_then_im(self):
        c = Constellation(4)
        # 0 is equidistant from all four QPSK points; pick (-, -) corner
        pick = c.points[demap_hard([0.0], c).reshape(-1, 2).dot([2, 1])[0]]
        assert np.real(pick) < 0 and np.imag(pick) < 0

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_modulo_fixes_constellation_points(self, order):
        c = Constellation(order)
        assert np.max(np.abs(c.modulo(c.points) - c.points)) < 1e-12

    def test_modulo_range_and_idempotence(self):
        c = Constellation(4)
        a = c.modulo_base
        g = np.random.default_rng(0)
        x = 10 * (g.standard_normal(500) + 1j * g.standard_normal(500))
        y = c.modulo(x)
        assert np.all(np.real(y) >= -a / 2) and np.all(np.real(y) < a / 2)
        assert np.all(np.imag(y) >= -a / 2) and np.all(np.imag(y) < a / 2)
        assert np.max(np.abs(c.modulo(y) - y)) < 1e-12
        # shifting by the lattice base is invisible
        assert np.max(np.abs(c.modulo(x + a * (3 - 2j)) - y)) < 1e-9


class TestRngStream:
    def test_reproducible_and_distinct(self):
        a = RngStream(1).generator().standard_normal(8)
        b = RngStream(1).generator().standard_normal(8)
        c = RngStream(2).generator().standard_normal(8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_child_streams_are_independent(self):
        root = RngStream(0)
        x = root.child("alpha", 0).generator().standard_normal(8)
        y = root.child("alpha", 1).generator().standard_normal(8)
        z = root.child("beta", 0).generator().standard_normal(8)
        assert not np.array_equal(x, y)
        assert not np.array_equal(x, z)
        assert np.array_equal(x, root.child("alpha", 0).generator().standard_normal(8))
