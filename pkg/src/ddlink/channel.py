"""DD channel generation, application, noise, and the effective-matrix oracle.

The canonical channel operator is circular on the MN-sample payload:

    r[q] = sum_p h_p * exp(j 2pi k_p (q - l_p) / (MN)) * s[(q - l_p) mod MN]

Fractional delays use an exact band-limited circular shift (frequency-domain
phase ramp); the Doppler phase is anchored at the path arrival (q - l_p).
A linear-convolution mode with explicit CPs is provided for the per-symbol-CP
OFDM baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DDChannel, DDGrid, FrameParams, PathTap, RngStream, TimeSignal
from .modem import ModemPath, otfs_demodulate, otfs_modulate

__all__ = [
    "ChannelProfile",
    "EffectiveMatrix",
    "sample_channel",
    "circular_shift",
    "apply_channel",
    "apply_channel_linear",
    "add_awgn",
    "noise_variance",
    "dd_shift_coupling",
    "build_effective_dd_matrix",
]


@dataclass(frozen=True)
class ChannelProfile:
    """Random-channel statistics: P paths, delay/Doppler extents, PDP decay."""

    num_paths: int = 3
    l_max: int = 5
    k_max: int = 7
    pdp_exponent: float = 2.76
    integer_taps: bool = True

    def validate(self, params: FrameParams) -> None:
        if self.num_paths < 1:
            raise ValueError("profile needs num_paths >= 1")
        if not 0 <= self.l_max < params.m:
            raise ValueError(f"l_max={self.l_max} outside [0, M)")
        if not 0 <= self.k_max < params.n / 2:
            raise ValueError(f"k_max={self.k_max} outside [0, N/2)")


@dataclass(frozen=True)
class EffectiveMatrix:
    """MN x MN effective DD-domain channel; columns follow q = l + k*M."""

    h: np.ndarray
    params: FrameParams
    path: ModemPath

    def __post_init__(self):
        mn = self.params.grid_size
        arr = np.asarray(self.h, dtype=np.complex128)
        if arr.shape != (mn, mn):
            raise ValueError(f"effective matrix must be {mn}x{mn}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "h", arr)

    def apply(self, x: DDGrid) -> DDGrid:
        return DDGrid.from_vec(self.h @ x.vec(), self.params)


def sample_channel(rng: RngStream, profile: ChannelProfile, params: FrameParams,
                   with_aod: bool = False, aod_range: float = np.pi / 3) -> DDChannel:
    """Draw a random P-path channel.

    Delays are uniform on [0, l_max] (tap 0 pinned to delay 0 as the
    reference path), Dopplers uniform on [-k_max, k_max], both rounded to
    integers when the profile says so.  Gains are complex Gaussian with an
    exponentially decaying power-delay profile exp(-gamma * l_p) (reference
    delay = one delay bin), normalized so sum_p E|h_p|^2 = 1.
    """
    profile.validate(params)
    g = rng.generator()
    P = profile.num_paths
    if profile.integer_taps:
        delays = g.integers(0, profile.l_max + 1, size=P).astype(float)
        dopplers = g.integers(-profile.k_max, profile.k_max + 1, size=P).astype(float)
    else:
        delays = g.uniform(0.0, profile.l_max, size=P) if profile.l_max else np.zeros(P)
        dopplers = g.uniform(-profile.k_max, profile.k_max, size=P)
    delays[0] = 0.0

    var = np.exp(-profile.pdp_exponent * delays)
    var /= var.sum()
    gains = np.sqrt(var / 2.0) * (g.standard_normal(P) + 1j * g.standard_normal(P))
    aods = g.uniform(-aod_range, aod_range, size=P) if with_aod else np.zeros(P)

    taps = tuple(
        PathTap(gain=complex(gains[p]), delay=float(delays[p]),
                doppler=float(dopplers[p]), aod=float(aods[p]))
        for p in range(P)
    )
    ch = DDChannel(taps)
    ch.validate(params)
    return ch


def circular_shift(x: np.ndarray, shift: float) -> np.ndarray:
    """Circular shift by a possibly fractional number of samples.

    Integer shifts reduce to an exact roll; fractional shifts apply a
    frequency-domain phase ramp (exact for band-limited circular signals).
    """
    x = np.asarray(x)
    if float(shift).is_integer():
        return np.roll(x, int(shift))
    L = x.size
    freqs = np.fft.fftfreq(L) * L  # signed integer bins
    return np.fft.ifft(np.fft.fft(x) * np.exp(-2j * np.pi * freqs * shift / L))


def _apply_circular(payload: np.ndarray, h: DDChannel, params: FrameParams) -> np.ndarray:
    mn = params.grid_size
    q = np.arange(mn)
    out = np.zeros(mn, dtype=np.complex128)
    for tap in h.taps:
        shifted = circular_shift(payload, tap.delay)
        out += tap.gain * np.exp(2j * np.pi * tap.doppler * (q - tap.delay) / mn) * shifted
    return out


def apply_channel(s: TimeSignal, h: DDChannel, params: FrameParams | None = None) -> TimeSignal:
    """Apply the circular DD channel operator to the payload.

    If the input carries a frame-level CP it is stripped, the circular model
    is applied to the payload, and a consistent CP is re-attached (identical
    to CP-protected linear convolution when cp_len >= max delay).
    """
    params = params or s.params
    h.validate(params)
    out = _apply_circular(s.payload, h, params)
    if s.has_cp:
        cp = params.cp_len
        return TimeSignal(np.concatenate([out[-cp:], out]) if cp else out, params,
                          has_cp=s.has_cp)
    return TimeSignal(out, params)


def apply_channel_linear(s: TimeSignal, h: DDChannel, params: FrameParams | None = None) -> TimeSignal:
    """Linear time-varying convolution over the full transmitted stream.

    Used for the per-symbol-CP OFDM baseline where the circular model does
    not hold per slot.  Integer delays only.
    """
    params = params or s.params
    h.validate(params)
    x = np.asarray(s.samples)
    mn = params.grid_size
    q = np.arange(x.size)
    out = np.zeros(x.size, dtype=np.complex128)
    for tap in h.taps:
        if not float(tap.delay).is_integer():
            raise ValueError("linear channel mode requires integer delays")
        d = int(tap.delay)
        shifted = np.concatenate([np.zeros(d, dtype=np.complex128), x[: x.size - d]])
        out += tap.gain * np.exp(2j * np.pi * tap.doppler * (q - d) / mn) * shifted
    return TimeSignal(out, params, has_cp=s.has_cp, per_symbol_cp=s.per_symbol_cp)


def add_awgn(s: TimeSignal, snr_db: float, rng: RngStream) -> TimeSignal:
    """Add circularly-symmetric complex Gaussian noise at the given SNR.

    Noise variance is mean signal power / 10^(snr_db/10); an infinite
    snr_db leaves the signal untouched.
    """
    if np.isinf(snr_db):
        return s
    x = np.asarray(s.samples)
    power = float(np.mean(np.abs(x) ** 2))
    sigma2 = power / 10.0 ** (snr_db / 10.0)
    g = rng.generator()
    noise = np.sqrt(sigma2 / 2.0) * (g.standard_normal(x.size) + 1j * g.standard_normal(x.size))
    return TimeSignal(x + noise, s.params, has_cp=s.has_cp, per_symbol_cp=s.per_symbol_cp)


def noise_variance(signal_power: float, snr_db: float) -> float:
    """Complex noise variance matching :func:`add_awgn` for a given power."""
    if np.isinf(snr_db):
        return 0.0
    return signal_power / 10.0 ** (snr_db / 10.0)


def _chain(x: DDGrid, h: DDChannel, path: ModemPath) -> DDGrid:
    tx = otfs_modulate(x, path)
    rx = apply_channel(tx, h, x.params)
    return otfs_demodulate(rx, path, x.params)


def dd_shift_coupling(delay: int, doppler: int, params: FrameParams,
                      path: ModemPath = ModemPath.DIRECT_DZT) -> np.ndarray:
    """Per-cell coupling phases of a unit-gain integer tap.

    An integer tap (l_p, k_p) acts on the DD grid as a phase-decorated
    permutation: output cell (l, k) receives input cell
    ((l - l_p) mod M, (k - k_p) mod N) scaled by the returned C[l, k].
    Computed by pushing the all-ones grid through mod -> channel -> demod,
    which is exact because each output cell is touched by one input cell.
    """
    tap = DDChannel((PathTap(1.0 + 0j, float(delay), float(doppler)),))
    ones = DDGrid(np.ones((params.m, params.n), dtype=np.complex128), params)
    return np.asarray(_chain(ones, tap, path).data)


def build_effective_dd_matrix(h: DDChannel, path: ModemPath, params: FrameParams,
                              max_size: int = 4096) -> EffectiveMatrix:
    """Effective DD-domain channel matrix H_eff with vec index q = l + k*M.

    Column q is the full modulate -> channel -> demodulate chain applied to
    the unit grid e_q, so for every grid x,
    demod(channel(mod(x))) = H_eff @ vec(x).  Integer channels use the
    phase-decorated-permutation fast path; fractional channels fall back to
    column-by-column composition.
    """
    mn = params.grid_size
    if mn > max_size:
        raise ValueError(f"grid size {mn} exceeds the effective-matrix guard {max_size}")
    h.validate(params)
    H = np.zeros((mn, mn), dtype=np.complex128)
    if h.is_integer():
        l_idx, k_idx = np.meshgrid(np.arange(params.m), np.arange(params.n), indexing="ij")
        out_q = (l_idx + k_idx * params.m).reshape(-1)
        for tap in h.taps:
            C = dd_shift_coupling(int(tap.delay), int(tap.doppler), params, path)
            src_l = (l_idx - int(tap.delay)) % params.m
            src_k = (k_idx - int(tap.doppler)) % params.n
            in_q = (src_l + src_k * params.m).reshape(-1)
            H[out_q, in_q] += tap.gain * C.reshape(-1)
        return EffectiveMatrix(H, params, path)
    for q in range(mn):
        e = np.zeros(mn, dtype=np.complex128)
        e[q] = 1.0
        H[:, q] = _chain(DDGrid.from_vec(e, params), h, path).vec()
    return EffectiveMatrix(H, params, path)
