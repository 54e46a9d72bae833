"""Shared domain types: frame geometry, grids, channels, constellations, RNG streams.

Conventions pinned here and relied on everywhere else:

* Delay and Doppler are stored in *bin units* (real-valued).  Physical units
  are recovered through :class:`FrameParams` accessors
  (``delay_resolution`` = 1/(M*delta_f), ``doppler_resolution`` = 1/(N*T)).
* Doppler bins live on the symmetric range (-N/2, N/2).
* DD grids are M x N arrays indexed ``[l, k]`` (delay row, Doppler column).
  Flattening to a length-MN vector uses column index ``q = l + k*M``
  (delay is the fast axis), i.e. ``reshape(order="F")``.
* Random draws come from counter-based Philox generators keyed by a SHA-256
  hash of (seed, stream id), so identical (seed, stream) pairs reproduce
  identical draws on every platform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FrameParams",
    "DDGrid",
    "TFGrid",
    "TimeSignal",
    "PathTap",
    "DDChannel",
    "Constellation",
    "RngStream",
    "map_bits",
    "demap_hard",
]


@dataclass(frozen=True)
class FrameParams:
    """Frame geometry: M delay bins / subcarriers, N Doppler bins / slots."""

    m: int
    n: int
    delta_f: float = 15e3
    cp_len: int = 0
    order: int = 4

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValueError(f"frame requires M >= 2 and N >= 2, got M={self.m}, N={self.n}")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")
        if not 0 <= self.cp_len < self.m * self.n:
            raise ValueError(f"cp_len must satisfy 0 <= cp_len < M*N, got {self.cp_len}")
        if self.order not in (4, 16, 64):
            raise ValueError(f"constellation order must be one of 4, 16, 64, got {self.order}")

    @property
    def symbol_duration(self) -> float:
        """OFDM symbol duration T with T * delta_f = 1 exactly."""
        return 1.0 / self.delta_f

    @property
    def grid_size(self) -> int:
        return self.m * self.n

    @property
    def sample_rate(self) -> float:
        return self.m * self.delta_f

    @property
    def delay_resolution(self) -> float:
        return 1.0 / (self.m * self.delta_f)

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.n * self.symbol_duration)

    @property
    def otfs_overhead(self) -> float:
        """Payload fraction of a single-CP OTFS frame: MN / (MN + cp_len)."""
        return self.grid_size / (self.grid_size + self.cp_len)

    @property
    def ofdm_overhead(self) -> float:
        """Payload fraction of a per-symbol-CP OFDM frame: M / (M + cp_len)."""
        return self.m / (self.m + self.cp_len)


def _as_grid(data, params: FrameParams, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.complex128)
    if arr.shape != (params.m, params.n):
        raise ValueError(f"{what} shape {arr.shape} does not match frame ({params.m}, {params.n})")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DDGrid:
    """M x N delay-Doppler symbol grid, entry [l, k]."""

    data: np.ndarray
    params: FrameParams

    def __post_init__(self):
        object.__setattr__(self, "data", _as_grid(self.data, self.params, "DD grid"))

    def vec(self) -> np.ndarray:
        """Flatten with q = l + k*M (delay fast)."""
        return self.data.reshape(-1, order="F")

    @classmethod
    def from_vec(cls, v, params: FrameParams) -> "DDGrid":
        return cls(np.asarray(v).reshape(params.m, params.n, order="F"), params)

    @classmethod
    def zeros(cls, params: FrameParams) -> "DDGrid":
        return cls(np.zeros((params.m, params.n), dtype=np.complex128), params)


@dataclass(frozen=True)
class TFGrid:
    """M x N time-frequency grid, entry [m, n] (subcarrier m, slot n)."""

    data: np.ndarray
    params: FrameParams

    def __post_init__(self):
        object.__setattr__(self, "data", _as_grid(self.data, self.params, "TF grid"))


@dataclass(frozen=True)
class TimeSignal:
    """Complex baseband sample sequence at rate M*delta_f.

    Length is M*N (payload only) or M*N + cp_len when ``has_cp`` is set.
    For the per-symbol-CP OFDM baseline, ``n_cp_blocks`` marks a signal of
    length N*(M + cp_len) instead.
    """

    samples: np.ndarray
    params: FrameParams
    has_cp: bool = False
    per_symbol_cp: bool = False

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if self.per_symbol_cp:
            expected = self.params.n * (self.params.m + self.params.cp_len)
        elif self.has_cp:
            expected = self.params.grid_size + self.params.cp_len
        else:
            expected = self.params.grid_size
        if arr.shape != (expected,):
            raise ValueError(f"signal length {arr.shape} does not match expected ({expected},)")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def payload(self) -> np.ndarray:
        """Samples with any frame-level CP stripped."""
        if self.per_symbol_cp:
            raise ValueError("per-symbol-CP signals have no single contiguous payload")
        if self.has_cp:
            return self.samples[self.params.cp_len:]
        return self.samples

    @property
    def sample_rate(self) -> float:
        return self.params.sample_rate


@dataclass(frozen=True)
class PathTap:
    """One propagation path: complex gain, delay/Doppler in bin units, AoD."""

    gain: complex
    delay: float
    doppler: float
    aod: float = 0.0

    def validate(self, params: FrameParams) -> None:
        if not 0 <= self.delay < params.m:
            raise ValueError(f"tap delay {self.delay} outside [0, M)")
        if not abs(self.doppler) < params.n / 2:
            raise ValueError(f"tap Doppler {self.doppler} outside (-N/2, N/2)")


@dataclass(frozen=True)
class DDChannel:
    """Sparse DD channel: P path taps. Memory is O(P), never O(MN)."""

    taps: tuple

    def __post_init__(self):
        taps = tuple(self.taps)
        if len(taps) < 1:
            raise ValueError("channel needs at least one path")
        object.__setattr__(self, "taps", taps)

    @property
    def num_paths(self) -> int:
        return len(self.taps)

    @property
    def max_delay(self) -> float:
        return max(t.delay for t in self.taps)

    @property
    def max_doppler(self) -> float:
        return max(abs(t.doppler) for t in self.taps)

    def validate(self, params: FrameParams) -> None:
        for t in self.taps:
            t.validate(params)

    def is_integer(self) -> bool:
        return all(
            float(t.delay).is_integer() and float(t.doppler).is_integer() for t in self.taps
        )


def _gray_decode(g: np.ndarray, width: int) -> np.ndarray:
    b = g.copy()
    for _ in range(width - 1):
        g = g >> 1
        b = b ^ g
    return b


@dataclass(frozen=True)
class Constellation:
    """Square Gray-mapped QAM scaled to unit average energy.

    Pinned bit mapping: for order Q with sqrt(Q) = L levels per axis, the
    first half of each symbol's bits select the in-phase level, the second
    half the quadrature level.  Each half is a binary-reflected Gray code,
    decoded index i giving amplitude ((L-1) - 2*i) * s with half-spacing
    s = sqrt(3 / (2*(Q-1))).  QPSK bits 00 therefore map to (+1+1j)/sqrt(2).

    ``modulo_base`` A = 2*sqrt(Q)*s is the symmetric THP modulo base; every
    constellation point is a fixed point of :meth:`modulo`.
    """

    order: int
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.order not in (4, 16, 64):
            raise ValueError(f"order must be 4, 16, or 64, got {self.order}")
        L = int(round(np.sqrt(self.order)))
        half = self.bits_per_symbol // 2
        s = self.half_spacing
        idx = np.arange(self.order)
        gi = idx >> half
        gq = idx & ((1 << half) - 1)
        bi = _gray_decode(gi, half)
        bq = _gray_decode(gq, half)
        amp_i = ((L - 1) - 2 * bi) * s
        amp_q = ((L - 1) - 2 * bq) * s
        pts = amp_i + 1j * amp_q
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(np.log2(self.order)))

    @property
    def half_spacing(self) -> float:
        return float(np.sqrt(3.0 / (2.0 * (self.order - 1))))

    @property
    def modulo_base(self) -> float:
        return 2.0 * np.sqrt(self.order) * self.half_spacing

    def modulo(self, x: np.ndarray) -> np.ndarray:
        """Componentwise symmetric modulo into [-A/2, A/2) on real and imag."""
        a = self.modulo_base
        re = np.real(x) - a * np.floor(np.real(x) / a + 0.5)
        im = np.imag(x) - a * np.floor(np.imag(x) / a + 0.5)
        return re + 1j * im


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Gray-map a bit sequence to unit-average-energy QAM symbols."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    k = c.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} not divisible by bits/symbol {k}")
    if bits.size == 0:
        return np.zeros(0, dtype=np.complex128)
    groups = bits.reshape(-1, k)
    idx = groups.dot(1 << np.arange(k)[::-1])
    return c.points[idx]


def demap_hard(symbols, c: Constellation) -> np.ndarray:
    """Nearest-point hard decision back to bits.

    Ties break toward the point with smaller real part, then smaller
    imaginary part.
    """
    symbols = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    k = c.bits_per_symbol
    if symbols.size == 0:
        return np.zeros(0, dtype=np.int64)
    d2 = np.abs(symbols[:, None] - c.points[None, :]) ** 2
    # Deterministic tie-break: sort candidate points by (re, im) and take the
    # first index achieving the minimum distance (within exact fp equality).
    order = np.lexsort((c.points.imag, c.points.real))
    d2_sorted = d2[:, order]
    pick = order[np.argmin(d2_sorted, axis=1)]
    bits = ((pick[:, None] >> np.arange(k)[::-1]) & 1).astype(np.int64)
    return bits.reshape(-1)


@dataclass(frozen=True)
class RngStream:
    """Named, reproducible random stream.

    The generator is Philox (counter-based) keyed by SHA-256(seed, stream id),
    so draws are identical across platforms and independent streams can be
    handed to parallel workers without coordination.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = hashlib.sha256(f"ddlink:{self.seed}:{self.stream}".encode()).digest()
        return np.random.Generator(np.random.Philox(key=int.from_bytes(key[:16], "little")))

    def child(self, label: str, index: int = 0) -> "RngStream":
        """Derive an independent stream from (seed, label, index)."""
        h = hashlib.sha256(f"ddlink:{self.seed}:{self.stream}:{label}:{index}".encode()).digest()
        return RngStream(seed=self.seed, stream=int.from_bytes(h[:8], "little"))
