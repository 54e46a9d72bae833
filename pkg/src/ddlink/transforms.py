"""DD <-> TF <-> time transforms with pinned phase conventions.

Sign conventions (all transforms unitary):

* ISFFT:  X_TF[m, n] = (1/sqrt(MN)) sum_{l,k} X_DD[l, k] exp(j2pi(nk/N - ml/M))
* IDZT:   s[l + nM]  = (1/sqrt(N))  sum_k   X_DD[l, k] exp(j2pi nk/N)
  (delay is the fast time axis)
* Phase rotation matrix: Phi[m, n] = exp(-j 2pi m n / (MN))
* transpose_vectorize:   c[m*N + n] = B[m, n]

With these choices the three modulation paths in :mod:`ddlink.modem` produce
identical waveforms.
"""

from __future__ import annotations

import numpy as np

from .core import DDGrid, FrameParams, TFGrid, TimeSignal

__all__ = [
    "isfft",
    "sfft",
    "idzt",
    "dzt",
    "phase_compensation",
    "transpose_vectorize",
    "unvectorize_transpose",
]


def isfft(x: DDGrid) -> TFGrid:
    """Inverse SFFT: DD grid to TF grid.

    Realized as an M-point FFT along delay and an N-point IFFT along
    Doppler, both orthonormal.
    """
    out = np.fft.fft(np.fft.ifft(x.data, axis=1, norm="ortho"), axis=0, norm="ortho")
    return TFGrid(out, x.params)


def sfft(x: TFGrid) -> DDGrid:
    """SFFT: TF grid back to the DD grid; exact inverse of :func:`isfft`."""
    out = np.fft.fft(np.fft.ifft(x.data, axis=0, norm="ortho"), axis=1, norm="ortho")
    return DDGrid(out, x.params)


def idzt(x: DDGrid) -> TimeSignal:
    """Inverse discrete Zak transform: DD grid to MN time samples (no CP).

    One N-point IFFT along the Doppler dimension followed by symbol-wise
    interleaving (delay becomes the fast axis).
    """
    y = np.fft.ifft(x.data, axis=1, norm="ortho")  # y[l, n]
    return TimeSignal(y.reshape(-1, order="F"), x.params)


def dzt(s: TimeSignal, params: FrameParams | None = None) -> DDGrid:
    """Discrete Zak transform; exact inverse of :func:`idzt`.

    Accepts a payload-only signal of length MN.
    """
    params = params or s.params
    samples = s.payload if isinstance(s, TimeSignal) else np.asarray(s)
    if samples.shape != (params.grid_size,):
        raise ValueError(f"DZT input must have length M*N={params.grid_size}, got {samples.shape}")
    y = samples.reshape(params.m, params.n, order="F")
    return DDGrid(np.fft.fft(y, axis=1, norm="ortho"), params)


def phase_compensation(params: FrameParams) -> np.ndarray:
    """Phase rotation matrix Phi[m, n] = exp(-j 2pi m n / (MN))."""
    m = np.arange(params.m)[:, None]
    n = np.arange(params.n)[None, :]
    return np.exp(-2j * np.pi * m * n / (params.m * params.n))


def transpose_vectorize(b: np.ndarray) -> np.ndarray:
    """Row-major flatten: c[m*N + n] = B[m, n] (symbol-wise interleaving)."""
    return np.asarray(b).reshape(-1, order="C")


def unvectorize_transpose(c: np.ndarray, m: int, n: int) -> np.ndarray:
    """Inverse of :func:`transpose_vectorize`."""
    c = np.asarray(c)
    if c.size != m * n:
        raise ValueError(f"cannot reshape length {c.size} into ({m}, {n})")
    return c.reshape(m, n, order="C")
