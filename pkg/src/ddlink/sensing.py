"""DD-domain ISAC sensing: range-Doppler maps, the twisted-correlation
ambiguity function, multi-target ML delay-Doppler estimation, CRB
computation, and NMSE sweeps.

Echo generation reuses the channel module's circular DD operator with the
targets as path taps, so demodulating a pilot-only frame and computing the
integer-grid range-Doppler map are the same computation up to scale.

The ML estimator is a concentrated-likelihood grid-then-refine procedure:
CLEAN-style successive peak picking on an oversampled range-Doppler map
initializes a joint numerical-gradient ascent on the projection statistic
||P_S(theta) r||^2, with reflectivities profiled out by least squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import apply_channel, circular_shift, noise_variance
from .core import DDChannel, DDGrid, FrameParams, PathTap, RngStream, TimeSignal

__all__ = [
    "Target",
    "SensingScene",
    "AmbiguitySurface",
    "MlResult",
    "echo",
    "range_doppler_map",
    "ambiguity_function",
    "ml_estimate",
    "crb",
    "nmse_eval",
    "SensingConfig",
]


@dataclass(frozen=True)
class Target:
    """Point target: delay / Doppler in (real) bin units, complex reflectivity."""

    delay: float
    doppler: float
    reflectivity: complex = 1.0 + 0.0j

    def validate(self, params: FrameParams) -> None:
        if not 0 <= self.delay < params.m:
            raise ValueError(f"target delay {self.delay} outside [0, M)")
        if not abs(self.doppler) < params.n / 2:
            raise ValueError(f"target Doppler {self.doppler} outside (-N/2, N/2)")

    def as_tap(self) -> PathTap:
        return PathTap(complex(self.reflectivity), float(self.delay), float(self.doppler))


@dataclass(frozen=True)
class SensingScene:
    """Targets plus the transmit frame and operating SNR."""

    targets: tuple
    frame: DDGrid
    snr_db: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.targets) < 1:
            raise ValueError("scene needs at least one target")
        for t in self.targets:
            t.validate(self.frame.params)

    def channel(self) -> DDChannel:
        return DDChannel(tuple(t.as_tap() for t in self.targets))


@dataclass(frozen=True)
class AmbiguitySurface:
    """|A| sampled over delay x Doppler grids (bin units)."""

    values: np.ndarray  # (n_delay, n_doppler) magnitudes
    delays: np.ndarray
    dopplers: np.ndarray
    oversample: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.delays), len(self.dopplers)):
            raise ValueError("surface shape does not match the axes")
        object.__setattr__(self, "values", v)

    def peak(self):
        """(delay, doppler, value) of the largest magnitude sample."""
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.delays[i]), float(self.dopplers[j]), float(self.values[i, j])


def _shifted_reference(s: np.ndarray, delay: float, doppler: float,
                       params: FrameParams) -> np.ndarray:
    """Unit-reflectivity echo of s from a single (delay, doppler) target."""
    mn = params.grid_size
    q = np.arange(mn)
    return np.exp(2j * np.pi * doppler * (q - delay) / mn) * circular_shift(s, delay)


def echo(scene: SensingScene, params: FrameParams, rng: RngStream | None = None,
         tx: TimeSignal | None = None) -> TimeSignal:
    """Mono-static echo: the channel operator driven by the targets as taps.

    ``tx`` defaults to the OTFS-modulated scene frame (payload only, no CP).
    Noise is added at scene.snr_db relative to the clean echo power when an
    RNG stream is supplied.
    """
    from .channel import add_awgn
    from .modem import otfs_modulate

    if tx is None:
        tx = TimeSignal(otfs_modulate(scene.frame).payload, params)
    r = apply_channel(tx, scene.channel(), params)
    if rng is not None:
        r = add_awgn(r, scene.snr_db, rng)
    return r


def _grid_axes(params: FrameParams, oversample: int):
    M, N = params.m, params.n
    delays = np.arange(M * oversample) / oversample
    j = np.arange(N * oversample)
    j[j >= N * oversample // 2] -= N * oversample  # symmetric Doppler range
    dopplers = j / oversample
    return delays, dopplers, j


def range_doppler_map(r: TimeSignal, s: TimeSignal, params: FrameParams | None = None,
                      oversample: int = 1) -> AmbiguitySurface:
    """Cross-ambiguity of the received and transmitted payloads on the
    (oversampled) DD grid.

    RD(l, k) = sum_q r[q] * conj( e^{j2pi k (q-l)/MN} s[(q-l) mod MN] ),
    evaluated for all grid delays by one zero-padded FFT per delay row.
    """
    params = params or s.params
    rv = np.asarray(r.samples if isinstance(r, TimeSignal) else r)
    sv = np.asarray(s.samples if isinstance(s, TimeSignal) else s)
    if rv.size != sv.size:
        raise ValueError(f"length mismatch: r has {rv.size}, s has {sv.size}")
    mn = params.grid_size
    if rv.size != mn:
        raise ValueError("range-Doppler map expects CP-free MN-sample payloads")
    delays, dopplers, j = _grid_axes(params, oversample)
    L = mn * oversample
    out = np.zeros((delays.size, dopplers.size), dtype=np.complex128)
    for i, l in enumerate(delays):
        x = rv * np.conj(circular_shift(sv, l))
        X = np.fft.fft(x, n=L)  # X[j] = sum_q x[q] e^{-j2pi j q / L}
        row = X[j % L] * np.exp(2j * np.pi * dopplers * l / mn)
        out[i] = row
    return AmbiguitySurface(np.abs(out), delays, dopplers, oversample)


def ambiguity_function(s: TimeSignal, params: FrameParams | None = None,
                       oversample: int = 1) -> AmbiguitySurface:
    """Twisted-correlation auto-ambiguity A(tau, nu) of the payload."""
    return range_doppler_map(s, s, params, oversample)


@dataclass(frozen=True)
class MlResult:
    """ML estimates: one (delay, doppler, reflectivity) triple per target."""

    targets: tuple
    converged: bool


def _model_matrix(theta: np.ndarray, s: np.ndarray, params: FrameParams) -> np.ndarray:
    """Columns are unit-reflectivity echoes at each (delay, doppler) pair."""
    cols = [
        _shifted_reference(s, theta[2 * i], theta[2 * i + 1], params)
        for i in range(theta.size // 2)
    ]
    return np.stack(cols, axis=1)


def _profile_fit(theta, r, s, params):
    """Least-squares reflectivities and the concentrated likelihood value."""
    U = _model_matrix(theta, s, params)
    h, *_ = np.linalg.lstsq(U, r, rcond=None)
    fit = U @ h
    return h, float(np.real(np.vdot(r, fit)))  # = ||P_S r||^2


def ml_estimate(r: TimeSignal, s: TimeSignal, n_targets: int, params: FrameParams,
                oversample: int = 4, max_targets: int = 4, grad_step: float = 1e-4,
                tol: float = 1e-4, max_iter: int = 200) -> MlResult:
    """Grid-then-refine concentrated-likelihood estimation of point targets.

    Stage 1 picks peaks on the oversampled range-Doppler map with CLEAN-style
    residual subtraction.  Stage 2 jointly refines all delays/Dopplers by
    numerical-gradient ascent with backtracking, stopping when the accepted
    step falls below ``tol`` bins or after ``max_iter`` iterations.
    """
    if not 1 <= n_targets <= max_targets:
        raise ValueError(f"n_targets must be in [1, {max_targets}], got {n_targets}")
    rv = np.asarray(r.samples if isinstance(r, TimeSignal) else r, dtype=np.complex128)
    sv = np.asarray(s.samples if isinstance(s, TimeSignal) else s, dtype=np.complex128)

    # Stage 1: successive peak picking with residual subtraction.
    theta = np.zeros(0)
    residual = rv
    for _ in range(n_targets):
        surf = range_doppler_map(TimeSignal(residual, params), TimeSignal(sv, params),
                                 params, oversample)
        l0, k0, _ = surf.peak()
        theta = np.concatenate([theta, [l0, k0]])
        h, _ = _profile_fit(theta, rv, sv, params)
        residual = rv - _model_matrix(theta, sv, params) @ h

    # Stage 2: joint refinement of the concentrated likelihood.
    _, J = _profile_fit(theta, rv, sv, params)
    converged = False
    for _ in range(max_iter):
        grad = np.zeros_like(theta)
        for a in range(theta.size):
            up = theta.copy()
            dn = theta.copy()
            up[a] += grad_step
            dn[a] -= grad_step
            _, Jp = _profile_fit(up, rv, sv, params)
            _, Jm = _profile_fit(dn, rv, sv, params)
            grad[a] = (Jp - Jm) / (2 * grad_step)
        gnorm = np.max(np.abs(grad))
        if gnorm == 0.0:
            converged = True
            break
        step = 0.1 / gnorm  # initial trial moves 0.1 bin along the steepest axis
        accepted = False
        for _ in range(40):
            cand = theta + step * grad
            _, Jc = _profile_fit(cand, rv, sv, params)
            if Jc > J:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        moved = float(np.max(np.abs(step * grad)))
        theta = cand
        J = Jc
        if moved < tol:
            converged = True
            break

    h, _ = _profile_fit(theta, rv, sv, params)
    ests = tuple(
        (float(theta[2 * i] % params.m),
         float((theta[2 * i + 1] + params.n / 2) % params.n - params.n / 2),
         complex(h[i]))
        for i in range(n_targets)
    )
    return MlResult(ests, converged)


def crb(scene: SensingScene, params: FrameParams, noise_var: float | None = None,
        fd_step: float = 1e-4, tx: TimeSignal | None = None) -> list:
    """Per-target (CRB_delay, CRB_doppler) from the numerical Fisher matrix.

    The real parameter vector stacks (l_i, k_i, Re h_i, Im h_i) per target;
    F_ab = (2/sigma^2) Re(d_a^H d_b) with central-difference derivatives of
    the noise-free echo.  Raises on a singular Fisher matrix (e.g. coincident
    targets).
    """
    from .modem import otfs_modulate

    if tx is None:
        tx = TimeSignal(otfs_modulate(scene.frame).payload, params)
    sv = np.asarray(tx.samples)

    def mu(vec):
        out = np.zeros(params.grid_size, dtype=np.complex128)
        for i in range(len(scene.targets)):
            l, k, hre, him = vec[4 * i: 4 * i + 4]
            out += (hre + 1j * him) * _shifted_reference(sv, l, k, params)
        return out

    vec0 = np.concatenate([
        [t.delay, t.doppler, np.real(t.reflectivity), np.imag(t.reflectivity)]
        for t in scene.targets
    ])
    if noise_var is None:
        clean = mu(vec0)
        noise_var = noise_variance(float(np.mean(np.abs(clean) ** 2)), scene.snr_db)
    if noise_var <= 0:
        raise ValueError("CRB requires a positive noise variance")

    n = vec0.size
    D = np.zeros((params.grid_size, n), dtype=np.complex128)
    for a in range(n):
        up = vec0.copy()
        dn = vec0.copy()
        up[a] += fd_step
        dn[a] -= fd_step
        D[:, a] = (mu(up) - mu(dn)) / (2 * fd_step)
    F = (2.0 / noise_var) * np.real(D.conj().T @ D)
    cond = np.linalg.cond(F)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError("singular Fisher matrix (coincident or degenerate targets)")
    C = np.linalg.inv(F)
    return [
        (float(C[4 * i, 4 * i]), float(C[4 * i + 1, 4 * i + 1]))
        for i in range(len(scene.targets))
    ]


@dataclass(frozen=True)
class SensingConfig:
    """NMSE sweep: scene geometry, SNR grid, trials, estimator settings."""

    params: FrameParams
    target_positions: tuple = ((4.1, 5.2), (4.3, 5.7))
    reflectivity_db: tuple = (0.0, -3.0)  # per-target power relative to the first
    snrs_db: tuple = tuple(range(10, 41, 5))
    trials: int = 200
    seed: int = 0
    oversample: int = 4
    # The 1e-4 default stopping step leaves a refinement bias floor around
    # 1e-3 bins, which sits above the CRB at 40 dB; the sweep refines tighter
    # so the NMSE floor stays below the bound across the whole SNR range.
    refine_tol: float = 1e-5
    refine_max_iter: int = 400

    def validate(self) -> None:
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if not self.snrs_db:
            raise ValueError("SNR sweep must be non-empty")
        if len(self.target_positions) != len(self.reflectivity_db):
            raise ValueError("one reflectivity level per target is required")
        for l, k in self.target_positions:
            Target(l, k).validate(self.params)


def _draw_scene(cfg: SensingConfig, rng: RngStream, c) -> SensingScene:
    """Random QPSK frame and random reflectivity phases, magnitudes fixed by
    the configured per-target power offsets."""
    from .core import map_bits

    g = rng.generator()
    bits = g.integers(0, 2, size=cfg.params.grid_size * c.bits_per_symbol)
    frame = DDGrid.from_vec(map_bits(bits, c), cfg.params)
    targets = []
    for (l, k), db in zip(cfg.target_positions, cfg.reflectivity_db):
        mag = 10.0 ** (db / 20.0)
        phase = g.uniform(0, 2 * np.pi)
        targets.append(Target(l, k, mag * np.exp(1j * phase)))
    return SensingScene(tuple(targets), frame)


def _associate(ests, truths):
    """Match estimates to true targets by total squared (l, k) distance."""
    from itertools import permutations

    n = len(truths)
    best, best_cost = None, np.inf
    for perm in permutations(range(n)):
        cost = sum(
            (ests[perm[i]][0] - truths[i][0]) ** 2 + (ests[perm[i]][1] - truths[i][1]) ** 2
            for i in range(n)
        )
        if cost < best_cost:
            best, best_cost = perm, cost
    return [ests[best[i]] for i in range(n)]


def _nmse_trial(cfg: SensingConfig, snr: float, trial: int):
    """One Monte-Carlo draw: per-target squared (delay, doppler) errors and
    the corresponding CRB entries for the drawn reflectivity phases."""
    from .core import Constellation
    from .modem import otfs_modulate

    c = Constellation(cfg.params.order)
    n_t = len(cfg.target_positions)
    rng = RngStream(cfg.seed).child(f"sensing-{snr}", trial)
    scene = _draw_scene(cfg, rng.child("scene"), c)
    scene = SensingScene(scene.targets, scene.frame, snr_db=float(snr))
    s = TimeSignal(otfs_modulate(scene.frame).payload, cfg.params)
    r = echo(scene, cfg.params, rng.child("noise"), tx=s)
    est = ml_estimate(r, s, n_t, cfg.params, oversample=cfg.oversample,
                      tol=cfg.refine_tol, max_iter=cfg.refine_max_iter)
    matched = _associate(est.targets, cfg.target_positions)
    se = np.zeros((n_t, 2))
    for i, (l_true, k_true) in enumerate(cfg.target_positions):
        se[i, 0] = (matched[i][0] - l_true) ** 2
        se[i, 1] = (matched[i][1] - k_true) ** 2
    bounds = np.array(crb(scene, cfg.params, tx=s))
    return se, bounds


def nmse_eval(cfg: SensingConfig, trial_results=None) -> list:
    """Monte-Carlo NMSE per (snr, parameter, target) with a CRB overlay.

    Returns rows (snr_db, parameter, target_index, nmse, nmse_stderr,
    crb_normalized); NMSE, its standard error, and the CRB are all
    normalized by the squared true parameter value.  ``trial_results`` lets
    the harness inject per-trial results computed in parallel; it must
    contain ``_nmse_trial(cfg, snr, t)`` for each snr in order.
    """
    cfg.validate()
    n_t = len(cfg.target_positions)
    rows = []
    for si, snr in enumerate(cfg.snrs_db):
        se = np.zeros((cfg.trials, n_t, 2))
        crb_acc = np.zeros((cfg.trials, n_t, 2))
        for trial in range(cfg.trials):
            if trial_results is not None:
                s_t, b_t = trial_results[si * cfg.trials + trial]
            else:
                s_t, b_t = _nmse_trial(cfg, snr, trial)
            se[trial] = s_t
            crb_acc[trial] = b_t
        for i, (l_true, k_true) in enumerate(cfg.target_positions):
            for j, (par, ref) in enumerate((("delay", l_true), ("doppler", k_true))):
                vals = se[:, i, j] / ref ** 2
                stderr = float(vals.std(ddof=1) / np.sqrt(cfg.trials)) if cfg.trials > 1 else 0.0
                rows.append((float(snr), par, i, float(vals.mean()), stderr,
                             float(crb_acc[:, i, j].mean() / ref ** 2)))
    return rows
