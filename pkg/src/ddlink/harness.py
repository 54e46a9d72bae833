"""Experiment harness: config parsing, experiment dispatch, CSV persistence.

Config grammar (documented in the README): line-oriented UTF-8, one
``key = value`` pair per line, ``#`` starts a comment, blank lines ignored.
Dotted key prefixes group related settings (``frame.m``, ``snr.start``,
``mimo.users``, ...).  Configs are schema-versioned via the ``schema`` key.

Every run writes one CSV named ``<experiment-id>-<seed>.csv`` with the fixed
header ``experiment,version,sweep,metric,value,stderr,trials``; rows are
sorted by sweep value then metric name, and (config, seed) fully determines
every output byte.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .channel import ChannelProfile
from .core import Constellation, DDGrid, FrameParams, RngStream, TFGrid, map_bits
from .link import LinkConfig, _ofdm_trial, _otfs_trial
from .mimo import SumSeConfig, _ofdm_zf_trial, _thp_mrt_trial
from .modem import ModemPath, ofdm_modulate, otfs_modulate, papr
from .sensing import SensingConfig, _nmse_trial, nmse_eval

__all__ = [
    "ConfigError",
    "InvariantViolation",
    "ExperimentConfig",
    "ResultTable",
    "parse_config",
    "serialize_config",
    "run",
    "CSV_HEADER",
]

SCHEMA_VERSION = 1
CSV_HEADER = ("experiment", "version", "sweep", "metric", "value", "stderr", "trials")
EXPERIMENT_KINDS = ("equiv", "papr", "ber", "sumse", "sensing")


class ConfigError(ValueError):
    """Config-file problem: missing file, unknown key, bad value, or a
    violated constraint.  The message names the offending key."""


class InvariantViolation(RuntimeError):
    """A mid-run invariant check failed (CLI exit status 2)."""


# key -> (type tag, default); "float-list"/"pair-list" are comma-separated
_KNOWN_KEYS = {
    "schema": ("int", SCHEMA_VERSION),
    "experiment": ("str", None),
    "id": ("str", None),
    "seed": ("int", 0),
    "trials": ("int", 100),
    "frame.m": ("int", 32),
    "frame.n": ("int", 16),
    "frame.delta_f": ("float", 15e3),
    "frame.cp_len": ("int", 0),
    "frame.order": ("int", 4),
    "snr.start": ("float", 0.0),
    "snr.stop": ("float", 40.0),
    "snr.step": ("float", 5.0),
    "channel.paths": ("int", 3),
    "channel.l_max": ("int", 5),
    "channel.k_max": ("int", 7),
    "channel.gamma": ("float", 2.76),
    "channel.integer": ("bool", True),
    "mimo.antennas": ("int", 8),
    "mimo.users": ("int", 4),
    "ber.waveform": ("str", "both"),
    "ber.estimated_csi": ("bool", False),
    "sensing.targets": ("pair-list", ((4.1, 5.2), (4.3, 5.7))),
    "sensing.reflectivity_db": ("float-list", (0.0, -3.0)),
    "sensing.oversample": ("int", 4),
}


def _parse_value(key: str, tag: str, raw: str):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if tag == "str":
            return raw
        if tag == "float-list":
            return tuple(float(x) for x in raw.split(","))
        if tag == "pair-list":
            pairs = []
            for item in raw.split(","):
                a, b = item.split(":")
                pairs.append((float(a), float(b)))
            return tuple(pairs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config key {key!r}: cannot parse value {raw!r} as {tag}") from exc
    raise ConfigError(f"config key {key!r} has unsupported type tag {tag!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description assembled from a config file."""

    kind: str
    params: FrameParams
    profile: ChannelProfile
    snrs_db: tuple
    trials: int
    seed: int
    experiment_id: str
    mimo_antennas: int = 8
    mimo_users: int = 4
    ber_waveform: str = "both"
    ber_estimated_csi: bool = False
    sensing_targets: tuple = ((4.1, 5.2), (4.3, 5.7))
    sensing_reflectivity_db: tuple = (0.0, -3.0)
    sensing_oversample: int = 4

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"config key 'experiment': {self.kind!r} is not one of {EXPERIMENT_KINDS}")
        if self.trials <= 0:
            raise ConfigError("config key 'trials': must be >= 1")
        if not self.snrs_db:
            raise ConfigError("config key 'snr.*': sweep is empty (check start/stop/step)")
        if self.ber_waveform not in ("otfs", "ofdm", "both"):
            raise ConfigError("config key 'ber.waveform': must be otfs, ofdm, or both")
        if self.kind in ("ber", "sumse"):  # kinds that draw random channels
            try:
                self.profile.validate(self.params)
            except ValueError as exc:
                raise ConfigError(f"config key 'channel.*': {exc}") from exc
        if self.kind == "sumse" and self.mimo_users > self.mimo_antennas:
            raise ConfigError("config key 'mimo.users': must satisfy users <= antennas")
        if self.kind == "sensing":
            if len(self.sensing_targets) != len(self.sensing_reflectivity_db):
                raise ConfigError(
                    "config key 'sensing.reflectivity_db': needs one level per target")


def _sweep(start: float, stop: float, step: float) -> tuple:
    if step <= 0:
        raise ConfigError("config key 'snr.step': must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(start + i * step) for i in range(max(n, 0)))


def parse_config(path: str) -> ExperimentConfig:
    """Parse and validate a ``key = value`` config file."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {body!r}")
            key, raw = (part.strip() for part in body.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            tag, _ = _KNOWN_KEYS[key]
            values[key] = _parse_value(key, tag, raw)
    return build_config(values)


def build_config(values: dict) -> ExperimentConfig:
    """Assemble an ExperimentConfig from a parsed key -> value mapping."""
    def get(key):
        return values.get(key, _KNOWN_KEYS[key][1])

    if get("schema") != SCHEMA_VERSION:
        raise ConfigError(
            f"config key 'schema': version {get('schema')} != supported {SCHEMA_VERSION}")
    kind = get("experiment")
    if kind is None:
        raise ConfigError("config key 'experiment': required")
    try:
        params = FrameParams(get("frame.m"), get("frame.n"), get("frame.delta_f"),
                             get("frame.cp_len"), get("frame.order"))
    except ValueError as exc:
        raise ConfigError(f"config key 'frame.*': {exc}") from exc
    profile = ChannelProfile(get("channel.paths"), get("channel.l_max"),
                             get("channel.k_max"), get("channel.gamma"),
                             get("channel.integer"))
    cfg = ExperimentConfig(
        kind=kind,
        params=params,
        profile=profile,
        snrs_db=_sweep(get("snr.start"), get("snr.stop"), get("snr.step")),
        trials=get("trials"),
        seed=get("seed"),
        experiment_id=get("id") or kind,
        mimo_antennas=get("mimo.antennas"),
        mimo_users=get("mimo.users"),
        ber_waveform=get("ber.waveform"),
        ber_estimated_csi=get("ber.estimated_csi"),
        sensing_targets=get("sensing.targets"),
        sensing_reflectivity_db=get("sensing.reflectivity_db"),
        sensing_oversample=get("sensing.oversample"),
    )
    cfg.validate()
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical config text; parse(serialize(parse(x))) == parse(x)."""
    snr_step = cfg.snrs_db[1] - cfg.snrs_db[0] if len(cfg.snrs_db) > 1 else 1.0
    lines = {
        "schema": SCHEMA_VERSION,
        "experiment": cfg.kind,
        "id": cfg.experiment_id,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "frame.m": cfg.params.m,
        "frame.n": cfg.params.n,
        "frame.delta_f": repr(cfg.params.delta_f),
        "frame.cp_len": cfg.params.cp_len,
        "frame.order": cfg.params.order,
        "snr.start": repr(cfg.snrs_db[0]),
        "snr.stop": repr(cfg.snrs_db[-1]),
        "snr.step": repr(snr_step),
        "channel.paths": cfg.profile.num_paths,
        "channel.l_max": cfg.profile.l_max,
        "channel.k_max": cfg.profile.k_max,
        "channel.gamma": repr(cfg.profile.pdp_exponent),
        "channel.integer": str(cfg.profile.integer_taps).lower(),
        "mimo.antennas": cfg.mimo_antennas,
        "mimo.users": cfg.mimo_users,
        "ber.waveform": cfg.ber_waveform,
        "ber.estimated_csi": str(cfg.ber_estimated_csi).lower(),
        "sensing.targets": ",".join(f"{l}:{k}" for l, k in cfg.sensing_targets),
        "sensing.reflectivity_db": ",".join(repr(x) for x in cfg.sensing_reflectivity_db),
        "sensing.oversample": cfg.sensing_oversample,
    }
    return "".join(f"{k} = {v}\n" for k, v in lines.items())


@dataclass(frozen=True)
class ResultTable:
    """Rectangular result rows under the fixed CSV schema."""

    experiment: str
    rows: tuple  # (sweep, metric, value, stderr, trials)

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r[0], r[1]))

    def to_csv(self) -> str:
        out = [",".join(CSV_HEADER)]
        for sweep, metric, value, stderr, trials in self.sorted_rows():
            out.append(
                f"{self.experiment},ddlink-{__version__},{sweep:.12g},{metric},"
                f"{value:.12g},{stderr:.12g},{trials}")
        return "\n".join(out) + "\n"

    def write(self, out_dir: str, seed: int) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{self.experiment}-{seed}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())
        return path

    def metric(self, sweep: float, name: str) -> float:
        for s, m, v, _, _ in self.rows:
            if s == sweep and m == name:
                return v
        raise KeyError(f"no row for sweep={sweep}, metric={name}")


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------------------
# experiment runners (worker functions are module-level so they pickle)

def _equiv_one(args):
    params, seed, trial = args
    from .modem import otfs_modulate as mod
    rng = RngStream(seed).child("equiv", trial)
    g = rng.generator()
    c = Constellation(params.order)
    bits = g.integers(0, 2, size=params.grid_size * c.bits_per_symbol)
    x = DDGrid.from_vec(map_bits(bits, c), params)
    sigs = [mod(x, path).samples for path in ModemPath]
    diff = 0.0
    for i in range(len(sigs)):
        for j in range(i + 1, len(sigs)):
            diff = max(diff, float(np.max(np.abs(sigs[i] - sigs[j]))))
    return diff


def _run_equiv(cfg: ExperimentConfig, jobs: int) -> ResultTable:
    diffs = _parallel_map(_equiv_one,
                          [(cfg.params, cfg.seed, t) for t in range(cfg.trials)], jobs)
    worst = max(diffs)
    table = ResultTable(cfg.experiment_id,
                        ((0.0, "max_pairwise_diff", worst, 0.0, cfg.trials),))
    if worst >= 1e-9:
        raise InvariantViolation(
            f"modulation-path equivalence violated: max pairwise diff {worst:.3e} >= 1e-9")
    return table


def _papr_one(args):
    params, seed, trial = args
    rng = RngStream(seed).child("papr", trial)
    g = rng.generator()
    c = Constellation(params.order)
    bits = g.integers(0, 2, size=params.grid_size * c.bits_per_symbol)
    syms = map_bits(bits, c)
    x_dd = DDGrid.from_vec(syms, params)
    x_tf = TFGrid(syms.reshape(params.m, params.n, order="F"), params)
    return papr(otfs_modulate(x_dd)), papr(ofdm_modulate(x_tf))


def _run_papr(cfg: ExperimentConfig, jobs: int) -> ResultTable:
    # The sweep axis doubles as the CCDF threshold grid (dB).
    pairs = _parallel_map(_papr_one,
                          [(cfg.params, cfg.seed, t) for t in range(cfg.trials)], jobs)
    otfs = np.array([p[0] for p in pairs])
    ofdm = np.array([p[1] for p in pairs])
    rows = []
    for thr in cfg.snrs_db:
        for name, vals in (("ccdf_otfs", otfs), ("ccdf_ofdm", ofdm)):
            p = float(np.mean(vals > thr))
            stderr = float(np.sqrt(p * (1 - p) / cfg.trials))
            rows.append((float(thr), name, p, stderr, cfg.trials))
    return ResultTable(cfg.experiment_id, tuple(rows))


def _ber_one(args):
    link_cfg, waveform, snr, trial = args
    c = Constellation(link_cfg.params.order)
    fn = _otfs_trial if waveform == "otfs" else _ofdm_trial
    return fn(link_cfg, snr, trial, c)


def _run_ber(cfg: ExperimentConfig, jobs: int) -> ResultTable:
    waveforms = ("otfs", "ofdm") if cfg.ber_waveform == "both" else (cfg.ber_waveform,)
    rows = []
    for waveform in waveforms:
        link_cfg = LinkConfig(cfg.params, cfg.profile, cfg.snrs_db, cfg.trials,
                              waveform=waveform, seed=cfg.seed,
                              estimated_csi=cfg.ber_estimated_csi)
        link_cfg.validate()
        for snr in cfg.snrs_db:
            results = _parallel_map(
                _ber_one, [(link_cfg, waveform, snr, t) for t in range(cfg.trials)], jobs)
            errors = sum(r[0] for r in results)
            bits = sum(r[1] for r in results)
            ber = errors / bits
            stderr = float(np.sqrt(max(ber * (1 - ber), 0.0) / bits))
            rows.append((float(snr), f"ber_{waveform}", ber, stderr, cfg.trials))
    return ResultTable(cfg.experiment_id, tuple(rows))


def _sumse_one(args):
    se_cfg, trial = args
    c = Constellation(se_cfg.params.order)
    curves, kf = _thp_mrt_trial(se_cfg, trial, c)
    zf = _ofdm_zf_trial(se_cfg, trial, c)
    return curves, kf, zf


def _run_sumse(cfg: ExperimentConfig, jobs: int) -> ResultTable:
    se_cfg = SumSeConfig(params=cfg.params, n_antennas=cfg.mimo_antennas,
                         n_users=cfg.mimo_users, profile=cfg.profile,
                         snrs_db=cfg.snrs_db, trials=cfg.trials, seed=cfg.seed)
    se_cfg.validate()
    results = _parallel_map(_sumse_one, [(se_cfg, t) for t in range(cfg.trials)], jobs)
    thp = np.array([[r[0] for r in res[0]] for res in results])
    mrt = np.array([[r[1] for r in res[0]] for res in results])
    kf = np.array([res[1] for res in results])
    zf = np.array([res[2] for res in results])
    rows = []
    for i, snr in enumerate(cfg.snrs_db):
        for name, a in (("sumse_otfs_thp", thp), ("sumse_otfs_mrt", mrt),
                        ("sumse_ofdm_zf", zf)):
            rows.append((float(snr), name, float(a[:, i].mean()),
                         float(a[:, i].std(ddof=1) / np.sqrt(cfg.trials)), cfg.trials))
        rows.append((float(snr), "known_fraction", float(kf.mean()),
                     float(kf.std(ddof=1) / np.sqrt(cfg.trials)), cfg.trials))
    return ResultTable(cfg.experiment_id, tuple(rows))


def _sensing_one(args):
    s_cfg, snr, trial = args
    return _nmse_trial(s_cfg, snr, trial)


def _run_sensing(cfg: ExperimentConfig, jobs: int) -> ResultTable:
    s_cfg = SensingConfig(params=cfg.params, target_positions=cfg.sensing_targets,
                          reflectivity_db=cfg.sensing_reflectivity_db,
                          snrs_db=cfg.snrs_db, trials=cfg.trials, seed=cfg.seed,
                          oversample=cfg.sensing_oversample)
    s_cfg.validate()
    items = [(s_cfg, snr, t) for snr in cfg.snrs_db for t in range(cfg.trials)]
    trial_results = _parallel_map(_sensing_one, items, jobs)
    rows = []
    for snr, par, idx, nmse, stderr, bound in nmse_eval(s_cfg, trial_results):
        rows.append((snr, f"nmse_{par}_t{idx}", nmse, stderr, cfg.trials))
        rows.append((snr, f"crb_{par}_t{idx}", bound, 0.0, cfg.trials))
    return ResultTable(cfg.experiment_id, tuple(rows))


_RUNNERS = {
    "equiv": _run_equiv,
    "papr": _run_papr,
    "ber": _run_ber,
    "sumse": _run_sumse,
    "sensing": _run_sensing,
}


def run(cfg: ExperimentConfig, out_dir: str | None = None, seed: int | None = None,
        jobs: int = 1) -> ResultTable:
    """Dispatch an experiment; optionally write `<id>-<seed>.csv` to out_dir.

    Identical (config, seed) pairs produce byte-identical CSV output.
    """
    if seed is not None and seed != cfg.seed:
        cfg = replace(cfg, seed=seed)
    cfg.validate()
    table = _RUNNERS[cfg.kind](cfg, jobs)
    if out_dir is not None:
        table.write(out_dir, cfg.seed)
    return table
