"""Seeded Monte Carlo experiments with CSV output.

Five experiment kinds cover a metric-trace snapshot, timing/delay
estimation accuracy versus the two SNRs, accuracy versus the detection
threshold, Doppler/gain estimation MSE with genie timing, and a BER
comparison of LMMSE detection under perfect knowledge, MLS-pilot joint
estimation, and the impulse-pilot baseline at matched total pilot power.

Every trial draws its random stream from (master seed, experiment kind,
grid point, trial index), so results are byte-reproducible and invariant
to the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, epa, link, pilot, sync
from .channel import ChannelParamSet, gen_random_channel
from .params import OtfsParams

EXPERIMENT_KINDS = ("snapshot", "sync_accuracy", "threshold_sweep", "mse", "ber")
_KIND_ID = {k: i for i, k in enumerate(EXPERIMENT_KINDS)}
_BER_BATCH = 50  # frames per scheduling batch; fixed so stopping is worker-count independent


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment run."""

    kind: str
    m: int = 16
    n: int = 32
    l_rcp: int = 4
    qam_order: int = 4
    subcarrier_spacing_hz: float = 15e3
    carrier_freq_hz: float = 8e9
    n_paths: int = 4
    l_tau_max: int = 3
    k_nu_max: float = 4.0
    fractional: bool = True
    l_mls: int = 3
    guard_halfwidth: int = 3
    snr_d_db: tuple[float, ...] = (10.0,)
    snr_m_db: tuple[float, ...] = (30.0,)
    thresholds: tuple[float, ...] = (0.25,)
    trials: int = 200
    seed: int = 2024
    theta_max: int = 64
    target_bit_errors: int = 100
    max_frames: int = 4000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_d_db or not self.snr_m_db or not self.thresholds:
            raise ValueError("SNR and threshold lists must be non-empty")
        if self.l_tau_max >= self.l_rcp:
            raise ValueError("channel delay spread must stay below the prefix length")
        if self.guard_halfwidth < self.l_tau_max:
            raise ValueError("guard half-width below the channel delay spread")
        if self.l_mls < self.guard_halfwidth or self.l_mls + self.guard_halfwidth > self.m - 1:
            raise ValueError("pilot/guard placement does not fit the grid")
        if self.l_mls + self.l_tau_max > self.m - 1:
            raise ValueError("received pilot copies would leave the grid")
        if self.n_paths > self.l_tau_max + 1:
            raise ValueError("more paths than distinct delay taps")
        if self.k_nu_max >= self.n / 2:
            raise ValueError("Doppler spread must stay below N/2")
        if self.theta_max < 0:
            raise ValueError("theta_max must be non-negative")
        for t in self.thresholds:
            if not 0.0 < t < 1.0:
                raise ValueError("thresholds must lie in (0, 1)")
        # run construction once so bad geometry fails at load time
        self.otfs_params()

    def otfs_params(self) -> OtfsParams:
        return OtfsParams(
            M=self.m,
            N=self.n,
            L_rcp=self.l_rcp,
            qam_order=self.qam_order,
            subcarrier_spacing_hz=self.subcarrier_spacing_hz,
            carrier_freq_hz=self.carrier_freq_hz,
        )

    def mls_config(self, total_power: float) -> pilot.MlsConfig:
        cfg = pilot.MlsConfig(
            l_mls=self.l_mls, guard_halfwidth=self.guard_halfwidth, total_power=total_power
        )
        cfg.validate_for(self.otfs_params(), self.l_tau_max)
        return cfg

    def sync_config(self, threshold: float) -> sync.SyncConfig:
        return sync.SyncConfig(
            threshold=threshold,
            l_mls=self.l_mls,
            guard_halfwidth=self.guard_halfwidth,
            l_rcp=self.l_rcp,
            search_limit=self.theta_max + self.l_rcp + self.l_mls + self.guard_halfwidth + self.m,
        )


@dataclass(frozen=True)
class MetricRecord:
    """One grid point's aggregated result; rates are ratios of the counters."""

    kind: str
    snr_m_db: float | None = None
    snr_d_db: float | None = None
    threshold: float | None = None
    method: str | None = None
    trials: int = 0
    to_correct: int | None = None
    to_delay_correct: int | None = None
    to_accuracy: float | None = None
    to_and_delay_accuracy: float | None = None
    doppler_mse: float | None = None
    gain_mse: float | None = None
    n_path_estimates: int | None = None
    bit_errors: int | None = None
    total_bits: int | None = None
    ber: float | None = None


_CSV_FIELDS = {
    "snapshot": ("n_tilde", "alpha", "threshold", "is_true_path"),
    "sync_accuracy": (
        "snr_m_db",
        "snr_d_db",
        "threshold",
        "trials",
        "to_correct",
        "to_delay_correct",
        "to_accuracy",
        "to_and_delay_accuracy",
    ),
    "threshold_sweep": (
        "threshold",
        "snr_m_db",
        "snr_d_db",
        "trials",
        "to_correct",
        "to_delay_correct",
        "to_accuracy",
        "to_and_delay_accuracy",
    ),
    "mse": ("snr_m_db", "snr_d_db", "trials", "n_path_estimates", "doppler_mse", "gain_mse"),
    "ber": (
        "method",
        "snr_m_db",
        "snr_d_db",
        "trials",
        "bit_errors",
        "total_bits",
        "ber",
    ),
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_csv(records, path: str | Path, kind: str) -> None:
    """Write one record per row with the fixed per-kind header."""
    fields = _CSV_FIELDS[kind]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for rec in records:
            row = dataclasses.asdict(rec) if dataclasses.is_dataclass(rec) else dict(rec)
            writer.writerow([_fmt(row.get(f)) for f in fields])


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a JSON config; unknown keys are rejected, missing keys default."""
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "kind" not in raw:
        raise ValueError("config must set 'kind'")
    coerced = dict(raw)
    for name in ("snr_d_db", "snr_m_db", "thresholds"):
        if name in coerced:
            coerced[name] = tuple(float(v) for v in coerced[name])
    return ExperimentConfig(**coerced)


def profile_config(kind: str, profile: str, seed: int = 2024) -> ExperimentConfig:
    """Built-in defaults: a fast CI geometry and the full-scale paper geometry."""
    if profile == "ci":
        # N = 32 keeps the detector's DFT contrast (at N = 16 the data-row
        # metric tail overlaps the worst-case fractional-Doppler pilot
        # metric); M = 16 keeps frames cheap for the dense LMMSE.
        base = dict(
            m=16, n=32, l_rcp=4, n_paths=4, l_tau_max=3, l_mls=3, guard_halfwidth=3,
            theta_max=64, trials=200,
        )
        t_det = 0.2  # below the worst-case fractional-Doppler row metric 0.233
    elif profile == "paper":
        base = dict(
            m=128, n=32, l_rcp=32, n_paths=6, l_tau_max=10, l_mls=10, guard_halfwidth=10,
            theta_max=512, trials=500,
        )
        t_det = sync.default_threshold(32)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    n = base["n"]
    per_kind = {
        "snapshot": dict(
            trials=1, snr_d_db=(10.0,), snr_m_db=(30.0,), thresholds=(t_det,), fractional=False
        ),
        "sync_accuracy": dict(
            snr_d_db=(10.0, 15.0, 20.0),
            snr_m_db=(20.0, 25.0, 30.0, 35.0, 40.0),
            thresholds=(t_det,),
            fractional=False,
        ),
        "threshold_sweep": dict(
            snr_d_db=(20.0,),
            snr_m_db=(25.0, 35.0),
            thresholds=tuple(t / n for t in (0.5, 2.0, 4.0, 8.0, 12.0) if t / n < 1.0)
            + ((16.0 / n,) if 16.0 / n < 1.0 else ()),
            fractional=False,
        ),
        "mse": dict(
            snr_d_db=(20.0,),
            snr_m_db=(20.0, 25.0, 30.0, 35.0, 40.0),
            thresholds=(t_det,),
            fractional=True,
        ),
        "ber": dict(
            snr_d_db=(5.0, 10.0, 15.0),
            snr_m_db=(25.0, 35.0),
            thresholds=(t_det,),
            fractional=True,
        ),
    }
    if kind not in per_kind:
        raise ValueError(f"unknown experiment kind {kind!r}")
    return ExperimentConfig(kind=kind, seed=seed, **base, **per_kind[kind])


def _trial_rng(config: ExperimentConfig, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, _KIND_ID[config.kind], point, trial])


def _noise_var(snr_d_db: float) -> float:
    return 10.0 ** (-snr_d_db / 10.0)


def _draw_theta(config: ExperimentConfig, rng: np.random.Generator) -> int:
    if config.theta_max == 0:
        return 0
    return int(rng.integers(0, config.theta_max))


# ---------------------------------------------------------------------------
# per-trial work functions (top level so worker processes can pickle them)

def _sync_trial(args) -> tuple[bool, bool]:
    config, point, trial, snr_m, snr_d, threshold = args
    rng = _trial_rng(config, point, trial)
    params = config.otfs_params()
    noise_var = _noise_var(snr_d)
    p_mls = pilot.mls_power_for_snr(snr_m, noise_var, params.N)
    mls = pilot.make_mls(params, p_mls)
    mcfg = config.mls_config(p_mls)
    channel = gen_random_channel(
        config.n_paths, config.l_tau_max, config.k_nu_max, config.fractional, rng
    )
    theta = _draw_theta(config, rng)
    _, grid = link.make_mls_frame(params, mcfg, mls, rng)
    rx = link.transmit(grid, channel, params, theta, noise_var, rng)
    try:
        res = sync.run_jtsce(rx.samples, mls, config.sync_config(threshold), params)
    except sync.SyncFailure:
        return False, False
    to_ok = res.theta_hat == theta
    delay_ok = bool(
        to_ok and set(res.paths_hat.delays.tolist()) == set(channel.delays.tolist())
    )
    return to_ok, delay_ok


def _mse_trial(args) -> tuple[float, float, int]:
    config, point, trial, snr_m, snr_d = args
    rng = _trial_rng(config, point, trial)
    params = config.otfs_params()
    noise_var = _noise_var(snr_d)
    p_mls = pilot.mls_power_for_snr(snr_m, noise_var, params.N)
    mls = pilot.make_mls(params, p_mls)
    mcfg = config.mls_config(p_mls)
    channel = gen_random_channel(
        config.n_paths, config.l_tau_max, config.k_nu_max, config.fractional, rng
    )
    theta = _draw_theta(config, rng)
    _, grid = link.make_mls_frame(params, mcfg, mls, rng)
    rx = link.transmit(grid, channel, params, theta, noise_var, rng)
    dop_sq = 0.0
    gain_sq = 0.0
    for path in channel:
        n_tilde = theta + params.L_rcp + config.l_mls + path.delay
        row = sync.correlate_row(rx.samples, n_tilde, mls, params)
        k_hat = sync.estimate_doppler(row.q)
        h_hat = sync.estimate_gain(row.q, k_hat, p_mls, config.l_mls, params)
        dop_sq += (k_hat - path.doppler) ** 2
        gain_sq += abs(h_hat - path.gain) ** 2
    return dop_sq, gain_sq, len(channel)


def _ber_trial(args) -> tuple[int, int]:
    config, point, trial, method, snr_m, snr_d = args
    rng = _trial_rng(config, point, trial)
    params = config.otfs_params()
    noise_var = _noise_var(snr_d)
    p_mls = pilot.mls_power_for_snr(snr_m, noise_var, params.N)
    channel = gen_random_channel(
        config.n_paths, config.l_tau_max, config.k_nu_max, config.fractional, rng
    )

    if method == "epa":
        ecfg = epa.default_epa_config(params, p_mls, config.guard_halfwidth, config.k_nu_max)
        bits, grid = link.make_epa_frame(params, ecfg, rng)
        rx = link.transmit(grid, channel, params, 0, noise_var, rng)
        y_dd = link.rx_grid(link.extract_block(rx.samples, 0, params), params)
        est = epa.epa_estimate(y_dd, ecfg, params, noise_var)
        if est is None:
            return bits.size, bits.size
        rows, cols = epa.epa_data_positions(ecfg, params)
        known = epa.pilot_only_grid(ecfg, params)
        theta_hat: int | None = 0
        channel_hat: ChannelParamSet | None = est
    else:
        mls = pilot.make_mls(params, p_mls)
        mcfg = config.mls_config(p_mls)
        bits, grid = link.make_mls_frame(params, mcfg, mls, rng)
        theta = _draw_theta(config, rng)
        rx = link.transmit(grid, channel, params, theta, noise_var, rng)
        rows, cols = pilot.extract_data_positions(params, mcfg)
        known = pilot.pilot_only_grid(mls, mcfg, params)
        if method == "perfect":
            theta_hat, channel_hat = theta, channel
        else:
            try:
                res = sync.run_jtsce(
                    rx.samples, mls, config.sync_config(config.thresholds[0]), params
                )
                theta_hat, channel_hat = res.theta_hat, res.paths_hat
            except sync.SyncFailure:
                theta_hat, channel_hat = None, None

    if theta_hat is None or channel_hat is None:
        return bits.size, bits.size
    try:
        out = link.detect_frame(
            rx.samples, theta_hat, channel_hat, params, noise_var, rows, cols, known
        )
    except ValueError:
        return bits.size, bits.size
    return int(np.sum(out != bits)), bits.size


# ---------------------------------------------------------------------------
# runners

class _Pool:
    """Order-preserving map over trials, optionally multi-process."""

    def __init__(self, workers: int):
        self.workers = max(1, workers)
        self._exec = ProcessPoolExecutor(self.workers) if self.workers > 1 else None

    def map(self, fn, args_list):
        if self._exec is None:
            return [fn(a) for a in args_list]
        chunk = max(1, len(args_list) // (4 * self.workers))
        return list(self._exec.map(fn, args_list, chunksize=chunk))

    def close(self) -> None:
        if self._exec is not None:
            self._exec.shutdown()


def run_snapshot(config: ExperimentConfig):
    """Single-trial metric trace with threshold and true row markers."""
    params = config.otfs_params()
    rng = _trial_rng(config, 0, 0)
    snr_m, snr_d = config.snr_m_db[0], config.snr_d_db[0]
    noise_var = _noise_var(snr_d)
    p_mls = pilot.mls_power_for_snr(snr_m, noise_var, params.N)
    mls = pilot.make_mls(params, p_mls)
    mcfg = config.mls_config(p_mls)
    channel = gen_random_channel(
        config.n_paths, config.l_tau_max, config.k_nu_max, config.fractional, rng
    )
    theta = _draw_theta(config, rng)
    _, grid = link.make_mls_frame(params, mcfg, mls, rng)
    rx = link.transmit(grid, channel, params, theta, noise_var, rng)
    true_rows = theta + params.L_rcp + config.l_mls + channel.delays
    n_max = min(
        int(true_rows.max()) + 2 * params.M + 1,
        sync.max_feasible_candidates(rx.samples, params),
    )
    alphas = sync.metric_trace(rx.samples, mls, params, n_max)
    threshold = config.thresholds[0]
    rows = [
        {
            "n_tilde": i,
            "alpha": float(alphas[i]),
            "threshold": threshold,
            "is_true_path": int(i in set(true_rows.tolist())),
        }
        for i in range(n_max)
    ]
    extras = {
        "true_theta": theta,
        "true_delays": channel.delays.tolist(),
        "true_dopplers": channel.dopplers.tolist(),
        "true_row_positions": true_rows.tolist(),
    }
    return rows, extras


def _accuracy_runner(config: ExperimentConfig, points):
    pool = _Pool(config.workers)
    records = []
    try:
        for point_id, (threshold, snr_m, snr_d) in enumerate(points):
            args = [
                (config, point_id, t, snr_m, snr_d, threshold) for t in range(config.trials)
            ]
            outcomes = pool.map(_sync_trial, args)
            to_ok = sum(1 for a, _ in outcomes if a)
            both_ok = sum(1 for _, b in outcomes if b)
            records.append(
                MetricRecord(
                    kind=config.kind,
                    snr_m_db=snr_m,
                    snr_d_db=snr_d,
                    threshold=threshold,
                    trials=config.trials,
                    to_correct=to_ok,
                    to_delay_correct=both_ok,
                    to_accuracy=to_ok / config.trials,
                    to_and_delay_accuracy=both_ok / config.trials,
                )
            )
    finally:
        pool.close()
    return records


def run_sync_accuracy(config: ExperimentConfig):
    threshold = config.thresholds[0]
    points = [
        (threshold, snr_m, snr_d)
        for snr_m in config.snr_m_db
        for snr_d in config.snr_d_db
    ]
    return _accuracy_runner(config, points)


def run_threshold_sweep(config: ExperimentConfig):
    snr_d = config.snr_d_db[0]
    points = [
        (threshold, snr_m, snr_d)
        for threshold in config.thresholds
        for snr_m in config.snr_m_db
    ]
    return _accuracy_runner(config, points)


def run_mse(config: ExperimentConfig):
    pool = _Pool(config.workers)
    records = []
    try:
        for point_id, snr_m in enumerate(config.snr_m_db):
            snr_d = config.snr_d_db[0]
            args = [(config, point_id, t, snr_m, snr_d) for t in range(config.trials)]
            outcomes = pool.map(_mse_trial, args)
            n_est = sum(n for _, _, n in outcomes)
            records.append(
                MetricRecord(
                    kind=config.kind,
                    snr_m_db=snr_m,
                    snr_d_db=snr_d,
                    trials=config.trials,
                    n_path_estimates=n_est,
                    doppler_mse=sum(d for d, _, _ in outcomes) / n_est,
                    gain_mse=sum(g for _, g, _ in outcomes) / n_est,
                )
            )
    finally:
        pool.close()
    return records


def ber_methods(config: ExperimentConfig):
    """Curve list: perfect reference plus each estimator at each pilot SNR."""
    methods = [("perfect", max(config.snr_m_db))]
    methods += [("jtsce", m) for m in config.snr_m_db]
    methods += [("epa", m) for m in config.snr_m_db]
    return methods


def run_ber(config: ExperimentConfig):
    pool = _Pool(config.workers)
    records = []
    try:
        point_id = 0
        for method, snr_m in ber_methods(config):
            for snr_d in config.snr_d_db:
                errors = 0
                bits_total = 0
                frames = 0
                while frames < config.max_frames and errors < config.target_bit_errors:
                    batch = min(_BER_BATCH, config.max_frames - frames)
                    args = [
                        (config, point_id, frames + i, method, snr_m, snr_d)
                        for i in range(batch)
                    ]
                    for e, b in pool.map(_ber_trial, args):
                        errors += e
                        bits_total += b
                    frames += batch
                records.append(
                    MetricRecord(
                        kind=config.kind,
                        method=method,
                        snr_m_db=snr_m,
                        snr_d_db=snr_d,
                        trials=frames,
                        bit_errors=errors,
                        total_bits=bits_total,
                        ber=errors / bits_total if bits_total else 0.0,
                    )
                )
                point_id += 1
    finally:
        pool.close()
    return records


_RUNNERS = {
    "sync_accuracy": run_sync_accuracy,
    "threshold_sweep": run_threshold_sweep,
    "mse": run_mse,
    "ber": run_ber,
}


def _git_revision() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=10,
            check=False,
        )
    except OSError:
        return None
    rev = out.stdout.strip()
    return rev if out.returncode == 0 and rev else None


def run_experiment(config: ExperimentConfig, out_path: str | Path):
    """Run one experiment, write the CSV and a JSON run manifest."""
    start = time.time()
    if config.kind == "snapshot":
        rows, extras = run_snapshot(config)
        emit_csv(rows, out_path, "snapshot")
        records = rows
    else:
        records = _RUNNERS[config.kind](config)
        emit_csv(records, out_path, config.kind)
        extras = {}
    manifest = {
        "config": dataclasses.asdict(config),
        "seed": config.seed,
        "kind": config.kind,
        "git_revision": _git_revision(),
        "wall_time_s": time.time() - start,
        "package_version": __version__,
        **extras,
    }
    manifest_path = Path(str(out_path) + ".manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records
