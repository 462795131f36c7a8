"""Joint timing synchronization and channel estimation from the MLS pilot.

The receiver slides a candidate row start n~ over its sample buffer,
reads the N samples spaced M apart, multiplies by the local pilot and
takes an N-point DFT.  Rows that carry a pilot copy turn into a complex
exponential whose transform peaks sharply; everything else stays flat.
The max-to-sum ratio of the transform magnitudes is the timing metric:

    alpha(n~) = max_k |Q[k]| / sum_k |Q[k]|

The first threshold crossing fixes the timing offset; every crossing
inside the following L+1 candidates contributes one detected path whose
Doppler tap and gain follow in closed form from the same row:

    k_hat = N / ((N-2)*2*pi) * sum_n angle(q[n+1] * conj(q[n]))
    h_hat = 1/P * sum_n q[n] * exp(-j*2*pi*k_hat*n/N)

The transforms here are unnormalized; the metric is a ratio, so
detection is unaffected, and magnitude conventions only rescale Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParamSet, ChannelPath
from .params import OtfsParams
from .pilot import MlsSequence


class SyncFailure(RuntimeError):
    """No timing-metric crossing within the configured search window."""


@dataclass(frozen=True)
class SyncConfig:
    """Detector settings mirroring the pilot layout plus the threshold."""

    threshold: float
    l_mls: int
    guard_halfwidth: int
    l_rcp: int
    search_limit: int

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.search_limit < 1:
            raise ValueError("search_limit must be positive")


@dataclass(frozen=True)
class CorrelationRow:
    """One candidate row: correlator output, its transform, timing metric."""

    n_tilde: int
    q: np.ndarray
    spectrum: np.ndarray
    alpha: float


@dataclass(frozen=True)
class SyncResult:
    theta_hat: int
    paths_hat: ChannelParamSet
    metric_trace: np.ndarray  # columns (n_tilde, alpha)


def default_threshold(n: int) -> float:
    """Paper-calibrated detection threshold 8/N."""
    if n < 4:
        raise ValueError("N must be at least 4")
    return 8.0 / n


def _row_matrix(r: np.ndarray, start: int, count: int, params: OtfsParams) -> np.ndarray:
    """Rows n~ = start..start+count-1 as a (count, N) sample matrix."""
    idx = (start + np.arange(count))[:, None] + np.arange(params.N)[None, :] * params.M
    if idx[-1, -1] >= r.size or start < 0:
        raise ValueError("candidate rows reach past the sample buffer")
    return r[idx]


def _alphas(spectra: np.ndarray) -> np.ndarray:
    mags = np.abs(spectra)
    sums = mags.sum(axis=1)
    with np.errstate(invalid="ignore"):
        alphas = np.where(sums > 0, mags.max(axis=1) / np.where(sums > 0, sums, 1.0), 0.0)
    return alphas


def correlate_row(
    r: np.ndarray,
    n_tilde: int,
    mls: MlsSequence,
    params: OtfsParams,
) -> CorrelationRow:
    """Correlate candidate row n~ against the local pilot."""
    row = _row_matrix(np.asarray(r), n_tilde, 1, params)[0]
    q = row * mls.x_tilde
    spectrum = np.fft.fft(q)
    alpha = float(_alphas(spectrum[None, :])[0])
    return CorrelationRow(n_tilde=n_tilde, q=q, spectrum=spectrum, alpha=alpha)


def estimate_doppler(q: np.ndarray) -> float:
    """Closed-form off-grid Doppler tap from per-sample phase increments.

    Exact for q[n] = A*exp(j*2*pi*k*n/N) whenever |k| < N/2.  The trailing
    entry q[N-1] is the pilot's appended zero and is excluded.
    """
    q = np.asarray(q)
    n = q.size
    if np.any(q[: n - 1] == 0):
        raise ValueError("degenerate input: zero sample inside the pilot span")
    increments = np.angle(q[1 : n - 1] * np.conj(q[: n - 2]))
    return float(n / ((n - 2) * 2 * np.pi) * increments.sum())


def estimate_gain(
    q: np.ndarray,
    k_hat: float,
    total_power: float,
    l_mls: int,
    params: OtfsParams,
) -> complex:
    """Closed-form path gain, de-rotated to the serial-time convention.

    The raw estimate carries the pilot row's Doppler phase
    exp(j*2*pi/(M*N)*k*l_mls); removing it makes the reported gain
    directly comparable with the channel's h_i.
    """
    q = np.asarray(q)
    n = q.size
    if not np.isfinite(k_hat):
        raise ValueError("k_hat must be finite")
    twiddle = np.exp(-1j * 2 * np.pi * k_hat * np.arange(n - 1) / n)
    raw = (q[: n - 1] * twiddle).sum() / total_power
    derotate = np.exp(-1j * 2 * np.pi / (params.M * n) * k_hat * l_mls)
    return complex(raw * derotate)


def metric_trace(
    r: np.ndarray,
    mls: MlsSequence,
    params: OtfsParams,
    n_max: int,
) -> np.ndarray:
    """alpha(n~) for n~ = 0..n_max-1, computed in one batch."""
    rows = _row_matrix(np.asarray(r), 0, n_max, params)
    spectra = np.fft.fft(rows * mls.x_tilde[None, :], axis=1)
    return _alphas(spectra)


def max_feasible_candidates(r: np.ndarray, params: OtfsParams) -> int:
    """Largest candidate count the buffer supports (row n~ needs n~ + (N-1)*M)."""
    return int(np.asarray(r).size - (params.N - 1) * params.M)


def run_jtsce(
    r: np.ndarray,
    mls: MlsSequence,
    cfg: SyncConfig,
    params: OtfsParams,
) -> SyncResult:
    """Scan the buffer, detect the frame start and estimate every path.

    Candidates are processed in batches for speed; the decision sequence
    is identical to a sample-by-sample scan because alpha(n~) depends on
    n~ alone.  Raises SyncFailure when no crossing occurs before
    search_limit (or the buffer runs out).
    """
    r = np.asarray(r, dtype=np.complex128)
    limit = min(cfg.search_limit, max_feasible_candidates(r, params))
    if limit < 1:
        raise SyncFailure("buffer too short for a single candidate row")

    block = 256
    alphas = np.empty(0, dtype=np.float64)
    stop: int | None = None
    theta_hat: int | None = None
    crossings: list[int] = []
    n_done = 0
    while n_done < limit and (stop is None or n_done < stop):
        want = block if stop is None else min(block, stop - n_done)
        count = min(want, limit - n_done)
        rows = _row_matrix(r, n_done, count, params)
        spectra = np.fft.fft(rows * mls.x_tilde[None, :], axis=1)
        batch_alphas = _alphas(spectra)
        alphas = np.concatenate([alphas, batch_alphas])
        for i in np.nonzero(batch_alphas > cfg.threshold)[0]:
            n_tilde = n_done + int(i)
            if stop is not None and n_tilde >= stop:
                break
            if stop is None:
                stop = n_tilde + cfg.guard_halfwidth + 1
                theta_hat = n_tilde - cfg.l_mls - cfg.l_rcp
            crossings.append(n_tilde)
        n_done += count

    n_scanned = min(n_done, stop) if stop is not None else n_done
    alphas = alphas[:n_scanned]
    trace = np.column_stack([np.arange(n_scanned, dtype=np.float64), alphas])

    if stop is None or theta_hat is None:
        raise SyncFailure(f"no metric crossing within {n_scanned} candidates")

    paths = []
    for n_tilde in crossings:
        row = correlate_row(r, n_tilde, mls, params)
        k_hat = estimate_doppler(row.q)
        h_hat = estimate_gain(row.q, k_hat, mls.total_power, cfg.l_mls, params)
        l_hat = n_tilde - theta_hat - cfg.l_rcp - cfg.l_mls
        paths.append(ChannelPath(delay=l_hat, doppler=k_hat, gain=h_hat))
    return SyncResult(
        theta_hat=theta_hat,
        paths_hat=ChannelParamSet(paths),
        metric_trace=trace,
    )
