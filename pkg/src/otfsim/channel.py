"""Doubly-selective channel simulation and impairments.

A channel is a set of paths (delay tap l_i, Doppler tap k_i, complex
gain h_i) acting on serial-time samples:

    r[n'] = sum_i h_i * s[n' - l_i] * exp(j*2*pi/(M*N) * k_i * (n' - l_i))

Doppler taps may be fractional.  The Doppler phase is referenced to
``phase_origin``; the transmit chain anchors it at the start of the
MN-sample block (phase_origin = L_rcp) so that the delay-time oracle,
the estimator's gain de-rotation and the effective-channel operator all
share one phase convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import qam_modulate
from .params import OtfsParams


@dataclass(frozen=True)
class ChannelPath:
    """One propagation path: integer delay tap, real Doppler tap, gain."""

    delay: int
    doppler: float
    gain: complex

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError(f"delay tap must be non-negative, got {self.delay}")


@dataclass(frozen=True)
class ChannelParamSet:
    """Ordered path list; delays non-decreasing, (delay, Doppler) pairs unique.

    Channels drawn by gen_random_channel always have strictly distinct
    delays; estimated sets may legitimately carry several Doppler taps at
    one delay.
    """

    paths: tuple[ChannelPath, ...]

    def __init__(self, paths) -> None:
        object.__setattr__(self, "paths", tuple(paths))
        if not self.paths:
            raise ValueError("channel needs at least one path")
        keys = [(p.delay, p.doppler) for p in self.paths]
        if sorted(d for d, _ in keys) != [d for d, _ in keys]:
            raise ValueError("paths must be ordered by delay")
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (delay, doppler) path")

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths], dtype=np.int64)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([p.doppler for p in self.paths], dtype=np.float64)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=np.complex128)

    @property
    def max_delay(self) -> int:
        return int(self.delays.max())


@dataclass(frozen=True)
class ReceivedFrame:
    """Receiver buffer plus the ground truth used by experiments."""

    samples: np.ndarray
    true_theta: int
    noise_var: float


def decompose_theta(theta: int, m: int) -> tuple[int, int]:
    """Split a timing offset into (delay part, time part): theta = d + M*t."""
    return theta % m, theta // m


def apply_channel(
    s: np.ndarray,
    channel: ChannelParamSet,
    params: OtfsParams,
    phase_origin: int = 0,
) -> np.ndarray:
    """Pass serial samples through the multipath Doppler channel.

    Samples before index 0 are taken as zero; interference from earlier
    transmissions is modeled by insert_timing_offset's padding instead.
    The Doppler exponent is 2*pi/(M*N) * k_i * (n' - phase_origin - l_i).
    """
    s = np.asarray(s, dtype=np.complex128)
    mn = params.block_len
    n_idx = np.arange(s.size)
    out = np.zeros_like(s)
    for path in channel:
        if path.delay >= s.size:
            raise ValueError(f"delay tap {path.delay} >= signal length {s.size}")
        delayed = np.concatenate([np.zeros(path.delay, dtype=np.complex128), s[: s.size - path.delay]])
        phase = np.exp(1j * 2 * np.pi / mn * path.doppler * (n_idx - phase_origin - path.delay))
        out += path.gain * delayed * phase
    return out


def dt_io_oracle(x_dt: np.ndarray, channel: ChannelParamSet, params: OtfsParams) -> np.ndarray:
    """Delay-time-domain input/output relation; the modem/channel cross-check.

    Y_DT[l, n] = sum_i h_i X_DT[l-l_i, n] e^{j 2pi/(MN) k_i (l-l_i)} e^{j 2pi/N k_i n}

    Rows with l < l_i wrap cyclically through the prefix: the sample at
    block index l - l_i + n*M < n*M belongs to the previous time slot, so
    the wrapped row is also shifted one column back.  The phase always
    uses the unwrapped exponent k_i * (l - l_i + n*M).
    """
    m, n = params.M, params.N
    if x_dt.shape != (m, n):
        raise ValueError(f"grid shape {x_dt.shape} does not match ({m}, {n})")
    rows = np.arange(m)[:, None]
    cols = np.arange(n)[None, :]
    out = np.zeros((m, n), dtype=np.complex128)
    for path in channel:
        shifted = np.roll(x_dt, path.delay, axis=0)
        if path.delay:
            shifted[: path.delay, :] = np.roll(shifted[: path.delay, :], 1, axis=1)
        phase = np.exp(1j * 2 * np.pi / (m * n) * path.doppler * (rows - path.delay)) * np.exp(
            1j * 2 * np.pi / n * path.doppler * cols
        )
        out += path.gain * shifted * phase
    return out


def add_awgn(s: np.ndarray, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise of the given variance."""
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    s = np.asarray(s, dtype=np.complex128)
    if noise_var == 0:
        return s.copy()
    scale = np.sqrt(noise_var / 2.0)
    return s + scale * (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size))


def _data_like_padding(
    n: int,
    params: OtfsParams,
    rng: np.random.Generator,
    channel: ChannelParamSet | None,
) -> np.ndarray:
    """Unit-power random QAM samples, optionally passed through the channel.

    A warm-up span of max_delay samples is generated and discarded so the
    retained padding has stationary statistics.
    """
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    warmup = channel.max_delay if channel is not None else 0
    bps = params.qam_order.bit_length() - 1
    bits = rng.integers(0, 2, (n + warmup) * bps)
    samples = qam_modulate(bits, params.qam_order)
    if channel is not None:
        samples = apply_channel(samples, channel, params)
    return samples[warmup:]


def insert_timing_offset(
    s: np.ndarray,
    theta: int,
    params: OtfsParams,
    rng: np.random.Generator,
    channel: ChannelParamSet | None = None,
    tail: int | None = None,
) -> np.ndarray:
    """Prepend theta data-like samples and append trailing padding.

    The receiver's scan then starts theta samples before the frame; the
    appended tail (default M*N samples) guarantees every candidate row in
    the search window can be read in full.  Padding mimics a neighboring
    frame: random QAM symbols sent through the same channel when one is
    given.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    s = np.asarray(s, dtype=np.complex128)
    tail_len = params.block_len if tail is None else tail
    lead = _data_like_padding(theta, params, rng, channel)
    trail = _data_like_padding(tail_len, params, rng, channel)
    return np.concatenate([lead, s, trail])


def gen_random_channel(
    n_paths: int,
    l_max: int,
    k_max: float,
    fractional: bool,
    rng: np.random.Generator,
) -> ChannelParamSet:
    """Draw a random channel: first path at delay 0, Jakes Doppler, Rayleigh gains.

    Remaining delays are drawn without replacement from [1, l_max]; each
    Doppler tap is k_max*cos(angle) with a uniform angle (rounded to the
    nearest integer when fractional is False); i.i.d. complex Gaussian
    gains are normalized to unit total power.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    if n_paths > l_max + 1:
        raise ValueError(f"cannot place {n_paths} distinct delays in [0, {l_max}]")
    delays = np.zeros(n_paths, dtype=np.int64)
    if n_paths > 1:
        delays[1:] = np.sort(rng.choice(np.arange(1, l_max + 1), size=n_paths - 1, replace=False))
    dopplers = k_max * np.cos(rng.uniform(0.0, 2 * np.pi, n_paths))
    if not fractional:
        dopplers = np.rint(dopplers)
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2)
    gains /= np.linalg.norm(gains)
    return ChannelParamSet(
        ChannelPath(int(d), float(k), complex(g)) for d, k, g in zip(delays, dopplers, gains)
    )
