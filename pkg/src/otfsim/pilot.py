"""Maximum length sequence pilot: generation, scaling, grid embedding.

The pilot is a bipolar MLS of length N-1 placed (after a unitary DFT)
in one delay row of the DD grid, flanked by 2L zero guard rows so data
and pilot never interfere for delay spreads up to L.  Its two-valued
circular autocorrelation is what the synchronizer's timing metric keys
on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import dt_to_dd
from .params import OtfsParams

# Fibonacci LFSR feedback tap exponents (polynomial x^p + ... + 1) per
# register length.  Each entry yields a full-period m-sequence; the test
# suite checks the all-states-visited property exhaustively.
_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 11, 10, 4),
    13: (13, 12, 11, 8),
    14: (14, 13, 12, 2),
    15: (15, 14),
    16: (16, 15, 13, 4),
}


def gen_mls(p: int) -> np.ndarray:
    """One period (length 2**p - 1) of an m-sequence as 0/1 values.

    Fibonacci shift register with a fixed primitive feedback polynomial
    per register length and all-ones initial state, so runs are
    reproducible.
    """
    if p not in _TAPS:
        raise ValueError(f"unsupported register length {p}; supported: 2..16")
    taps = _TAPS[p]
    state = (1 << p) - 1
    period = (1 << p) - 1
    out = np.empty(period, dtype=np.int64)
    for i in range(period):
        out[i] = state & 1
        fb = 0
        for e in taps:
            fb ^= state >> (p - e)
        state = (state >> 1) | ((fb & 1) << (p - 1))
    return out


@dataclass(frozen=True)
class MlsConfig:
    """Pilot placement: row index, guard half-width, total pilot power."""

    l_mls: int
    guard_halfwidth: int
    total_power: float

    def __post_init__(self) -> None:
        if self.total_power <= 0:
            raise ValueError("total_power must be positive")
        if self.guard_halfwidth < 0:
            raise ValueError("guard_halfwidth must be non-negative")
        if self.l_mls < self.guard_halfwidth:
            raise ValueError(
                f"pilot row {self.l_mls} would wrap the guard band (need l_mls >= L)"
            )

    def validate_for(self, params: OtfsParams, l_tau_max: int | None = None) -> None:
        if self.l_mls + self.guard_halfwidth > params.M - 1:
            raise ValueError("guard band does not fit the grid")
        if l_tau_max is not None:
            if self.guard_halfwidth < l_tau_max:
                raise ValueError("guard half-width below channel delay spread")
            if self.l_mls + l_tau_max > params.M - 1:
                raise ValueError("received pilot copies would leave the grid")


@dataclass(frozen=True)
class MlsSequence:
    """Scaled bipolar MLS x (length N-1) and its zero-appended form x_tilde."""

    x: np.ndarray
    x_tilde: np.ndarray
    total_power: float


def scale_and_pad(bits: np.ndarray, total_power: float, n: int) -> MlsSequence:
    """Scale 0/1 MLS bits to +-sqrt(P/(N-1)) and append a trailing zero."""
    bits = np.asarray(bits)
    if bits.size != n - 1:
        raise ValueError(f"expected {n - 1} chips, got {bits.size}")
    amp = np.sqrt(total_power / (n - 1))
    x = np.where(bits == 0, amp, -amp).astype(np.float64)
    x_tilde = np.concatenate([x, [0.0]])
    return MlsSequence(x=x, x_tilde=x_tilde, total_power=float(total_power))


def make_mls(params: OtfsParams, total_power: float) -> MlsSequence:
    """Generate and scale the pilot matching the frame's Doppler size."""
    return scale_and_pad(gen_mls(params.p), total_power, params.N)


def mls_power_for_snr(snr_m_db: float, noise_var: float, n: int) -> float:
    """Total pilot power giving the requested average per-chip SNR."""
    return (n - 1) * noise_var * 10.0 ** (snr_m_db / 10.0)


def data_capacity(params: OtfsParams, cfg: MlsConfig) -> int:
    """Number of data symbols per frame outside the pilot and guard rows."""
    return (params.M - (2 * cfg.guard_halfwidth + 1)) * params.N


def data_row_indices(params: OtfsParams, cfg: MlsConfig) -> np.ndarray:
    lo = cfg.l_mls - cfg.guard_halfwidth
    hi = cfg.l_mls + cfg.guard_halfwidth
    rows = np.arange(params.M)
    return rows[(rows < lo) | (rows > hi)]


def extract_data_positions(params: OtfsParams, cfg: MlsConfig) -> tuple[np.ndarray, np.ndarray]:
    """(row, column) indices of data cells in the raster order used by embed_pilot."""
    rows = data_row_indices(params, cfg)
    rr = np.repeat(rows, params.N)
    cc = np.tile(np.arange(params.N), rows.size)
    return rr, cc


def embed_pilot(
    data: np.ndarray,
    mls: MlsSequence,
    cfg: MlsConfig,
    params: OtfsParams,
) -> np.ndarray:
    """Assemble the DD grid: transformed pilot row, zero guards, data raster.

    The pilot row carries the unitary DFT of x_tilde, so the delay-time
    grid's pilot row is exactly x_tilde.  Data symbols fill the remaining
    rows row-major.
    """
    cfg.validate_for(params)
    data = np.asarray(data, dtype=np.complex128)
    expected = data_capacity(params, cfg)
    if data.size != expected:
        raise ValueError(f"expected {expected} data symbols, got {data.size}")
    grid = np.zeros((params.M, params.N), dtype=np.complex128)
    grid[cfg.l_mls, :] = np.fft.fft(mls.x_tilde, norm="ortho")
    rr, cc = extract_data_positions(params, cfg)
    grid[rr, cc] = data
    return grid


def extract_data(grid: np.ndarray, cfg: MlsConfig, params: OtfsParams) -> np.ndarray:
    """Read data cells back out of a DD grid in embed order."""
    rr, cc = extract_data_positions(params, cfg)
    return grid[rr, cc]


def pilot_only_grid(mls: MlsSequence, cfg: MlsConfig, params: OtfsParams) -> np.ndarray:
    """The frame's deterministic content: pilot row set, everything else zero."""
    grid = np.zeros((params.M, params.N), dtype=np.complex128)
    grid[cfg.l_mls, :] = np.fft.fft(mls.x_tilde, norm="ortho")
    return grid
