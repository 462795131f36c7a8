"""Embedded single-impulse pilot channel estimation baseline.

One DD-domain impulse of amplitude sqrt(pilot_power) sits at (l_p, k_p)
inside a zeroed guard region; the receiver thresholds the magnitude of
the received DD grid over the pilot's delay-Doppler neighborhood and
reads one integer-tap path per bin above threshold.  Doppler taps off
the integer grid leak across bins, which is this estimator's structural
handicap relative to the MLS-based scheme at matched total pilot power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParamSet, ChannelPath
from .params import OtfsParams


@dataclass(frozen=True)
class EpaConfig:
    """Impulse pilot placement, guard sizing and detection threshold."""

    pilot_power: float
    l_p: int
    k_p: int
    guard_halfwidth: int
    doppler_halfwidth: int
    doppler_readout_halfwidth: int
    noise_threshold_sigmas: float = 3.0

    def __post_init__(self) -> None:
        if self.pilot_power <= 0:
            raise ValueError("pilot_power must be positive")
        if self.guard_halfwidth < 0 or self.doppler_halfwidth < 0:
            raise ValueError("guard widths must be non-negative")
        if self.doppler_readout_halfwidth < 0:
            raise ValueError("readout width must be non-negative")
        if self.l_p < self.guard_halfwidth:
            raise ValueError("delay guard would wrap below row 0")

    def validate_for(self, params: OtfsParams) -> None:
        if self.l_p + self.guard_halfwidth > params.M - 1:
            raise ValueError("delay guard does not fit the grid")
        if 2 * self.doppler_halfwidth + 1 > params.N:
            raise ValueError("Doppler guard does not fit the grid")
        if not 0 <= self.k_p < params.N:
            raise ValueError("pilot Doppler index outside the grid")


def default_epa_config(
    params: OtfsParams,
    pilot_power: float,
    guard_halfwidth: int,
    k_nu_max: float,
) -> EpaConfig:
    """Guard sized for delay spread L and twice the Doppler spread."""
    return EpaConfig(
        pilot_power=pilot_power,
        l_p=guard_halfwidth,
        k_p=params.N // 2,
        guard_halfwidth=guard_halfwidth,
        doppler_halfwidth=min(2 * math.ceil(k_nu_max), (params.N - 1) // 2),
        doppler_readout_halfwidth=min(math.ceil(k_nu_max), (params.N - 1) // 2),
    )


def pilot_symbol_snr_db(snr_m_db: float, n: int) -> float:
    """Per-symbol pilot SNR under total-power parity with an N-1 chip MLS."""
    return snr_m_db + 10.0 * math.log10(n - 1)


def _guard_cells(cfg: EpaConfig, params: OtfsParams) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(cfg.l_p - cfg.guard_halfwidth, cfg.l_p + cfg.guard_halfwidth + 1)
    cols = (np.arange(-cfg.doppler_halfwidth, cfg.doppler_halfwidth + 1) + cfg.k_p) % params.N
    rr = np.repeat(rows, cols.size)
    cc = np.tile(cols, rows.size)
    return rr, cc


def epa_data_positions(cfg: EpaConfig, params: OtfsParams) -> tuple[np.ndarray, np.ndarray]:
    """(row, col) indices of data cells, row-major outside the guard block."""
    cfg.validate_for(params)
    mask = np.ones((params.M, params.N), dtype=bool)
    rr, cc = _guard_cells(cfg, params)
    mask[rr, cc] = False
    rows, cols = np.nonzero(mask)
    return rows, cols


def epa_data_capacity(cfg: EpaConfig, params: OtfsParams) -> int:
    return params.M * params.N - (2 * cfg.guard_halfwidth + 1) * (2 * cfg.doppler_halfwidth + 1)


def epa_embed(data: np.ndarray, cfg: EpaConfig, params: OtfsParams) -> np.ndarray:
    """DD grid with the impulse pilot, zero guards and data elsewhere."""
    cfg.validate_for(params)
    data = np.asarray(data, dtype=np.complex128)
    expected = epa_data_capacity(cfg, params)
    if data.size != expected:
        raise ValueError(f"expected {expected} data symbols, got {data.size}")
    grid = np.zeros((params.M, params.N), dtype=np.complex128)
    rows, cols = epa_data_positions(cfg, params)
    grid[rows, cols] = data
    grid[cfg.l_p, cfg.k_p] = np.sqrt(cfg.pilot_power)
    return grid


def epa_extract_data(grid: np.ndarray, cfg: EpaConfig, params: OtfsParams) -> np.ndarray:
    rows, cols = epa_data_positions(cfg, params)
    return grid[rows, cols]


def pilot_only_grid(cfg: EpaConfig, params: OtfsParams) -> np.ndarray:
    """The frame's deterministic content: lone impulse, everything else zero."""
    grid = np.zeros((params.M, params.N), dtype=np.complex128)
    grid[cfg.l_p, cfg.k_p] = np.sqrt(cfg.pilot_power)
    return grid


def epa_estimate(
    y_dd: np.ndarray,
    cfg: EpaConfig,
    params: OtfsParams,
    noise_var: float,
) -> ChannelParamSet | None:
    """Threshold the received pilot neighborhood into integer-tap paths.

    A path (l_i, k_i, h_i) moves the impulse to (l_p + l_i, k_p + k_i)
    scaled by h_i exp(j*2*pi/(MN)*k_i*l_p); bins above
    noise_threshold_sigmas * sqrt(noise_var) are inverted accordingly.
    Returns None when nothing exceeds the threshold.
    """
    cfg.validate_for(params)
    amp = np.sqrt(cfg.pilot_power)
    thr = cfg.noise_threshold_sigmas * np.sqrt(noise_var)
    mn = params.block_len
    hw = _readout_halfwidth(cfg)
    k_off = np.arange(-hw, hw + 1)
    paths = []
    for l_i in range(0, cfg.guard_halfwidth + 1):
        row = cfg.l_p + l_i
        for k_i in k_off:
            col = (cfg.k_p + k_i) % params.N
            val = y_dd[row, col]
            if np.abs(val) > thr:
                gain = val / (amp * np.exp(1j * 2 * np.pi / mn * k_i * cfg.l_p))
                paths.append(ChannelPath(delay=l_i, doppler=float(k_i), gain=complex(gain)))
    if not paths:
        return None
    return ChannelParamSet(paths)


def _readout_halfwidth(cfg: EpaConfig) -> int:
    return cfg.doppler_readout_halfwidth
