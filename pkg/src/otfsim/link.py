"""End-to-end transmit/receive composition used by experiments and tests."""

from __future__ import annotations

import numpy as np

from . import detector, epa, modem, pilot
from .channel import (
    ChannelParamSet,
    ReceivedFrame,
    add_awgn,
    apply_channel,
    insert_timing_offset,
)
from .params import OtfsParams


def flat_positions(rows: np.ndarray, cols: np.ndarray, params: OtfsParams) -> np.ndarray:
    """Map (row, col) grid cells to indices into the vectorized grid."""
    return rows + cols * params.M


def random_data_bits(n_symbols: int, order: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, n_symbols * (order.bit_length() - 1))


def tx_waveform(x_dd: np.ndarray, params: OtfsParams) -> np.ndarray:
    """DD grid -> RCP-prefixed serial frame."""
    return modem.add_rcp(modem.serialize(modem.dd_to_dt(x_dd)), params.L_rcp)


def rx_grid(block: np.ndarray, params: OtfsParams) -> np.ndarray:
    """Serial block (prefix already removed) -> received DD grid."""
    return modem.dt_to_dd(modem.deserialize(block, params))


def transmit(
    x_dd: np.ndarray,
    channel: ChannelParamSet,
    params: OtfsParams,
    theta: int,
    noise_var: float,
    rng: np.random.Generator,
) -> ReceivedFrame:
    """Waveform through channel, timing offset padding and noise.

    The Doppler phase is anchored at the block start (phase_origin =
    L_rcp), matching the delay-time oracle and the effective-channel
    operator.
    """
    wave = tx_waveform(x_dd, params)
    faded = apply_channel(wave, channel, params, phase_origin=params.L_rcp)
    padded = insert_timing_offset(faded, theta, params, rng, channel=channel)
    return ReceivedFrame(
        samples=add_awgn(padded, noise_var, rng),
        true_theta=theta,
        noise_var=noise_var,
    )


def extract_block(buffer: np.ndarray, theta_hat: int, params: OtfsParams) -> np.ndarray:
    """Cut the MN-sample block at the estimated frame start."""
    start = theta_hat + params.L_rcp
    if start < 0 or start + params.block_len > buffer.size:
        raise ValueError("estimated frame start leaves the buffer")
    return buffer[start : start + params.block_len]


def detect_frame(
    buffer: np.ndarray,
    theta_hat: int,
    channel_hat: ChannelParamSet,
    params: OtfsParams,
    noise_var: float,
    data_rows: np.ndarray,
    data_cols: np.ndarray,
    known_grid: np.ndarray | None = None,
) -> np.ndarray:
    """Equalize one frame with the given channel estimate; returns bits.

    known_grid carries the frame's deterministic cells (pilot row or
    impulse, zero guards) so their contribution can be cancelled before
    the data-symbol LMMSE.
    """
    y_dd = rx_grid(extract_block(buffer, theta_hat, params), params)
    ch = detector.build_effective_channel(channel_hat, params, noise_var)
    positions = flat_positions(data_rows, data_cols, params)
    constellation = modem.qam_constellation(params.qam_order)
    known_vec = None if known_grid is None else modem.vec_dd(known_grid)
    _, bits = detector.lmmse_detect(
        modem.vec_dd(y_dd), ch, positions, constellation, params.qam_order, known_vec
    )
    return bits


def make_mls_frame(
    params: OtfsParams,
    cfg: pilot.MlsConfig,
    mls: pilot.MlsSequence,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Random data bits plus the assembled DD grid for an MLS-pilot frame."""
    bits = random_data_bits(pilot.data_capacity(params, cfg), params.qam_order, rng)
    grid = pilot.embed_pilot(modem.qam_modulate(bits, params.qam_order), mls, cfg, params)
    return bits, grid


def make_epa_frame(
    params: OtfsParams,
    cfg: epa.EpaConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Random data bits plus the assembled DD grid for an impulse-pilot frame."""
    bits = random_data_bits(epa.epa_data_capacity(cfg, params), params.qam_order, rng)
    grid = epa.epa_embed(modem.qam_modulate(bits, params.qam_order), cfg, params)
    return bits, grid
