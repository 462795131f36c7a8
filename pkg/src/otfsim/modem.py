"""QAM mapping and the DD <-> DT <-> serial-time transform chain.

The delay-Doppler grid is turned into a transmit waveform in three
steps: a unitary inverse DFT along each row (Doppler -> time), a
column-wise serialization s[n'] = X_DT[l, n] with n' = l + n*M, and a
reduced cyclic prefix prepended to the whole block.  All maps here are
exact inverses of their counterparts.
"""

from __future__ import annotations

import numpy as np

from .params import OtfsParams


def _gray_encode(pos: np.ndarray) -> np.ndarray:
    return pos ^ (pos >> 1)


def _gray_decode(code: np.ndarray, width: int) -> np.ndarray:
    pos = code.copy()
    shift = 1
    while shift < width:
        pos = pos ^ (pos >> shift)
        shift *= 2
    return pos


def _qam_tables(order: int) -> tuple[int, float]:
    """Bits per axis and the unit-average-power normalization scale."""
    if order not in (4, 16, 64):
        raise ValueError(f"unsupported QAM order {order}")
    bits_per_axis = order.bit_length() // 2
    m = 1 << bits_per_axis
    levels = 2.0 * np.arange(m) - (m - 1)
    return bits_per_axis, float(np.sqrt(2.0 * np.mean(levels**2)))


def qam_modulate(bits: np.ndarray, order: int) -> np.ndarray:
    """Map a bit vector onto Gray-coded unit-average-power QAM symbols.

    The first half of each symbol's bits selects the in-phase level, the
    second half the quadrature level.  Bit group 0 maps to the most
    positive amplitude, so bits (0, 0) give (1+1j)/sqrt(2) at order 4,
    and amplitudes adjacent on either axis differ in exactly one bit.
    """
    bits = np.asarray(bits, dtype=np.int64)
    m, scale = _qam_tables(order)
    bps = 2 * m
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(m - 1, -1, -1)
    pos_i = _gray_decode((groups[:, :m] * weights).sum(axis=1), m)
    pos_q = _gray_decode((groups[:, m:] * weights).sum(axis=1), m)
    n_levels = 1 << m
    amp_i = (n_levels - 1) - 2.0 * pos_i
    amp_q = (n_levels - 1) - 2.0 * pos_q
    return (amp_i + 1j * amp_q) / scale


def qam_demodulate(symbols: np.ndarray, order: int) -> np.ndarray:
    """Hard-slice symbols back to bits; exact inverse of qam_modulate."""
    symbols = np.asarray(symbols)
    m, scale = _qam_tables(order)
    n_levels = 1 << m

    def axis_bits(amp: np.ndarray) -> np.ndarray:
        pos = np.clip(np.rint(((n_levels - 1) - amp * scale) / 2.0), 0, n_levels - 1)
        code = _gray_encode(pos.astype(np.int64))
        out = np.empty((amp.size, m), dtype=np.int64)
        for b in range(m):
            out[:, b] = (code >> (m - 1 - b)) & 1
        return out

    bi = axis_bits(symbols.real.reshape(-1))
    bq = axis_bits(symbols.imag.reshape(-1))
    return np.concatenate([bi, bq], axis=1).reshape(-1)


def qam_constellation(order: int) -> np.ndarray:
    """All constellation points, indexed by their bit pattern."""
    m, _ = _qam_tables(order)
    bps = 2 * m
    bits = np.array(
        [[(v >> (bps - 1 - b)) & 1 for b in range(bps)] for v in range(order)]
    )
    return qam_modulate(bits.reshape(-1), order)


def dd_to_dt(x_dd: np.ndarray) -> np.ndarray:
    """Unitary inverse DFT of each row: Doppler bins -> time slots."""
    return np.fft.ifft(x_dd, axis=1, norm="ortho")


def dt_to_dd(x_dt: np.ndarray) -> np.ndarray:
    """Exact inverse of dd_to_dt."""
    return np.fft.fft(x_dt, axis=1, norm="ortho")


def serialize(x_dt: np.ndarray) -> np.ndarray:
    """Column-wise serialization: s[l + n*M] = X_DT[l, n]."""
    return x_dt.flatten(order="F")


def deserialize(s: np.ndarray, params: OtfsParams) -> np.ndarray:
    """Serial-to-parallel conversion, inverse of serialize."""
    s = np.asarray(s)
    if s.size != params.block_len:
        raise ValueError(f"expected {params.block_len} samples, got {s.size}")
    return s.reshape((params.M, params.N), order="F")


def add_rcp(s: np.ndarray, l_rcp: int) -> np.ndarray:
    """Prepend the last l_rcp samples as a reduced cyclic prefix."""
    s = np.asarray(s)
    if l_rcp == 0:
        return s.copy()
    if l_rcp > s.size:
        raise ValueError(f"prefix length {l_rcp} exceeds block length {s.size}")
    return np.concatenate([s[-l_rcp:], s])


def remove_rcp(r: np.ndarray, l_rcp: int) -> np.ndarray:
    """Drop the first l_rcp samples of a prefixed frame."""
    r = np.asarray(r)
    if l_rcp > r.size:
        raise ValueError(f"prefix length {l_rcp} exceeds frame length {r.size}")
    return r[l_rcp:].copy()


def vec_dd(grid: np.ndarray) -> np.ndarray:
    """Column-major vectorization used by the effective-channel operator."""
    return grid.flatten(order="F")


def unvec_dd(vec: np.ndarray, params: OtfsParams) -> np.ndarray:
    """Inverse of vec_dd."""
    return np.asarray(vec).reshape((params.M, params.N), order="F")
