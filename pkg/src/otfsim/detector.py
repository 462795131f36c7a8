"""Effective DD-domain channel operator and LMMSE symbol detection.

With the reduced cyclic prefix removed, the channel acts on one block as
a cyclic time-domain matrix

    T[n', (n' - l_i) mod MN] += h_i * exp(j*2*pi/(MN) * k_i * (n' - l_i))

(the phase uses the unwrapped index difference).  Conjugating T by the
unitary map U from vectorized DD grid to serial time gives the operator
G = U^H T U so that vec(Y_DD) = G vec(X_DD) for a noiseless, perfectly
timed frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ChannelParamSet
from .params import OtfsParams


@dataclass(frozen=True)
class EffectiveChannel:
    """Dense (MN x MN) DD-domain operator plus the noise variance."""

    operator: np.ndarray
    noise_var: float


_U_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _dd_to_time_matrix(params: OtfsParams) -> np.ndarray:
    """Unitary map U with s = U vec(X_DD): U = conj(F_N) (x) I_M."""
    key = (params.M, params.N)
    if key not in _U_CACHE:
        n = params.N
        f_conj = np.exp(1j * 2 * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
        _U_CACHE[key] = np.kron(f_conj.T, np.eye(params.M))
    return _U_CACHE[key]


def build_effective_channel(
    channel: ChannelParamSet,
    params: OtfsParams,
    noise_var: float,
) -> EffectiveChannel:
    """Assemble G = U^H T U for the given path set."""
    mn = params.block_len
    for path in channel:
        if path.delay > params.L_rcp:
            raise ValueError(
                f"delay tap {path.delay} exceeds the cyclic prefix {params.L_rcp}"
            )
    u = _dd_to_time_matrix(params)
    n_idx = np.arange(mn)
    tu = np.zeros((mn, mn), dtype=np.complex128)
    for path in channel:
        phase = path.gain * np.exp(
            1j * 2 * np.pi / mn * path.doppler * (n_idx - path.delay)
        )
        tu += phase[:, None] * np.roll(u, path.delay, axis=0)
    # U^H applied on the left is a unitary DFT along each column's time
    # axis: reshape rows to (n, l) blocks and transform in one batch.
    g = np.fft.fft(tu.reshape(params.N, params.M, mn), axis=0, norm="ortho").reshape(mn, mn)
    return EffectiveChannel(operator=g, noise_var=float(noise_var))


def lmmse_detect(
    y_vec: np.ndarray,
    ch: EffectiveChannel,
    data_positions: np.ndarray,
    constellation: np.ndarray,
    qam_order: int,
    known_vec: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """LMMSE estimate x = G^H (G G^H + sigma^2 I)^(-1) y, then hard slicing.

    Only the entries at data_positions (flat indices into the vectorized
    grid) are sliced to the nearest constellation point and demapped;
    pilot and guard entries are discarded.

    When known_vec is given (the deterministic pilot/guard content of the
    transmitted grid), its contribution G @ known_vec is cancelled from y
    and the estimate runs over the data columns of G alone.  Without the
    cancellation the unit-power symbol prior misjudges the strong pilot
    row and its residual leaks into the data estimates, which would make
    detection quality depend on pilot power rather than on the channel
    estimate.  Returns (symbols, bits).
    """
    from .modem import qam_demodulate

    g = ch.operator
    y_vec = np.asarray(y_vec, dtype=np.complex128)
    if ch.noise_var <= 0:
        raise ValueError("lmmse_detect needs a positive noise variance")
    if known_vec is not None:
        y_vec = y_vec - g @ np.asarray(known_vec, dtype=np.complex128)
        g = g[:, data_positions]
    gram = g @ g.conj().T
    gram[np.diag_indices_from(gram)] += ch.noise_var
    try:
        w_y = scipy.linalg.solve(gram, y_vec, assume_a="pos")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological inputs
        raise ValueError("effective channel system is numerically singular") from exc
    x_hat = g.conj().T @ w_y
    soft = x_hat if known_vec is not None else x_hat[data_positions]
    dist = np.abs(soft[:, None] - constellation[None, :])
    hard = constellation[np.argmin(dist, axis=1)]
    bits = qam_demodulate(hard, qam_order)
    return hard, bits
