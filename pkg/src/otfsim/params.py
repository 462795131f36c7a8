"""OTFS frame geometry and shared grid conventions.

Grids are plain complex ndarrays of shape (M, N): rows indexed by the
delay tap l in [0, M), columns by the Doppler bin k (delay-Doppler
domain) or the time slot n (delay-time domain).  Serial-time signals are
1-D complex ndarrays; one prefixed frame holds L_rcp + M*N samples.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class OtfsParams:
    """Frame geometry: M delay bins, N Doppler bins/time slots per frame.

    N must be a power of two (2**p) so a length N-1 maximum length
    sequence exists for the pilot.  The reduced cyclic prefix spans
    L_rcp samples and must cover the channel delay spread.
    """

    M: int
    N: int
    L_rcp: int
    qam_order: int = 4
    subcarrier_spacing_hz: float = 15e3
    carrier_freq_hz: float = 8e9

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError(f"M must be positive, got {self.M}")
        if self.N < 4 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if not 0 <= self.L_rcp < self.M:
            raise ValueError(f"L_rcp must lie in [0, M), got {self.L_rcp}")
        if self.qam_order not in (4, 16, 64):
            raise ValueError(f"qam_order must be one of 4, 16, 64, got {self.qam_order}")
        if self.subcarrier_spacing_hz <= 0 or self.carrier_freq_hz <= 0:
            raise ValueError("subcarrier_spacing_hz and carrier_freq_hz must be positive")

    @property
    def p(self) -> int:
        """Register length of the matching MLS: N = 2**p."""
        return self.N.bit_length() - 1

    @property
    def block_len(self) -> int:
        """Samples in one OTFS block without the prefix."""
        return self.M * self.N

    @property
    def frame_len(self) -> int:
        """Samples in one RCP-prefixed frame."""
        return self.L_rcp + self.M * self.N

    def doppler_tap_from_speed(self, speed_kmph: float) -> float:
        """Doppler tap (in Doppler-bin units) for a given mobile speed."""
        c = 299_792_458.0
        nu_max = (speed_kmph / 3.6) * self.carrier_freq_hz / c
        doppler_resolution = self.subcarrier_spacing_hz / self.N
        return nu_max / doppler_resolution
