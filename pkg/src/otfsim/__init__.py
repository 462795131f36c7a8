"""OTFS baseband simulation: modem, doubly-selective channel, MLS-pilot
joint timing synchronization and channel estimation, an impulse-pilot
baseline, LMMSE detection, and a seeded Monte Carlo experiment harness.
"""

from .channel import (
    ChannelParamSet,
    ChannelPath,
    ReceivedFrame,
    add_awgn,
    apply_channel,
    decompose_theta,
    dt_io_oracle,
    gen_random_channel,
    insert_timing_offset,
)
from .detector import EffectiveChannel, build_effective_channel, lmmse_detect
from .epa import EpaConfig, default_epa_config, epa_embed, epa_estimate, pilot_symbol_snr_db
from .modem import (
    add_rcp,
    dd_to_dt,
    deserialize,
    dt_to_dd,
    qam_constellation,
    qam_demodulate,
    qam_modulate,
    remove_rcp,
    serialize,
)
from .params import OtfsParams
from .pilot import (
    MlsConfig,
    MlsSequence,
    data_capacity,
    embed_pilot,
    extract_data,
    extract_data_positions,
    gen_mls,
    make_mls,
    mls_power_for_snr,
    scale_and_pad,
)
from .sync import (
    CorrelationRow,
    SyncConfig,
    SyncFailure,
    SyncResult,
    correlate_row,
    default_threshold,
    estimate_doppler,
    estimate_gain,
    metric_trace,
    run_jtsce,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
