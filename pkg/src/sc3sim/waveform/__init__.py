"""OFDM/AFDM modems, AF-domain channel estimation, equalizers and symbol-level precoding."""

from .equalize import EqualizerError, afdm_mmse_equalize, equalize_onetap
from .estimation import (
    ChannelEstimate,
    EstimatedPath,
    PilotLayout,
    af_pilot_estimate,
    build_af_channel_matrix,
    estimate_to_tf,
    ls_tf_estimate,
    track_doppler,
)
from .modem import (
    AfdmParams,
    ModemConfig,
    afdm_demodulate,
    afdm_modulate,
    daft_matrix,
    ofdm_demodulate,
    ofdm_modulate,
    qpsk_demap,
    qpsk_map,
)
from .precoding import Precoded, slp_precode

__all__ = [
    "AfdmParams",
    "ChannelEstimate",
    "EqualizerError",
    "EstimatedPath",
    "ModemConfig",
    "PilotLayout",
    "Precoded",
    "af_pilot_estimate",
    "afdm_demodulate",
    "afdm_mmse_equalize",
    "afdm_modulate",
    "build_af_channel_matrix",
    "daft_matrix",
    "equalize_onetap",
    "estimate_to_tf",
    "ls_tf_estimate",
    "ofdm_demodulate",
    "ofdm_modulate",
    "qpsk_demap",
    "qpsk_map",
    "slp_precode",
    "track_doppler",
]
