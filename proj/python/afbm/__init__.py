"""Python bindings for the AFBM simulation core."""

import json as _json

from ._core import (  # noqa: F401
    AfbmModem,
    ConfigError,
    FilterKind,
    NumericalError,
    WaveformParams,
    daft_matrix,
    default_c1,
    dft_matrix,
    gabp_detect,
    hard_demap,
    lmmse_detect,
    map_oracle,
    papr_db,
    prototype_filter,
    qpsk_modulate,
)
from . import _core


def _dump(config):
    return config if isinstance(config, str) else _json.dumps(config or {})


def resolved_config(config=None):
    """Fully resolved configuration as a dict."""
    return _json.loads(_core.resolved_config(_dump(config)))


def config_hash(config=None):
    return _core.config_hash(_dump(config))


def run_ber_sweep(config):
    """List of BER rows, one dict per (scheme, filter, P, SNR, detector)."""
    return _core.run_ber_sweep(_dump(config))


def ber_csv(config):
    """Run the sweep and render the CSV, config preamble included."""
    return _core.ber_csv(_dump(config))


def run_loopback(config=None, frames=10):
    return _json.loads(_core.run_loopback(_dump(config), frames))
