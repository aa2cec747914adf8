"""Full-duplex WiFi study toolkit: SI-cancellation chain model, link budgets,
ergodic-rate comparisons, and a deterministic 802.11 DCF/full-duplex MAC
simulator that reproduces the reference goodput tables.
"""

from fdwifi.analytics import Population, Scenario, improvement_factors, normalized_goodputs
from fdwifi.link_budget import (
    DuplexMode,
    LinkBudget,
    PowerConfig,
    fd_powers,
    free_space_path_loss,
    sinr_chain,
)
from fdwifi.si_chain import (
    CancelMode,
    CancellerCoeffs,
    ChainSample,
    ChannelEstimate,
    FreqChannel,
    SiChainConfig,
    WireChannel,
    analog_coeffs,
    cancellation_db,
    chain_population,
    device_chain_config,
    digital_cancel,
    estimate_channel,
    no_device_chain_config,
    p2p_metric,
    residual_after_analog,
    run_chain,
    synth_si_channel,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
