"""Transmit-power normalization, free-space path loss, and SNR/INR/SINR arithmetic.

Powers are carried in dBm and converted to linear milliwatts only inside each
computation.  ``float('-inf')`` dBm is the sentinel for a silent transmitter and
``float('inf')`` dB for perfect cancellation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

SPEED_OF_LIGHT_M_S = 299_792_458.0

_REL_TOL = 1e-9


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0.0:
        raise ValueError(f"linear power must be positive, got {value}")
    return 10.0 * math.log10(value)


class DuplexMode(enum.Enum):
    HALF_DUPLEX = "half_duplex"
    FULL_DUPLEX = "full_duplex"


@dataclass(frozen=True)
class PowerConfig:
    """Half-duplex node powers, the duplex time split, and the network cap."""

    p_hd_node1_dbm: float
    p_hd_node2_dbm: float
    beta: float
    pi_cap_dbm: float

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        for name in ("p_hd_node1_dbm", "p_hd_node2_dbm"):
            p = getattr(self, name)
            if p > self.pi_cap_dbm + _REL_TOL:
                raise ValueError(f"{name}={p} dBm exceeds network cap {self.pi_cap_dbm} dBm")


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float
    path_loss_db: float
    noise_floor_dbm: float
    total_cancellation_db: float

    def __post_init__(self):
        if self.path_loss_db < 0.0:
            raise ValueError(f"path_loss_db must be >= 0, got {self.path_loss_db}")
        if self.total_cancellation_db < 0.0:
            raise ValueError(f"total_cancellation_db must be >= 0, got {self.total_cancellation_db}")


def fd_powers(cfg: PowerConfig) -> tuple[float, float]:
    """Full-duplex transmit powers that radiate the same per-node energy as half-duplex.

    Node 1 transmits for the whole slot instead of a fraction ``beta`` of it, so
    its power drops by ``10*log10(beta)``; node 2 by ``10*log10(1-beta)``.  The
    summed linear powers must stay below the instantaneous network cap.
    """
    p1_fd = cfg.p_hd_node1_dbm + 10.0 * math.log10(cfg.beta)
    if cfg.beta == 1.0:
        p2_fd = float("-inf")  # node 2 never transmits
    else:
        p2_fd = cfg.p_hd_node2_dbm + 10.0 * math.log10(1.0 - cfg.beta)

    total_mw = db_to_linear(p1_fd) + (0.0 if math.isinf(p2_fd) else db_to_linear(p2_fd))
    cap_mw = db_to_linear(cfg.pi_cap_dbm)
    if total_mw > cap_mw * (1.0 + _REL_TOL):
        raise ValueError(
            f"summed FD power {10 * math.log10(total_mw):.3f} dBm exceeds cap {cfg.pi_cap_dbm} dBm"
        )
    return p1_fd, p2_fd


def free_space_path_loss(distance_m: float, freq_hz: float) -> float:
    """Free-space path loss in dB: 20*log10(4*pi*d*f/c)."""
    if distance_m <= 0.0:
        raise ValueError(f"distance_m must be positive, got {distance_m}")
    if freq_hz <= 0.0:
        raise ValueError(f"freq_hz must be positive, got {freq_hz}")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * freq_hz / SPEED_OF_LIGHT_M_S)


def sinr_chain(budget: LinkBudget, mode: DuplexMode) -> float:
    """Received SINR in dB, treating residual self-interference as noise.

    Half-duplex sees only the thermal floor.  Full-duplex adds the node's own
    transmission attenuated by the total cancellation of its chain.
    """
    signal_dbm = budget.tx_power_dbm - budget.path_loss_db
    if mode is DuplexMode.HALF_DUPLEX:
        return signal_dbm - budget.noise_floor_dbm
    interference_dbm = budget.tx_power_dbm - budget.total_cancellation_db
    floor_mw = db_to_linear(interference_dbm) + db_to_linear(budget.noise_floor_dbm)
    return signal_dbm - 10.0 * math.log10(floor_mw)
