"""MAC frame formats and 802.11a timing at 18 Mbps.

The reference control-frame timings (RTS 36 us, CTS/ACK 32 us) differ from the
plain symbol-count formula by one OFDM symbol; they are carried as overrides so
reproduction runs use them verbatim while data frames use the formula.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType

US = 1_000  # nanoseconds per microsecond; the engine clock is integer ns

MAX_PAYLOAD_BYTES = 1500  # no segmentation: one packet, one frame

SUPPORTED_RATES_MBPS = (6, 9, 12, 18, 24, 36, 48, 54)

MODULATION_FOR_RATE = {
    6: "bpsk", 9: "bpsk",
    12: "qpsk", 18: "qpsk",
    24: "16qam", 36: "16qam",
    48: "64qam", 54: "64qam",
}

# nominal over-the-air sizes of control frames, for the bit-error model
CONTROL_FRAME_BYTES = {"RTS": 20, "CTS": 14, "ACK": 14}


class FrameKind(enum.Enum):
    RTS = "RTS"
    CTS = "CTS"
    DATA = "DATA"
    FDDATA = "FDDATA"
    ACK = "ACK"


@dataclass(frozen=True)
class PhyParams:
    preamble_us: int = 20
    symbol_us: int = 4
    service_tail_bits: int = 22
    mac_header_bytes: int = 28
    duration_overrides_us: MappingProxyType = field(
        default=MappingProxyType({FrameKind.RTS: 36, FrameKind.CTS: 32, FrameKind.ACK: 32})
    )

    def __post_init__(self):
        for name in ("preamble_us", "symbol_us", "service_tail_bits", "mac_header_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class MacTiming:
    slot_us: int = 9
    sifs_us: int = 16
    difs_us: int = 34
    eifs_us: int = 82  # SIFS + ACK duration + DIFS
    cw_min: int = 15
    cw_max: int = 1023
    short_retry_limit: int = 7
    long_retry_limit: int = 4


def frame_duration(kind: FrameKind, payload_bytes: int, rate_mbps: int, phy: PhyParams) -> int:
    """Airtime of a frame in microseconds.

    Control frames use the override table; data frames take
    ``preamble + symbol * ceil((service+tail + 8*(header+payload)) / bits_per_symbol)``.
    """
    if rate_mbps not in SUPPORTED_RATES_MBPS:
        raise ValueError(f"unsupported rate {rate_mbps} Mbps")
    if kind in phy.duration_overrides_us:
        return phy.duration_overrides_us[kind]
    bits_per_symbol = rate_mbps * phy.symbol_us
    bits = phy.service_tail_bits + 8 * (phy.mac_header_bytes + payload_bytes)
    return phy.preamble_us + phy.symbol_us * math.ceil(bits / bits_per_symbol)


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    src: int
    dst: int
    nav_us: int
    payload_bytes: int
    duration_us: int
    seq: int = 0

    def __post_init__(self):
        if self.duration_us <= 0:
            raise ValueError("duration_us must be positive")
        if self.nav_us < 0:
            raise ValueError("nav_us must be non-negative")
        if not 0 <= self.payload_bytes <= MAX_PAYLOAD_BYTES:
            raise ValueError(f"payload_bytes must be in [0, {MAX_PAYLOAD_BYTES}]")

    @property
    def ber_bytes(self) -> int:
        """Byte count entering the packet-error model."""
        if self.kind in (FrameKind.DATA, FrameKind.FDDATA):
            return self.payload_bytes + 28
        return CONTROL_FRAME_BYTES[self.kind.value]
