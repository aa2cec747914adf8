from fdwifi.mac.engine import (
    Counters,
    DeliveryOutcome,
    MediumOutcome,
    Simulator,
    Transmission,
    bit_error_probability,
    channel_error,
    medium_resolve,
    packet_error_rate,
)
from fdwifi.mac.frames import (
    Frame,
    FrameKind,
    MacTiming,
    PhyParams,
    frame_duration,
)
from fdwifi.mac.metrics import MetricsReport, NodeGoodput, metrics_finalize
from fdwifi.mac.stations import (
    ApTrafficSource,
    NodeKind,
    NodeKindEnum,
    Observation,
    Packet,
    Phase,
    Politeness,
    SaturatedSource,
    Station,
    TxQueue,
    Wait,
    ap_queue_select,
    deference_policy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
