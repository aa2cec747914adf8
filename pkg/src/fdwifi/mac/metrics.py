"""Goodput and collision accounting for finished simulation runs."""

from __future__ import annotations

from dataclasses import dataclass, field

from fdwifi.mac.engine import Counters
from fdwifi.mac.stations import NodeKindEnum, Station


@dataclass(frozen=True)
class NodeGoodput:
    sid: int
    kind: str
    uplink_mbps: float
    downlink_mbps: float


@dataclass(frozen=True)
class MetricsReport:
    """Per-run summary; all goodputs in Mbps of delivered MAC payload."""

    sim_time_s: float
    seed: int
    per_node: tuple
    sum_goodput_mbps: float
    dl_hd_mbps: float  # class averages, 0.0 where a class is absent
    dl_fd_mbps: float
    ul_fd_mbps: float
    ul_hd_mbps: float
    rts_collision_pct: float
    data_collision_pct: float
    rts_pct_valid: bool
    data_pct_valid: bool
    drops: int
    event_count: int
    config_echo: tuple  # sorted (key, value) pairs of the effective config


def metrics_finalize(
    counters: Counters,
    stations: list[Station],
    ap_id: int,
    sim_time_s: float,
    seed: int,
    config_echo: dict,
) -> MetricsReport:
    """Reduce raw counters to goodputs, class averages and collision percentages.

    The RTS collision percentage is failed RTS transmissions (including
    retransmissions) over all RTS transmissions, times 100; the data percentage
    is the same ratio for data frames.  With a zero denominator the percentage
    is reported as 0 and flagged invalid.
    """
    mbps = lambda bits: bits / sim_time_s / 1e6
    rows = []
    by_class: dict[str, list[tuple[float, float]]] = {}
    for s in sorted(stations, key=lambda s: s.sid):
        if s.node_kind.kind is NodeKindEnum.ACCESS_POINT:
            continue
        ul = mbps(counters.delivered_bits.get((s.sid, ap_id), 0))
        dl = mbps(counters.delivered_bits.get((ap_id, s.sid), 0))
        rows.append(NodeGoodput(s.sid, s.node_kind.kind.value, ul, dl))
        cls = "fd" if s.node_kind.kind is NodeKindEnum.FD_STATION else "hd"
        by_class.setdefault(cls, []).append((ul, dl))

    def class_avg(cls: str, idx: int) -> float:
        vals = by_class.get(cls)
        if not vals:
            return 0.0
        return sum(v[idx] for v in vals) / len(vals)

    total = mbps(sum(counters.delivered_bits.values()))
    rts_valid = counters.rts_sent > 0
    data_valid = counters.data_sent > 0
    return MetricsReport(
        sim_time_s=sim_time_s,
        seed=seed,
        per_node=tuple(rows),
        sum_goodput_mbps=total,
        dl_hd_mbps=class_avg("hd", 1),
        dl_fd_mbps=class_avg("fd", 1),
        ul_fd_mbps=class_avg("fd", 0),
        ul_hd_mbps=class_avg("hd", 0),
        rts_collision_pct=100.0 * counters.rts_failed / counters.rts_sent if rts_valid else 0.0,
        data_collision_pct=100.0 * counters.data_failed / counters.data_sent if data_valid else 0.0,
        rts_pct_valid=rts_valid,
        data_pct_valid=data_valid,
        drops=counters.drops,
        event_count=counters.events,
        config_echo=tuple(sorted(config_echo.items())),
    )
