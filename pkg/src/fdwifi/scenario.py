"""Scenario configuration, validation, and the config-to-simulator runner.

Configs are flat dotted-key documents (``key = value`` lines, ``#`` comments);
unspecified keys take the reference defaults (QPSK 18 Mbps, 14 m link, 85 dB
cancellation, 10 s of simulated time, full-buffer traffic).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, fields, replace

import numpy as np

from fdwifi.link_budget import DuplexMode, LinkBudget, free_space_path_loss, sinr_chain
from fdwifi.mac.engine import Simulator
from fdwifi.mac.frames import MODULATION_FOR_RATE, SUPPORTED_RATES_MBPS, MacTiming, PhyParams
from fdwifi.mac.metrics import MetricsReport, metrics_finalize
from fdwifi.mac.stations import (
    ApTrafficSource,
    NodeKind,
    NodeKindEnum,
    Politeness,
    SaturatedSource,
    Station,
)
from fdwifi.si_chain import SiChainConfig, chain_population, device_chain_config

AP_ID = 0


@dataclass(frozen=True)
class ScenarioConfig:
    n_fd: int = 1
    n_hd_legacy: int = 0
    n_hd_modified: int = 0
    politeness: str = "standard"  # standard | polite_eifs, applied to FD-capable nodes
    tx_power_dbm: float = 9.0
    distance_m: float = 14.0
    freq_hz: float = 2.4e9
    noise_floor_dbm: float = -90.0
    total_cancellation_db: float = 85.0
    cancellation_draw: bool = False  # per-packet draw from the calibrated chain
    rate_mbps: int = 18
    uplink_bytes: int = 1500
    downlink_bytes: int = 1500
    rts_cts: bool = True
    sim_time_s: float = 10.0
    seed: int = 1
    buffer_kb: int = 25600
    access_mode: str = "contention"  # contention | scheduled (analysis harness)
    rssi_override_dbm: float | None = None

    @property
    def n_stations(self) -> int:
        return self.n_fd + self.n_hd_legacy + self.n_hd_modified

    @property
    def modulation(self) -> str:
        return MODULATION_FOR_RATE[self.rate_mbps]

    def validate(self) -> "ScenarioConfig":
        checks = [
            ("nodes.fd", self.n_fd >= 0),
            ("nodes.hd_legacy", self.n_hd_legacy >= 0),
            ("nodes.hd_modified", self.n_hd_modified >= 0),
            ("politeness", self.politeness in ("standard", "polite_eifs")),
            ("distance_m", self.distance_m > 0),
            ("freq_hz", self.freq_hz > 0),
            ("cancellation_db", self.total_cancellation_db >= 0),
            ("rate_mbps", self.rate_mbps in SUPPORTED_RATES_MBPS),
            ("uplink_bytes", 0 <= self.uplink_bytes <= 1500),
            ("downlink_bytes", 0 <= self.downlink_bytes <= 1500),
            ("sim_time_s", self.sim_time_s > 0),
            ("buffer_kb", self.buffer_kb > 0),
            ("access_mode", self.access_mode in ("contention", "scheduled")),
        ]
        for key, ok in checks:
            if not ok:
                raise ValueError(f"config value out of range: {key}")
        if not self.rts_cts and self.n_fd > 0:
            raise ValueError("config value out of range: rts_cts "
                             "(full-duplex discovery requires RTS/CTS)")
        return self


_KEY_MAP = {
    "nodes.fd": ("n_fd", int),
    "nodes.hd_legacy": ("n_hd_legacy", int),
    "nodes.hd_modified": ("n_hd_modified", int),
    "politeness": ("politeness", str),
    "tx_power_dbm": ("tx_power_dbm", float),
    "distance_m": ("distance_m", float),
    "freq_hz": ("freq_hz", float),
    "noise_floor_dbm": ("noise_floor_dbm", float),
    "cancellation_db": ("total_cancellation_db", float),
    "cancellation_draw": ("cancellation_draw", None),
    "rate_mbps": ("rate_mbps", int),
    "uplink_bytes": ("uplink_bytes", int),
    "downlink_bytes": ("downlink_bytes", int),
    "rts_cts": ("rts_cts", None),
    "sim_time_s": ("sim_time_s", float),
    "seed": ("seed", int),
    "buffer_kb": ("buffer_kb", int),
    "access_mode": ("access_mode", str),
    "rssi_override_dbm": ("rssi_override_dbm", float),
}


def _parse_bool(key: str, raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"invalid boolean for {key}: {raw!r}")


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse a flat ``key = value`` document into a validated config."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _KEY_MAP:
            raise ValueError(f"unknown config key: {key}")
        attr, conv = _KEY_MAP[key]
        try:
            values[attr] = _parse_bool(key, raw) if conv is None else conv(raw)
        except ValueError as exc:
            raise ValueError(f"invalid value for {key}: {raw!r}") from exc
    return ScenarioConfig(**values).validate()


def config_echo(cfg: ScenarioConfig) -> dict:
    """Flat dotted-key mapping of the full effective config (emit/parse stable)."""
    inverse = {attr: key for key, (attr, _) in _KEY_MAP.items()}
    echo = {}
    for f in fields(cfg):
        if f.name in inverse:
            val = getattr(cfg, f.name)
            if val is not None:
                echo[inverse[f.name]] = val
    return echo


def build_stations(cfg: ScenarioConfig, rng: random.Random,
                   timing: MacTiming, phy: PhyParams) -> list[Station]:
    polite = Politeness.POLITE_EIFS if cfg.politeness == "polite_eifs" else Politeness.STANDARD
    ap_fd = cfg.n_fd > 0
    kinds: dict[int, NodeKind] = {
        AP_ID: NodeKind(NodeKindEnum.ACCESS_POINT, polite if ap_fd else Politeness.STANDARD,
                        fd_capable=ap_fd)
    }
    sid = AP_ID + 1
    for _ in range(cfg.n_fd):
        kinds[sid] = NodeKind(NodeKindEnum.FD_STATION, polite, fd_capable=True)
        sid += 1
    for _ in range(cfg.n_hd_modified):
        kinds[sid] = NodeKind(NodeKindEnum.HD_MODIFIED_STATION, Politeness.STANDARD)
        sid += 1
    for _ in range(cfg.n_hd_legacy):
        kinds[sid] = NodeKind(NodeKindEnum.HD_LEGACY_STATION, Politeness.STANDARD)
        sid += 1

    capabilities = {s: k.fd_capable for s, k in kinds.items()}
    station_ids = [s for s in kinds if s != AP_ID]
    stations = []
    for s, kind in kinds.items():
        if s == AP_ID:
            queue = ApTrafficSource(station_ids, cfg.downlink_bytes,
                                    cfg.buffer_kb * 1024, rng)
        else:
            queue = SaturatedSource(AP_ID, cfg.uplink_bytes)
        stations.append(Station(s, kind, queue, rng, timing, phy,
                                cfg.rate_mbps, cfg.rts_cts, capabilities))
    return stations


def link_budget_for(cfg: ScenarioConfig) -> LinkBudget:
    if cfg.rssi_override_dbm is not None:
        path_loss = cfg.tx_power_dbm - cfg.rssi_override_dbm
    else:
        path_loss = free_space_path_loss(cfg.distance_m, cfg.freq_hz)
    return LinkBudget(
        tx_power_dbm=cfg.tx_power_dbm,
        path_loss_db=path_loss,
        noise_floor_dbm=cfg.noise_floor_dbm,
        total_cancellation_db=cfg.total_cancellation_db,
    )


def _fd_sinr_source(cfg: ScenarioConfig, budget: LinkBudget):
    if not cfg.cancellation_draw:
        return sinr_chain(budget, DuplexMode.FULL_DUPLEX)
    pool_cfg = device_chain_config(pilot_snr_db=cfg.total_cancellation_db, seed=cfg.seed)
    samples = [s.total_db for s in chain_population(pool_cfg, 1024)]
    sinrs = [
        sinr_chain(replace(budget, total_cancellation_db=max(c, 0.0)), DuplexMode.FULL_DUPLEX)
        for c in samples
    ]
    state = {"i": 0}

    def draw() -> float:
        state["i"] = (state["i"] + 1) % len(sinrs)
        return sinrs[state["i"]]

    return draw


def run_scenario(cfg: ScenarioConfig) -> MetricsReport:
    """Build the engine from a config, run it, and finalize the metrics.

    Bit-for-bit reproducible for identical (config, seed).
    """
    cfg.validate()
    rng = random.Random(cfg.seed)
    timing = MacTiming()
    phy = PhyParams()
    stations = build_stations(cfg, rng, timing, phy)
    budget = link_budget_for(cfg)
    sim = Simulator(
        stations,
        timing,
        rng,
        hd_sinr_db=sinr_chain(budget, DuplexMode.HALF_DUPLEX),
        fd_sinr_db=_fd_sinr_source(cfg, budget),
        modulation=cfg.modulation,
        rate_mbps=cfg.rate_mbps,
        access_mode=cfg.access_mode,
    )
    counters = sim.run(int(cfg.sim_time_s * 1e6))
    return metrics_finalize(counters, stations, AP_ID, cfg.sim_time_s, cfg.seed,
                            config_echo(cfg))
