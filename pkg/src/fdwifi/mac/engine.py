"""Deterministic discrete-event core: virtual clock, event queue, shared-medium
collision model, and the contention countdown arithmetic.

The clock is integer nanoseconds.  Backoff countdowns are not simulated slot by
slot; instead the engine computes each contender's transmit instant from the
current idle period and charges elapsed whole slots whenever the medium turns
busy, which is exactly equivalent and keeps the event count per exchange small.
Events pop in nondecreasing time, ties broken by (node id, insertion sequence).
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field

from fdwifi.mac.frames import US, Frame, FrameKind, MacTiming, PhyParams
from fdwifi.mac.stations import (
    CancelTimer,
    DeliverData,
    DropPacket,
    FrameRx,
    GarbageEnd,
    Grant,
    SendAfter,
    SetTimer,
    Station,
    TimerFired,
    TxDone,
)


class MediumOutcome(enum.Enum):
    CLEAN = "clean"
    COLLIDED = "collided"
    SELF_DECODABLE = "self_decodable"


class DeliveryOutcome(enum.Enum):
    DELIVERED = "delivered"
    CORRUPTED = "corrupted"


# -- bit/packet error model ---------------------------------------------------

_BANDWIDTH_HZ = 20e6


def _q_function(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def bit_error_probability(sinr_db: float, modulation: str, rate_mbps: int) -> float:
    """Uncoded bit-error probability with self-interference treated as noise.

    The SNR-per-bit is the linear SINR scaled by bandwidth over bit rate
    (20 MHz / rate); QPSK and BPSK use the exact Q-function expression, the
    QAM constellations the standard nearest-neighbour approximation.
    """
    if math.isinf(sinr_db) and sinr_db < 0:
        return 0.5
    gamma_b = 10.0 ** (sinr_db / 10.0) * (_BANDWIDTH_HZ / (rate_mbps * 1e6))
    if modulation in ("bpsk", "qpsk"):
        return _q_function(math.sqrt(2.0 * gamma_b))
    if modulation in ("16qam", "64qam"):
        m = 16 if modulation == "16qam" else 64
        k = int(math.log2(m))
        coef = 4.0 / k * (1.0 - 1.0 / math.sqrt(m))
        return min(0.5, coef * _q_function(math.sqrt(3.0 * k * gamma_b / (m - 1))))
    raise ValueError(f"unsupported modulation {modulation!r}")


def packet_error_rate(sinr_db: float, total_bytes: int, modulation: str, rate_mbps: int) -> float:
    p = bit_error_probability(sinr_db, modulation, rate_mbps)
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    return -math.expm1(8 * total_bytes * math.log1p(-p))


def channel_error(frame: Frame, sinr_db: float, modulation: str, rng,
                  rate_mbps: int = 18) -> DeliveryOutcome:
    """Bernoulli delivery draw for one cleanly received frame."""
    per = packet_error_rate(sinr_db, frame.ber_bytes, modulation, rate_mbps)
    if rng.random() >= per:
        return DeliveryOutcome.DELIVERED
    return DeliveryOutcome.CORRUPTED


# -- medium model ----------------------------------------------------------------


@dataclass
class Transmission:
    frame: Frame
    src: int
    start_ns: int
    end_ns: int
    overlaps: list = field(default_factory=list)  # other Transmission objects


def medium_resolve(transmissions, receiver: int, fd_decodable=None) -> dict[int, MediumOutcome]:
    """Classify every frame at one receiver from the transmission intervals.

    Any two temporally overlapping incoming frames destroy each other, except
    that a node which is itself transmitting may still decode exactly one
    incoming frame for which ``fd_decodable(frame)`` holds (its full-duplex
    partner inside an established handshake).  Keys of the result are indices
    into ``transmissions``.
    """
    fd_decodable = fd_decodable or (lambda frame: False)
    outcomes: dict[int, MediumOutcome] = {}
    fd_budget = 1
    for i, tx in enumerate(transmissions):
        if tx.src == receiver:
            continue
        interferers = [
            o for o in transmissions
            if o is not tx and o.src not in (receiver, tx.src)
            and o.start_ns < tx.end_ns and tx.start_ns < o.end_ns
        ]
        self_tx = any(
            o.src == receiver and o.start_ns < tx.end_ns and tx.start_ns < o.end_ns
            for o in transmissions
        )
        if interferers:
            outcomes[i] = MediumOutcome.COLLIDED
        elif self_tx:
            if fd_budget > 0 and fd_decodable(tx.frame):
                outcomes[i] = MediumOutcome.SELF_DECODABLE
                fd_budget -= 1
            else:
                outcomes[i] = MediumOutcome.COLLIDED
        else:
            outcomes[i] = MediumOutcome.CLEAN
    return outcomes


# -- counters ---------------------------------------------------------------------


@dataclass
class Counters:
    delivered_bits: dict = field(default_factory=dict)  # (src, dst) -> bits
    rts_sent: int = 0
    rts_failed: int = 0
    data_sent: int = 0
    data_failed: int = 0
    drops: int = 0
    events: int = 0


# -- the simulator ------------------------------------------------------------------

_EV_TX_START, _EV_TX_END, _EV_TIMER, _EV_CONTENTION = 0, 1, 2, 3


class Simulator:
    """Single-threaded event loop over a set of registered stations."""

    def __init__(self, stations: list[Station], timing: MacTiming, rng,
                 hd_sinr_db: float, fd_sinr_db, modulation: str, rate_mbps: int,
                 access_mode: str = "contention"):
        if access_mode not in ("contention", "scheduled"):
            raise ValueError(f"unknown access mode {access_mode!r}")
        self.stations = {s.sid: s for s in stations}
        self.order = sorted(self.stations)
        self.timing = timing
        self.rng = rng
        self.hd_sinr_db = hd_sinr_db
        self.fd_sinr_db = fd_sinr_db  # float or zero-arg callable (per-packet draw)
        self.modulation = modulation
        self.rate_mbps = rate_mbps
        self.access_mode = access_mode

        self.now = 0
        self._heap: list = []
        self._push_seq = 0
        self.active: list[Transmission] = []
        self.idle_since = 0
        self.garbage: set[int] = set()
        self._timer_gen: dict[tuple[int, str], int] = {}
        self._contention_gen = 0
        self._token = 0
        self.counters = Counters()
        self._per_cache: dict[tuple[float, int], float] = {}

    # -- event queue -----------------------------------------------------------

    def _push(self, at_ns: int, node: int, code: int, payload) -> None:
        if at_ns < self.now:
            raise RuntimeError(f"event scheduled in the past: {at_ns} < {self.now}")
        self._push_seq += 1
        heapq.heappush(self._heap, (at_ns, node, self._push_seq, code, payload))

    # -- public entry ------------------------------------------------------------

    def run(self, until_us: int) -> Counters:
        if until_us <= 0:
            raise ValueError("until_us must be positive")
        until_ns = until_us * US
        for sid in self.order:
            self.stations[sid].start(0)
        self._recompute_contention()
        while self._heap and self._heap[0][0] <= until_ns:
            at, node, _, code, payload = heapq.heappop(self._heap)
            self.now = at
            self.counters.events += 1
            if code == _EV_TX_START:
                self._handle_tx_start(payload)
            elif code == _EV_TX_END:
                self._handle_tx_end(payload)
            elif code == _EV_TIMER:
                self._handle_timer(node, payload)
            elif code == _EV_CONTENTION:
                self._handle_contention(payload)
        self.now = until_ns
        return self.counters

    # -- station action plumbing ----------------------------------------------------

    def _dispatch(self, sid: int, inp) -> None:
        actions = self.stations[sid].step(inp)
        for act in actions:
            if isinstance(act, SendAfter):
                self._push(self.now + act.gap_us * US, sid, _EV_TX_START, (act.frame, sid))
            elif isinstance(act, SetTimer):
                key = (sid, act.tag)
                gen = self._timer_gen.get(key, 0) + 1
                self._timer_gen[key] = gen
                self._push(act.at_ns, sid, _EV_TIMER, (act.tag, gen))
            elif isinstance(act, CancelTimer):
                key = (sid, act.tag)
                self._timer_gen[key] = self._timer_gen.get(key, 0) + 1
            elif isinstance(act, DeliverData):
                f = act.frame
                key = (f.src, f.dst)
                self.counters.delivered_bits[key] = (
                    self.counters.delivered_bits.get(key, 0) + 8 * f.payload_bytes
                )
            elif isinstance(act, DropPacket):
                self.counters.drops += 1
            else:
                raise TypeError(f"unknown action {act!r}")

    # -- medium events -----------------------------------------------------------------

    def _handle_tx_start(self, payload) -> None:
        frame, src = payload
        if not self.active:
            self._charge_backoffs(self.now)
            self.garbage.clear()
        tx = Transmission(frame, src, self.now, self.now + frame.duration_us * US)
        for other in self.active:
            other.overlaps.append(tx)
            tx.overlaps.append(other)
        self.active.append(tx)
        self._push(tx.end_ns, src, _EV_TX_END, tx)

    def _fd_decodable(self, listener: Station, frame: Frame) -> bool:
        ex = listener.exch
        return (
            listener.fd_capable
            and ex is not None
            and ex.peer == frame.src
            and self.now <= ex.nav_end_ns
        )

    def _sinr_for(self, self_tx: bool) -> float:
        if not self_tx:
            return self.hd_sinr_db
        return self.fd_sinr_db() if callable(self.fd_sinr_db) else self.fd_sinr_db

    def _handle_tx_end(self, tx: Transmission) -> None:
        self.active.remove(tx)
        frame = tx.frame
        dst_ok = False
        for sid in self.order:
            if sid == tx.src:
                continue
            listener = self.stations[sid]
            interferers = [o for o in tx.overlaps if o.src != sid]
            self_tx = any(o.src == sid for o in tx.overlaps)
            if interferers:
                if not self_tx:
                    self.garbage.add(sid)  # erroneous reception
                continue
            if self_tx and not self._fd_decodable(listener, frame):
                continue  # own transmission drowns the frame; nothing was "received"
            sinr_db = self._sinr_for(self_tx)
            outcome = self._delivery_draw(frame, sinr_db)
            if outcome is DeliveryOutcome.DELIVERED:
                if sid == frame.dst:
                    dst_ok = True
                self._dispatch(sid, FrameRx(frame, self.now))
            else:
                self.garbage.add(sid)

        if frame.kind is FrameKind.RTS:
            self.counters.rts_sent += 1
            if not dst_ok:
                self.counters.rts_failed += 1
        elif frame.kind in (FrameKind.DATA, FrameKind.FDDATA):
            self.counters.data_sent += 1
            if not dst_ok:
                self.counters.data_failed += 1

        self._dispatch(tx.src, TxDone(frame, self.now))

        if not self.active:
            self.idle_since = self.now
            for sid in self.order:
                if sid in self.garbage:
                    self._dispatch(sid, GarbageEnd(self.now))
            self.garbage.clear()
            self._recompute_contention()

    def _delivery_draw(self, frame: Frame, sinr_db: float) -> DeliveryOutcome:
        key = (sinr_db, frame.ber_bytes)
        per = self._per_cache.get(key)
        if per is None:
            per = packet_error_rate(sinr_db, frame.ber_bytes, self.modulation, self.rate_mbps)
            self._per_cache[key] = per
        if per == 0.0:
            return DeliveryOutcome.DELIVERED
        return DeliveryOutcome.DELIVERED if self.rng.random() >= per else DeliveryOutcome.CORRUPTED

    def _handle_timer(self, sid: int, payload) -> None:
        tag, gen = payload
        if self._timer_gen.get((sid, tag)) != gen:
            return
        self._dispatch(sid, TimerFired(tag, self.now))
        if not self.active:
            self._recompute_contention()

    # -- contention arithmetic ------------------------------------------------------------

    def _eligible_start(self, s: Station) -> int:
        """Start of this contender's countdown in the current idle period.

        Slot boundaries run from the end of each station's own deferral, so
        nodes deferring EIFS sit on a grid offset from the DIFS crowd.
        """
        return max(self.idle_since, s.nav_until_ns, s.ready_at_ns) + s.ifs_ns

    def _tx_instant(self, s: Station) -> int:
        slots = 0 if self.access_mode == "scheduled" else s.backoff_slots
        return self._eligible_start(s) + slots * self.timing.slot_us * US

    def _contenders(self) -> list[Station]:
        out = [self.stations[sid] for sid in self.order if self.stations[sid].contending]
        if self.access_mode == "scheduled" and out:
            holder = self.order[self._token % len(self.order)]
            out = [s for s in out if s.sid == holder]
        return out

    def _charge_backoffs(self, t: int) -> None:
        """Consume the whole idle slots elapsed before the medium turned busy."""
        if self.access_mode == "scheduled":
            return
        slot_ns = self.timing.slot_us * US
        for sid in self.order:
            s = self.stations[sid]
            if not s.contending:
                continue
            elapsed = (t - self._eligible_start(s)) // slot_ns
            if elapsed > 0:
                s.backoff_slots = max(0, s.backoff_slots - int(elapsed))

    def _recompute_contention(self) -> None:
        if self.active:
            return
        contenders = self._contenders()
        if not contenders:
            return
        fire = min(self._tx_instant(s) for s in contenders)
        fire = max(fire, self.now)
        self._contention_gen += 1
        self._push(fire, -1, _EV_CONTENTION, self._contention_gen)

    def _handle_contention(self, gen: int) -> None:
        if gen != self._contention_gen or self.active:
            return
        winners = [s for s in self._contenders() if self._tx_instant(s) <= self.now]
        if not winners:
            self._recompute_contention()
            return
        if self.access_mode == "scheduled":
            self._token += 1
        for s in winners:
            self._dispatch(s.sid, Grant(self.now))
