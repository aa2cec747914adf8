"""Per-node MAC state machines: legacy DCF, the full-duplex variant, and the
coexistence flavors (modified-HD and polite-EIFS).

Stations are pure transition machines: the engine feeds them inputs (frame
receptions, timer fires, transmission grants) and they answer with actions
(frames to send after a gap, timers to arm, packets to drop).  All contention
countdown arithmetic lives in the engine; a station only publishes its
readiness, its deferral spacing (DIFS or EIFS) and its remaining backoff slots.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from fdwifi.mac.frames import US, Frame, FrameKind, MacTiming, PhyParams, frame_duration


class NodeKindEnum(enum.Enum):
    ACCESS_POINT = "access_point"
    FD_STATION = "fd_station"
    HD_LEGACY_STATION = "hd_legacy_station"
    HD_MODIFIED_STATION = "hd_modified_station"


class Politeness(enum.Enum):
    STANDARD = "standard"
    POLITE_EIFS = "polite_eifs"


@dataclass(frozen=True)
class NodeKind:
    kind: NodeKindEnum
    politeness: Politeness = Politeness.STANDARD
    fd_capable: bool = False


class Phase(enum.Enum):
    IDLE = "idle"
    DEFERRING = "deferring"
    BACKOFF = "backoff"
    TX_RTS = "tx_rts"
    AWAIT_CTS = "await_cts"
    TX_DATA = "tx_data"
    AWAIT_ACK = "await_ack"
    TX_CTS = "tx_cts"
    TX_FDDATA = "tx_fddata"
    TX_ACK = "tx_ack"
    RECEIVING = "receiving"


class Wait(enum.Enum):
    DIFS = "difs"
    EIFS = "eifs"


class Observation(enum.Enum):
    CLEAN_FRAME_END = "clean_frame_end"
    ERRONEOUS_FRAME_END = "erroneous_frame_end"
    FD_EXCHANGE_END = "fd_exchange_end"
    OWN_ACK_RECEIVED = "own_ack_received"


def deference_policy(
    node_kind: NodeKind,
    observation: Observation,
    *,
    cts_nav_active: bool = False,
    fd_exchange: bool = False,
) -> Wait:
    """Deferral spacing to use for the next contention after an observation.

    Legacy nodes answer every erroneous reception with EIFS.  FD-capable and
    modified-HD nodes under the standard strategy ignore erroneous frames that
    fall inside a NAV they learned from a decoded CTS.  Under the polite
    strategy every FD exchange ends with EIFS for everyone, including the two
    participants after their own ACK.
    """
    if observation is Observation.CLEAN_FRAME_END:
        return Wait.DIFS
    if observation is Observation.ERRONEOUS_FRAME_END:
        if node_kind.kind is NodeKindEnum.HD_LEGACY_STATION:
            return Wait.EIFS
        if node_kind.politeness is Politeness.POLITE_EIFS:
            return Wait.EIFS
        return Wait.DIFS if cts_nav_active else Wait.EIFS
    if observation in (Observation.FD_EXCHANGE_END, Observation.OWN_ACK_RECEIVED):
        if node_kind.politeness is Politeness.POLITE_EIFS and fd_exchange:
            return Wait.EIFS
        return Wait.DIFS
    raise ValueError(f"unknown observation {observation}")


# --------------------------------------------------------------------------
# queues


@dataclass(frozen=True)
class Packet:
    dst: int
    payload_bytes: int
    seq: int


class TxQueue:
    """Single FIFO with per-destination promotion and lazy index cleanup.

    ``pop_first_for`` removes the earliest packet for one destination even from
    the middle of the queue; FIFO order of everything else is preserved.
    """

    def __init__(self, capacity_bytes: int = 25600 * 1024):
        self.capacity_bytes = capacity_bytes
        self._live: dict[int, Packet] = {}
        self._order: list[int] = []  # deque semantics via index pointer
        self._head_idx = 0
        self._per_dest: dict[int, list[int]] = {}
        self._per_dest_idx: dict[int, int] = {}
        self._reinserted: list[Packet] = []
        self.total_bytes = 0

    def __len__(self) -> int:
        return len(self._live) + len(self._reinserted)

    def append(self, pkt: Packet) -> bool:
        if self.total_bytes + pkt.payload_bytes > self.capacity_bytes:
            return False
        self._live[pkt.seq] = pkt
        self._order.append(pkt.seq)
        self._per_dest.setdefault(pkt.dst, []).append(pkt.seq)
        self.total_bytes += pkt.payload_bytes
        return True

    def reinsert(self, pkt: Packet):
        """Return a popped packet to the front (retry path)."""
        self._reinserted.append(pkt)
        self.total_bytes += pkt.payload_bytes

    def _take(self, pkt: Packet) -> Packet:
        self.total_bytes -= pkt.payload_bytes
        return pkt

    def pop_head(self) -> Optional[Packet]:
        if self._reinserted:
            return self._take(self._reinserted.pop())
        while self._head_idx < len(self._order):
            seq = self._order[self._head_idx]
            self._head_idx += 1
            pkt = self._live.pop(seq, None)
            if pkt is not None:
                return self._take(pkt)
        return None

    def pop_first_for(self, dst: int) -> Optional[Packet]:
        for i, pkt in enumerate(self._reinserted):
            if pkt.dst == dst:
                return self._take(self._reinserted.pop(i))
        lst = self._per_dest.get(dst)
        if not lst:
            return None
        idx = self._per_dest_idx.get(dst, 0)
        while idx < len(lst):
            seq = lst[idx]
            idx += 1
            pkt = self._live.pop(seq, None)
            if pkt is not None:
                self._per_dest_idx[dst] = idx
                return self._take(pkt)
        self._per_dest_idx[dst] = idx
        return None


def ap_queue_select(queue: TxQueue, rts_sender: int) -> Optional[Packet]:
    """Earliest queued packet destined to the RTS sender, removed (promoted)."""
    return queue.pop_first_for(rts_sender)


class SaturatedSource:
    """Full-buffer uplink traffic: always one more packet for the AP."""

    def __init__(self, ap_id: int, payload_bytes: int):
        self.ap_id = ap_id
        self.payload_bytes = payload_bytes
        self._seq = 0
        self._reinserted: list[Packet] = []

    def pop_head(self) -> Packet:
        if self._reinserted:
            return self._reinserted.pop()
        self._seq += 1
        return Packet(self.ap_id, self.payload_bytes, self._seq)

    def pop_first_for(self, dst: int) -> Optional[Packet]:
        if dst != self.ap_id:
            return None
        return self.pop_head()

    def reinsert(self, pkt: Packet):
        self._reinserted.append(pkt)

    def __len__(self) -> int:  # saturated by definition
        return 1 + len(self._reinserted)


class ApTrafficSource:
    """Full-buffer downlink queue: a finite FIFO buffer topped up on every
    departure with packets whose destinations are uniform over the stations."""

    def __init__(self, station_ids, payload_bytes: int, capacity_bytes: int, rng):
        self.station_ids = list(station_ids)
        self.payload_bytes = payload_bytes
        self.rng = rng
        self._seq = 0
        self.queue = TxQueue(capacity_bytes)
        if self.station_ids and payload_bytes > 0:
            while self.queue.total_bytes + payload_bytes <= capacity_bytes:
                self.queue.append(self._new_packet())

    def _new_packet(self) -> Packet:
        self._seq += 1
        dst = self.station_ids[self.rng.randrange(len(self.station_ids))]
        return Packet(dst, self.payload_bytes, self._seq)

    def _refill(self):
        while (self.station_ids
               and self.queue.total_bytes + self.payload_bytes <= self.queue.capacity_bytes):
            self.queue.append(self._new_packet())

    def pop_head(self) -> Optional[Packet]:
        pkt = self.queue.pop_head()
        if pkt is not None:
            self._refill()
        return pkt

    def pop_first_for(self, dst: int) -> Optional[Packet]:
        pkt = self.queue.pop_first_for(dst)
        if pkt is not None:
            self._refill()
        return pkt

    def reinsert(self, pkt: Packet):
        self.queue.reinsert(pkt)

    def __len__(self) -> int:
        return len(self.queue)


# --------------------------------------------------------------------------
# actions emitted by a station step


@dataclass(frozen=True)
class SendAfter:
    frame: Frame
    gap_us: int  # from "now"; the medium is already reserved for responses


@dataclass(frozen=True)
class SetTimer:
    at_ns: int
    tag: str


@dataclass(frozen=True)
class CancelTimer:
    tag: str


@dataclass(frozen=True)
class DropPacket:
    packet: Packet
    reason: str


@dataclass(frozen=True)
class DeliverData:
    frame: Frame  # counted at the receiving side, deduplicated by (src, seq)


# inputs


@dataclass(frozen=True)
class FrameRx:
    frame: Frame
    end_ns: int


@dataclass(frozen=True)
class GarbageEnd:
    end_ns: int


@dataclass(frozen=True)
class TimerFired:
    tag: str
    at_ns: int


@dataclass(frozen=True)
class TxDone:
    frame: Frame
    end_ns: int


@dataclass(frozen=True)
class Grant:
    at_ns: int


@dataclass
class Exchange:
    role: str  # "primary" | "secondary"
    peer: int
    pkt: Optional[Packet]
    fd: bool = False
    own_data_end_ns: int = 0
    nav_end_ns: int = 0
    got_peer_data: bool = False
    fdack_flag: bool = False
    peer_ack_received: bool = False
    own_ack_done: bool = False
    owes_ack: bool = False
    peer_data_failed: bool = False


class Station:
    """One MAC entity (station or access point)."""

    def __init__(self, sid, node_kind: NodeKind, queue, rng, timing: MacTiming,
                 phy: PhyParams, rate_mbps: int, rts_cts: bool, capabilities):
        self.sid = sid
        self.node_kind = node_kind
        self.queue = queue
        self.rng = rng
        self.timing = timing
        self.phy = phy
        self.rate_mbps = rate_mbps
        self.rts_cts = rts_cts
        self.capabilities = capabilities  # sid -> fd_capable

        self.phase = Phase.IDLE
        self.contending = False
        self.cw = timing.cw_min
        self.backoff_slots = 0
        self.ifs_wait = Wait.DIFS
        self.ready_at_ns = 0
        self.nav_until_ns = 0
        self.nav_from_cts = False

        self.current: Optional[Packet] = None
        self.retry_count = 0
        self.exch: Optional[Exchange] = None
        self._rx_seen: dict[int, int] = {}  # src -> last delivered seq

        # counters for conservation checks
        self.popped = 0
        self.dropped = 0

    # -- engine-facing helpers ------------------------------------------------

    @property
    def fd_capable(self) -> bool:
        return self.node_kind.fd_capable

    @property
    def ifs_ns(self) -> int:
        us = self.timing.difs_us if self.ifs_wait is Wait.DIFS else self.timing.eifs_us
        return us * US

    def start(self, now_ns: int) -> None:
        """Arm the initial contention attempt (post-boot backoff draw)."""
        if self._ensure_current():
            self._draw_backoff()
            self.ready_at_ns = now_ns
            self.contending = True
            self.phase = Phase.BACKOFF

    def _ensure_current(self) -> bool:
        if self.current is None:
            pkt = self.queue.pop_head()
            if pkt is None:
                return False
            self.current = pkt
            self.popped += 1
            self.retry_count = 0
        return True

    def _draw_backoff(self):
        self.backoff_slots = self.rng.randint(0, self.cw)

    def _duration(self, kind: FrameKind, payload: int = 0) -> int:
        return frame_duration(kind, payload, self.rate_mbps, self.phy)

    # -- step dispatch ---------------------------------------------------------

    def step(self, inp) -> list:
        if isinstance(inp, Grant):
            return self._on_grant(inp.at_ns)
        if isinstance(inp, FrameRx):
            return self._on_frame(inp.frame, inp.end_ns)
        if isinstance(inp, GarbageEnd):
            return self._on_garbage_end(inp.end_ns)
        if isinstance(inp, TimerFired):
            return self._on_timer(inp.tag, inp.at_ns)
        if isinstance(inp, TxDone):
            return self._on_tx_done(inp.frame, inp.end_ns)
        raise TypeError(f"illegal input {inp!r}")

    # -- transmission grant ----------------------------------------------------

    def _on_grant(self, now: int) -> list:
        if not self.contending or not self._ensure_current():
            raise RuntimeError(f"node {self.sid} granted while not contending")
        self.contending = False
        self.backoff_slots = 0
        t = self.timing
        pkt = self.current
        if self.rts_cts:
            t_data = self._duration(FrameKind.DATA, pkt.payload_bytes)
            nav = 3 * t.sifs_us + self._duration(FrameKind.CTS) + t_data + self._duration(FrameKind.ACK)
            frame = Frame(FrameKind.RTS, self.sid, pkt.dst, nav, 0,
                          self._duration(FrameKind.RTS), seq=pkt.seq)
            self.phase = Phase.TX_RTS
        else:
            nav = t.sifs_us + self._duration(FrameKind.ACK)
            frame = Frame(FrameKind.DATA, self.sid, pkt.dst, nav, pkt.payload_bytes,
                          self._duration(FrameKind.DATA, pkt.payload_bytes), seq=pkt.seq)
            self.phase = Phase.TX_DATA
            self.exch = Exchange(role="primary", peer=pkt.dst, pkt=pkt)
        return [SendAfter(frame, 0)]

    # -- own transmission finished ----------------------------------------------

    def _on_tx_done(self, frame: Frame, now: int) -> list:
        t = self.timing
        if frame.kind is FrameKind.RTS:
            self.phase = Phase.AWAIT_CTS
            timeout = now + (t.sifs_us + self._duration(FrameKind.CTS) + t.slot_us) * US
            return [SetTimer(timeout, "cts")]

        if frame.kind in (FrameKind.DATA, FrameKind.FDDATA):
            ex = self.exch
            ex.own_data_end_ns = now
            self.phase = Phase.AWAIT_ACK
            if self.rts_cts:
                deadline = ex.nav_end_ns + t.slot_us * US
            else:
                deadline = now + (t.sifs_us + self._duration(FrameKind.ACK) + t.slot_us) * US
            actions = [SetTimer(deadline, "ack")]
            if ex.got_peer_data and ex.fdack_flag and not ex.owes_ack:
                # peer's (shorter) frame already arrived; ACK goes SIFS after us
                actions.append(self._queue_own_ack(now))
            return actions

        if frame.kind is FrameKind.CTS:
            self.phase = Phase.TX_FDDATA if (self.exch and self.exch.fd) else Phase.RECEIVING
            return []

        if frame.kind is FrameKind.ACK:
            ex = self.exch
            if ex is None:
                return []
            ex.own_ack_done = True
            ex.owes_ack = False
            if ex.role == "secondary" and not ex.fd:
                # plain responder: ACK sent, role complete
                return self._finish_exchange(now, success=True)
            if ex.peer_ack_received:
                return self._finish_exchange(now, success=True)
            self.phase = Phase.AWAIT_ACK
            return []
        return []

    def _queue_own_ack(self, now: int) -> SendAfter:
        # called at the later of the two data-frame ends, so SIFS from now
        ex = self.exch
        ex.owes_ack = True
        ack = Frame(FrameKind.ACK, self.sid, ex.peer, 0, 0, self._duration(FrameKind.ACK))
        self.phase = Phase.TX_ACK
        return SendAfter(ack, self.timing.sifs_us)

    # -- receptions --------------------------------------------------------------

    def _on_frame(self, frame: Frame, now: int) -> list:
        self.ifs_wait = deference_policy(self.node_kind, Observation.CLEAN_FRAME_END)
        if frame.dst != self.sid:
            self._update_nav(frame, now)
            return []
        if frame.kind is FrameKind.RTS:
            return self._on_rts(frame, now)
        if frame.kind is FrameKind.CTS:
            return self._on_cts(frame, now)
        if frame.kind in (FrameKind.DATA, FrameKind.FDDATA):
            return self._on_data(frame, now)
        if frame.kind is FrameKind.ACK:
            return self._on_ack(frame, now)
        return []

    def _update_nav(self, frame: Frame, now: int) -> None:
        nav_end = now + frame.nav_us * US
        if nav_end > self.nav_until_ns:
            self.nav_until_ns = nav_end
            if frame.kind is FrameKind.CTS:
                self.nav_from_cts = True
        elif frame.kind is FrameKind.CTS and now <= self.nav_until_ns:
            self.nav_from_cts = True

    def _on_rts(self, frame: Frame, now: int) -> list:
        t = self.timing
        if self.exch is not None or self.phase not in (Phase.IDLE, Phase.BACKOFF, Phase.DEFERRING):
            return []
        if self.nav_until_ns > now:
            return []  # virtual carrier sense forbids the CTS
        fd_possible = self.fd_capable and self.capabilities.get(frame.src, False)
        pkt = ap_queue_select(self.queue, frame.src) if fd_possible else None
        if pkt is not None:
            self.popped += 1

        cts_dur = self._duration(FrameKind.CTS)
        ack_dur = self._duration(FrameKind.ACK)
        t_primary = frame.nav_us - (3 * t.sifs_us + cts_dur + ack_dur)
        if pkt is not None:
            t_fd = self._duration(FrameKind.FDDATA, pkt.payload_bytes)
            cts_nav = 2 * t.sifs_us + max(t_primary, t_fd) + ack_dur
        else:
            cts_nav = frame.nav_us - t.sifs_us - cts_dur
        cts = Frame(FrameKind.CTS, self.sid, frame.src, cts_nav, 0, cts_dur)

        cts_end = now + (t.sifs_us + cts_dur) * US
        self.exch = Exchange(role="secondary", peer=frame.src, pkt=pkt, fd=pkt is not None,
                             nav_end_ns=cts_end + cts_nav * US)
        self.contending = False
        self.phase = Phase.TX_CTS
        actions = [SendAfter(cts, t.sifs_us)]
        if pkt is not None:
            fddata = Frame(FrameKind.FDDATA, self.sid, frame.src,
                           t.sifs_us + ack_dur, pkt.payload_bytes,
                           self._duration(FrameKind.FDDATA, pkt.payload_bytes), seq=pkt.seq)
            actions.append(SendAfter(fddata, 2 * t.sifs_us + cts_dur))
        return actions

    def _on_cts(self, frame: Frame, now: int) -> list:
        if self.phase is not Phase.AWAIT_CTS or frame.src != self.current.dst:
            return []
        t = self.timing
        pkt = self.current
        self.exch = Exchange(role="primary", peer=frame.src, pkt=pkt,
                             nav_end_ns=now + frame.nav_us * US)
        data = Frame(FrameKind.DATA, self.sid, pkt.dst, t.sifs_us + self._duration(FrameKind.ACK),
                     pkt.payload_bytes, self._duration(FrameKind.DATA, pkt.payload_bytes),
                     seq=pkt.seq)
        self.phase = Phase.TX_DATA
        return [CancelTimer("cts"), SendAfter(data, t.sifs_us)]

    def _on_data(self, frame: Frame, now: int) -> list:
        ex = self.exch
        if ex is None:
            # plain reception outside any handshake (no-RTS mode): answer with
            # an ACK unless we are mid-attempt ourselves
            if self.phase not in (Phase.IDLE, Phase.BACKOFF, Phase.DEFERRING):
                return []
            self.exch = ex = Exchange(role="secondary", peer=frame.src, pkt=None)
            self.contending = False
        if frame.src != ex.peer:
            return []
        if ex.got_peer_data:
            # a second data frame before the ACK means our own data collided
            ex.peer_data_failed = True
            return []
        ex.got_peer_data = True
        actions: list = []
        if self._rx_seen.get(frame.src) != frame.seq:
            self._rx_seen[frame.src] = frame.seq
            actions.append(DeliverData(frame))

        own_sent_data = ex.role == "primary" or ex.fd
        if own_sent_data:
            # keep waiting for our own ACK; remember to answer once all data is done
            ex.fd = True
            ex.fdack_flag = True
            if self.phase in (Phase.AWAIT_ACK,):
                # our data already ended; peer's frame ended now, ACK after SIFS
                actions.append(self._queue_own_ack(now))
            # else: ACK queued when our own transmission completes (_on_tx_done)
        else:
            ex.owes_ack = True
            ack = Frame(FrameKind.ACK, self.sid, ex.peer, 0, 0, self._duration(FrameKind.ACK))
            self.phase = Phase.TX_ACK
            actions.append(SendAfter(ack, self.timing.sifs_us))
        return actions

    def _on_ack(self, frame: Frame, now: int) -> list:
        ex = self.exch
        if ex is None or frame.src != ex.peer:
            return []
        ex.peer_ack_received = True
        actions = [CancelTimer("ack")]
        if ex.fdack_flag and not ex.own_ack_done:
            return actions  # finish once our own ACK is on the wire
        return actions + self._finish_exchange(now, success=True)

    # -- erroneous receptions ------------------------------------------------------

    def _on_garbage_end(self, now: int) -> list:
        if self.exch is not None:
            return []  # participants never see their exchange as erroneous
        # Strictly inside the CTS reservation: the overlapping data streams of a
        # full-duplex exchange are ignored, but the simultaneous ACKs end exactly
        # at NAV expiry and do trigger EIFS for everyone not involved.
        cts_nav_active = self.nav_from_cts and now < self.nav_until_ns
        self.ifs_wait = deference_policy(self.node_kind, Observation.ERRONEOUS_FRAME_END,
                                         cts_nav_active=cts_nav_active)
        if self.ifs_wait is Wait.EIFS and self.contending:
            # an un-ignored erroneous reception restarts the backoff draw
            self._draw_backoff()
        return []

    # -- timers ---------------------------------------------------------------------

    def _on_timer(self, tag: str, now: int) -> list:
        if tag == "cts":
            if self.phase is not Phase.AWAIT_CTS:
                return []
            return self._retry(now, short=True)
        if tag == "ack":
            ex = self.exch
            if ex is None or self.phase not in (Phase.AWAIT_ACK, Phase.TX_ACK):
                return []
            if ex.role == "secondary":
                # promoted packet goes back to the head of the queue
                actions = []
                if ex.pkt is not None:
                    self.queue.reinsert(ex.pkt)
                    self.popped -= 1
                self.exch = None
                self._resume_contention(now, redraw=False)
                return actions
            return self._retry(now, short=not self.rts_cts)
        raise ValueError(f"unknown timer {tag}")

    def _retry(self, now: int, short: bool) -> list:
        t = self.timing
        self.exch = None
        self.retry_count += 1
        limit = t.short_retry_limit if short else t.long_retry_limit
        actions: list = []
        if self.retry_count > limit:
            actions.append(DropPacket(self.current, "retry_limit"))
            self.dropped += 1
            self.current = None
            self.retry_count = 0
            self.cw = t.cw_min
        else:
            self.cw = min(2 * self.cw + 1, t.cw_max)
        self.ifs_wait = Wait.DIFS  # nothing was received, no EIFS
        self._resume_contention(now, redraw=True)
        return actions

    # -- exchange termination ----------------------------------------------------------

    def _finish_exchange(self, now: int, success: bool) -> list:
        ex = self.exch
        self.exch = None
        obs = Observation.OWN_ACK_RECEIVED if ex.role == "primary" else Observation.FD_EXCHANGE_END
        self.ifs_wait = deference_policy(self.node_kind, obs, fd_exchange=ex.fd)
        if ex.role == "primary":
            self.current = None
            self.retry_count = 0
            self.cw = self.timing.cw_min
            self._resume_contention(now, redraw=True)
        else:
            if ex.fd:
                # the FDDATA was our own acknowledged transmission
                self.cw = self.timing.cw_min
                self._resume_contention(now, redraw=True)
            else:
                self._resume_contention(now, redraw=False)
        return []

    def _resume_contention(self, now: int, redraw: bool) -> None:
        if not self._ensure_current():
            self.contending = False
            self.phase = Phase.IDLE
            return
        if redraw:
            self._draw_backoff()
        self.ready_at_ns = now
        self.contending = True
        self.phase = Phase.BACKOFF
