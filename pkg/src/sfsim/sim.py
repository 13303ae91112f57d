"""Deterministic discrete-event radio simulator.

Time is integer nanoseconds.  All randomness is counter-based (seed plus
event coordinates), so identical (config, seed) pairs give byte-identical
results regardless of host or process layout, and matched experiment cells
share random draws (common random numbers).

Concurrent transmissions of identical bytes combine into one reception
when the transmitters' start-time offsets stay below the 0.5 us coherence
bound; otherwise the slot is lost to destructive interference.  Offsets
are tracked in exact arithmetic (Fraction) so the coherence boundary and
the drift-failure hop bound are step functions at exactly 0.5 us.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from . import _rng
from ._rng import mix64, uniform
from .crypto import (
    REUSE_IND,
    REUSE_MP2P,
    AuthFailure,
    CcmEngine,
    Key128,
    ZERO_NONCE,
    build_nonce,
    ccm_decrypt,
)
from .framing import CRC_LEN, MIC_LEN, Phy, airtime_ns, decode_frame, encode_frame
from .protocol import (
    DESYNCED,
    GUARANTEED_CHANNEL,
    HEADER_LEN,
    IND_BODY_LEN,
    JOINED,
    UNJOINED,
    ConfigError,
    EcStore,
    EpochSchedule,
    NodeState,
    PhaseSpec,
    device_decrypt,
    device_encrypt,
    device_nonce,
    hop_channel,
    pack_ind_body,
    pack_payload,
    restore_ec_after_restart,
    unpack_ind_body,
    unpack_payload,
)

CT_COHERENCE_NS = Fraction(500)  # 0.5 us pairwise budget

# Engine-internal clock offsets are exact integers in units of 1e-9 ns
# (one milli-ppm of drift over one nanosecond), so the coherence boundary
# is an integer comparison and never suffers float rounding.
RAW_PER_NS = 10**9
CT_COHERENCE_RAW = 500 * RAW_PER_NS

# RxOutcome result kinds
RECEIVED = "received"
CT_INCOHERENT = "ct_incoherent"
COLLISION_GARBLE = "collision_garble"
ERASED = "erased"
LENGTH_OVERRUN = "length_overrun"
CRC_FAIL = "crc_fail"
AUTH_FAIL = "auth_fail"

OUTCOME_KINDS = (
    RECEIVED,
    CT_INCOHERENT,
    COLLISION_GARBLE,
    ERASED,
    LENGTH_OVERRUN,
    CRC_FAIL,
    AUTH_FAIL,
)


class EpochOverrun(ConfigError):
    """Phases do not fit in the epoch interval; rejected at config time."""


@dataclass(frozen=True)
class RxOutcome:
    result: str
    rx_time_ns: int = 0
    bits_corrupted: int = 0


# --- clocks -----------------------------------------------------------------


@dataclass
class ClockModel:
    """Local oscillator: inherited grid offset plus ppm drift since sync."""

    drift_ppm: Fraction = Fraction(0)
    offset_ns: Fraction = Fraction(0)
    last_sync_ns: int | None = None

    def drift_error_ns(self, true_ns: int) -> Fraction:
        if self.last_sync_ns is None:
            return Fraction(0)
        return self.drift_ppm * (true_ns - self.last_sync_ns) / 1_000_000

    def offset_at(self, true_ns: int) -> Fraction:
        return self.offset_ns + self.drift_error_ns(true_ns)

    def local_time(self, true_ns: int) -> Fraction:
        return true_ns + self.offset_at(true_ns)

    def resync(self, true_ns: int, inherited_offset_ns: Fraction = Fraction(0)):
        self.last_sync_ns = true_ns
        self.offset_ns = inherited_offset_ns


def advance_clock(clock: ClockModel, until_ns: int) -> Fraction:
    """Local time of the node's clock at the given true time."""
    return clock.local_time(until_ns)


# --- topology and link model --------------------------------------------------

# Per-PHY range scale: higher bitrate reaches less far.
RANGE_FACTORS = {"phy_125k": 1.0, "phy_500k": 0.8, "phy_1m": 0.65, "phy_2m": 0.5}
# Per-PHY bit-error scale: coded PHYs get a FEC discount.
BER_FACTORS = {"phy_125k": 0.25, "phy_500k": 0.5, "phy_1m": 1.0, "phy_2m": 2.0}


@dataclass
class Topology:
    """Node positions plus pairwise reception probabilities per PHY."""

    positions: dict[int, tuple[float, float]]
    overrides: dict[tuple[int, int], dict[str, float]] = field(default_factory=dict)
    base_range_m: float = 120.0
    range_factors: dict[str, float] = field(default_factory=lambda: dict(RANGE_FACTORS))

    def node_ids(self) -> list[int]:
        return sorted(self.positions)

    def distance(self, a: int, b: int) -> float:
        xa, ya = self.positions[a]
        xb, yb = self.positions[b]
        return math.hypot(xa - xb, ya - yb)

    def p_link(self, a: int, b: int, phy: Phy) -> float:
        if a == b:
            return 0.0
        key = (a, b) if a < b else (b, a)
        ov = self.overrides.get(key)
        if ov is not None:
            if phy.name in ov:
                return ov[phy.name]
            if "any" in ov:
                return ov["any"]
        rng = self.base_range_m * self.range_factors.get(phy.name, 1.0)
        d = self.distance(a, b)
        if d <= 0.5 * rng:
            return 1.0
        if d >= rng:
            return 0.0
        return (rng - d) / (0.5 * rng)

    def neighbors(self, phy: Phy) -> dict[int, dict[int, float]]:
        """p_link map per node; only links with p > 0."""
        out: dict[int, dict[int, float]] = {n: {} for n in self.positions}
        ids = self.node_ids()
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                p = self.p_link(a, b, phy)
                if p > 0.0:
                    out[a][b] = p
                    out[b][a] = p
        return out

    def hops_from(self, src: int, phy: Phy) -> dict[int, int]:
        """BFS hop distance on the p > 0 connectivity graph."""
        nbrs = self.neighbors(phy)
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for a in frontier:
                for b in sorted(nbrs[a]):
                    if b not in dist:
                        dist[b] = dist[a] + 1
                        nxt.append(b)
            frontier = nxt
        return dist

    @classmethod
    def line(cls, n: int, spacing_m: float = 50.0, **kw) -> "Topology":
        return cls({i: (i * spacing_m, 0.0) for i in range(n)}, **kw)

    @classmethod
    def grid(cls, rows: int, cols: int, spacing_m: float = 50.0, **kw) -> "Topology":
        pos = {}
        for r in range(rows):
            for c in range(cols):
                pos[r * cols + c] = (c * spacing_m, r * spacing_m)
        return cls(pos, **kw)

    @classmethod
    def random_disk(cls, n: int, radius_m: float, seed: int, **kw) -> "Topology":
        pos = {}
        for i in range(n):
            u = uniform(seed, _rng.P_TOPOLOGY, i, 0)
            v = uniform(seed, _rng.P_TOPOLOGY, i, 1)
            r = radius_m * math.sqrt(u)
            ang = 2.0 * math.pi * v
            pos[i] = (r * math.cos(ang), r * math.sin(ang))
        return cls(pos, **kw)

    @classmethod
    def from_spec(cls, spec: dict) -> "Topology":
        """Build from a parsed topology file (nodes + link overrides)."""
        kw = {}
        if "base_range_m" in spec:
            kw["base_range_m"] = float(spec["base_range_m"])
        if "range_factors" in spec:
            kw["range_factors"] = {k: float(v) for k, v in spec["range_factors"].items()}
        kind = spec.get("kind", "explicit")
        if kind == "line":
            topo = cls.line(int(spec["nodes"]), float(spec.get("spacing_m", 50.0)), **kw)
        elif kind == "grid":
            topo = cls.grid(
                int(spec["rows"]), int(spec["cols"]), float(spec.get("spacing_m", 50.0)), **kw
            )
        elif kind == "random_disk":
            topo = cls.random_disk(
                int(spec["nodes"]),
                float(spec.get("radius_m", 200.0)),
                int(spec.get("seed", 0)),
                **kw,
            )
        elif kind == "explicit":
            nodes = {int(n["id"]): (float(n["x"]), float(n["y"])) for n in spec["nodes"]}
            topo = cls(nodes, **kw)
        else:
            raise ConfigError(f"unknown topology kind {kind!r}")
        for link in spec.get("links", []):
            a, b = int(link["a"]), int(link["b"])
            key = (a, b) if a < b else (b, a)
            phy_name = link.get("phy", "any")
            topo.overrides.setdefault(key, {})[phy_name] = float(link["p_link"])
        return topo


# --- events -------------------------------------------------------------------

EVENT_PRIORITY = {
    "epoch_boundary": 0,
    "slot_start": 1,
    "ccm_ready": 2,
    "tx_begin": 3,
    "tx_end": 4,
    "rx_window": 5,
}


@dataclass(frozen=True)
class SimEvent:
    t_ns: int
    kind: str
    node_id: int = -1
    info: tuple = ()


class EventQueue:
    """Timestamp-ordered queue; ties break on kind priority then node id."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def push(self, ev: SimEvent):
        heapq.heappush(
            self._heap, (ev.t_ns, EVENT_PRIORITY[ev.kind], ev.node_id, next(self._seq), ev)
        )

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[-1]

    def __len__(self):
        return len(self._heap)


def schedule_phase_timeline(
    spec: PhaseSpec,
    phy: Phy,
    phase_start_ns: int,
    *,
    frame_len_on_air: int,
    hop_gap_ns: int = 150_000,
    rampup_ns: int = 40_000,
    prep_ns: int | None = None,
    deadline_ns: int | None = None,
) -> list[SimEvent]:
    """Slot-level event timeline for one phase.

    Raises EpochOverrun when the last slot would end past the deadline.
    A ccm_ready event precedes every tx_begin at the configured keystream
    offset (default: ready when the radio ramp-up completes).
    """
    airtime = airtime_ns(frame_len_on_air, phy)
    hop = airtime + hop_gap_ns
    prep = rampup_ns if prep_ns is None else prep_ns
    end = phase_start_ns + spec.max_hops * hop
    if deadline_ns is not None and end > deadline_ns:
        raise EpochOverrun(
            f"phase needs {spec.max_hops} x {hop} ns and ends at {end}, past {deadline_ns}"
        )
    q = EventQueue()
    for s in range(spec.max_hops):
        t = phase_start_ns + s * hop
        q.push(SimEvent(t, "slot_start", info=(s,)))
        q.push(SimEvent(t + prep, "ccm_ready", info=(s,)))
        q.push(SimEvent(t + rampup_ns, "tx_begin", info=(s,)))
        q.push(SimEvent(t + rampup_ns + airtime, "tx_end", info=(s,)))
        q.push(SimEvent(t + rampup_ns + airtime, "rx_window", info=(s,)))
    return [q.pop() for _ in range(len(q))]


# --- reception resolution -------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TxSignal:
    node_id: int
    data: bytes
    offset_raw: int  # grid offset in RAW_PER_NS units (1e-9 ns)
    p_link: float


def _corrupt_count(n_bytes: int, p_byte: float, u: float) -> int:
    """Binomial(n, p) sample conditioned on >= 1, by inverse transform."""
    p0 = (1.0 - p_byte) ** n_bytes
    target = p0 + u * (1.0 - p0)  # skip the zero mass
    acc = p0
    pk = p0
    k = 0
    while acc < target and k < n_bytes:
        k += 1
        pk *= (n_bytes - k + 1) / k * (p_byte / (1.0 - p_byte))
        acc += pk
        if pk <= 0.0 or math.isnan(pk):
            break
    return max(k, 1)


def resolve_reception(
    receiver: int,
    concurrent_txs: list[TxSignal],
    phy: Phy,
    *,
    ber: float,
    seed: int,
    draw_key: tuple[int, int, int],
    capture_margin: float | None = None,
    max_packet_length: int = 255,
    length_guarded: bool = True,
    single_version: bool = False,
    p_clean: float | None = None,
) -> tuple[RxOutcome, bytes | None]:
    """One receive window: the outcome plus the frame bytes on success.

    concurrent_txs must already be filtered to in-range transmitters on the
    receiver's channel.  draw_key = (epoch, phase, slot); the draws are
    keyed only by those coordinates and the receiver, never by frame
    content, so matched runs stay coupled.  single_version and p_clean are
    precomputed hints; passing them never changes the outcome.
    """
    e, pc, s = draw_key
    if not concurrent_txs:
        return RxOutcome(ERASED), None

    if single_version:
        txs = concurrent_txs
    else:
        groups: dict[bytes, list[TxSignal]] = {}
        for tx in concurrent_txs:
            groups.setdefault(tx.data, []).append(tx)
        if len(groups) > 1:
            chosen = None
            if capture_margin is not None:
                ordered = sorted(concurrent_txs, key=lambda t: (-t.p_link, t.node_id))
                best = ordered[0]
                runner = next((t for t in ordered[1:] if t.data != best.data), None)
                if runner is None or best.p_link - runner.p_link >= capture_margin:
                    chosen = groups[best.data]
            if chosen is None:
                return RxOutcome(COLLISION_GARBLE), None
            txs = chosen
        else:
            txs = concurrent_txs

    if len(txs) > 1:
        offsets = [t.offset_raw for t in txs]
        if max(offsets) - min(offsets) >= CT_COHERENCE_RAW:
            return RxOutcome(CT_INCOHERENT), None

    p_comb = 1.0
    for t in txs:
        p_comb *= 1.0 - t.p_link
    p_comb = 1.0 - p_comb
    if p_comb < 1.0 and uniform(seed, _rng.P_LINK, e, pc, s, receiver) >= p_comb:
        return RxOutcome(ERASED), None

    data = txs[0].data
    if ber > 0.0:
        n = len(data)
        p_byte = 1.0 - (1.0 - ber) ** 8
        if p_clean is None:
            p_clean = (1.0 - p_byte) ** n
        u = uniform(seed, _rng.P_BER, e, pc, s, receiver)
        if u >= p_clean:
            k = _corrupt_count(
                n, p_byte, uniform(seed, _rng.P_CORRUPT_COUNT, e, pc, s, receiver)
            )
            # a corrupted length header claims an oversized frame; the
            # radio's max-length guard clamps the window and drops the frame
            # without touching the hop schedule
            pos = mix64(seed, _rng.P_CORRUPT_POS, e, pc, s, receiver) % n
            if length_guarded and pos == 0:
                claimed = mix64(seed, _rng.P_CORRUPT_POS, e, pc, s, receiver, 1) % 256
                if claimed > max_packet_length:
                    return RxOutcome(LENGTH_OVERRUN, bits_corrupted=k), None
            return RxOutcome(CRC_FAIL, bits_corrupted=k), None
    return RxOutcome(RECEIVED), data


# --- engine ---------------------------------------------------------------------


@dataclass(frozen=True)
class TxInject:
    """Adversarial transmission: raw bytes sent by a topology node."""

    node_id: int
    data: bytes
    offset_raw: int = 0


@dataclass
class RunConfig:
    topology: Topology
    phy: Phy
    schedule: EpochSchedule
    epochs: int
    encryption: str = "on"  # off | on | on+device_keys
    seed: int = 1
    ber: float = 0.0
    hop_gap_ns: int = 150_000
    rampup_ns: int = 40_000
    keystream_prep_ns: int | None = None
    timing_error_ns: int = 0
    per_hop_resync: bool = True
    drift_ppm: dict[int, Fraction] | None = None
    capture_margin: float | None = None
    listen_all_slots: bool = False
    observers: tuple[int, ...] = ()
    device_key_nodes: tuple[int, ...] = ()
    restarts: tuple[tuple[int, int], ...] = ()  # (node, epoch): offline that epoch
    joins: tuple[tuple[int, int], ...] = ()  # (node, epoch): powered on then
    start_joined: bool = True
    full_crypto: bool = False
    collect_events: bool = False
    collect_deliveries: bool = False
    desync_limit: int = 3
    state_dir: str | None = None
    attacker_tx: object = None  # callable(engine, epoch, pc, slot, channel) -> [TxInject]
    # a joined receiver whose slot grid is further than this from the
    # incoming transmission misses the preamble entirely (mis-measured
    # timing constants surface here); unjoined radios listen windowless
    rx_window_tolerance_ns: int = 40_000

    def __post_init__(self):
        if self.encryption not in ("off", "on", "on+device_keys"):
            raise ConfigError(f"unknown encryption mode {self.encryption!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass
class ObsRecord:
    epoch: int
    pc: int
    slot: int
    observer: int
    result: str
    data: bytes | None


@dataclass
class Delivery:
    epoch: int
    pc: int
    node: int
    src: int
    payload: bytes | None


@dataclass
class RunResult:
    delivered: dict[int, int]
    expected: dict[int, int]
    outcome_hist: Counter
    ledger_violations: int
    ledger_event_classes: set
    ledger_event_counts: Counter
    join_epochs: dict[int, int]
    observations: list[ObsRecord]
    deliveries: list[Delivery]
    event_log: list[str]
    ccm_late_slots: int

    def per(self, node: int) -> float:
        exp = self.expected.get(node, 0)
        if exp == 0:
            return 0.0
        return 1.0 - self.delivered.get(node, 0) / exp

    def write_event_log(self, path: str):
        """Newline-delimited debug records: timestamp,node,kind,outcome.

        Requires the run to have been made with collect_events=True.
        """
        with open(path, "w") as f:
            for line in self.event_log:
                f.write(line + "\n")


class _PhasePlan:
    """Static per-phase geometry: slot grid origin and frame layout."""

    __slots__ = ("spec", "start_ns", "slot_base", "hop_ns", "frame_len", "payload_len", "p_clean")

    def __init__(self, spec, start_ns, slot_base, hop_ns, frame_len, payload_len, p_clean):
        self.spec = spec
        self.start_ns = start_ns
        self.slot_base = slot_base
        self.hop_ns = hop_ns
        self.frame_len = frame_len  # serialized bytes on air
        self.payload_len = payload_len  # frame payload field length
        self.p_clean = p_clean  # corruption-free probability per reception


class _Version:
    """One payload variant circulating in a phase (MP2P has several)."""

    __slots__ = ("src", "body", "ec", "frames", "app_payload")

    def __init__(self, src: int, body: bytes, ec: int, app_payload: bytes):
        self.src = src
        self.body = body
        self.ec = ec
        self.frames: dict[int, bytes] = {}  # slot -> serialized frame
        self.app_payload = app_payload


NETWORK_KEY = Key128(bytes(range(16)), "network")
DEVICE_KEY = Key128(bytes(range(16, 32)), "device")


class Engine:
    """One simulation run: fixed topology, PHY, schedule and seed.

    Owns every NodeState and clock; events are dispatched in timestamp
    order within the statically validated slot grid.  Never share an
    instance across threads; run many engines in parallel instead.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.phy = cfg.phy
        self.topology = cfg.topology
        self.seed = cfg.seed
        self.encrypted = cfg.encryption != "off"
        self.device_keys = cfg.encryption == "on+device_keys"
        self.ccm = CcmEngine()
        self.ec_store = EcStore(cfg.state_dir)
        self.neighbors = cfg.topology.neighbors(cfg.phy)
        self.observers = set(cfg.observers)
        self.initiator = cfg.schedule.phases[0].initiators[0]

        self._join_at: dict[int, list[int]] = {}
        powered_off = set()
        for n, e in cfg.joins:
            self._join_at.setdefault(e, []).append(n)
            powered_off.add(n)
        self._restart_map: dict[int, set[int]] = {}
        for n, e in cfg.restarts:
            self._restart_map.setdefault(e, set()).add(n)

        drift = cfg.drift_ppm or {}
        self.nodes: dict[int, NodeState] = {}
        # raw clock bookkeeping (RAW_PER_NS units): same model as ClockModel
        # but in exact integer arithmetic for the hot path
        self._drift_mppm: dict[int, int] = {}
        self._anchor: dict[int, int | None] = {}
        self._grid_raw: dict[int, int] = {}
        for nid in cfg.topology.node_ids():
            st = NodeState(nid, NETWORK_KEY)
            if self.device_keys and (not cfg.device_key_nodes or nid in cfg.device_key_nodes):
                st.device_key = DEVICE_KEY
            st.is_initiator = nid == self.initiator
            # the initiator's clock is the reference timeline
            d = Fraction(0) if st.is_initiator else Fraction(drift.get(nid, 0))
            mppm = d * 1000
            if mppm.denominator != 1:
                raise ConfigError("drift resolution is 0.001 ppm")
            self._drift_mppm[nid] = int(mppm)
            self._anchor[nid] = None
            self._grid_raw[nid] = 0
            if nid in powered_off:
                st.alive = False
            elif cfg.start_joined or st.is_initiator:
                st.sync_status = JOINED
                st.adopted_epoch = 0
                st.last_ind_ec = -1
                self._anchor[nid] = 0
            self.nodes[nid] = st

        self.plans = self._build_plans()
        self.delivered: Counter = Counter()
        self.expected: Counter = Counter()
        self.outcomes: Counter = Counter()
        self.join_epochs: dict[int, int] = {}
        self.observations: list[ObsRecord] = []
        self.deliveries: list[Delivery] = []
        self.event_log: list[str] = []
        self.ccm_late_slots = 0
        self._prep_ns = (
            cfg.keystream_prep_ns if cfg.keystream_prep_ns is not None else cfg.rampup_ns
        )
        self._ccm_late = self._prep_ns > cfg.rampup_ns
        self._window_raw = cfg.rx_window_tolerance_ns * RAW_PER_NS

    # -- static planning --

    def _phase_frame_len(self, spec: PhaseSpec) -> tuple[int, int]:
        """(serialized length, frame payload length) for one phase."""
        body = IND_BODY_LEN if spec.is_ind else spec.payload_len
        if spec.pattern == "p2p" and not spec.is_ind:
            body += 1
        if self.device_keys and not spec.is_ind:
            body += MIC_LEN  # inner-layer MIC rides inside the flood payload
        plen = HEADER_LEN + body
        if self.encrypted:
            return 1 + plen + MIC_LEN + CRC_LEN, plen
        return plen + CRC_LEN, plen

    def _build_plans(self) -> list[_PhasePlan]:
        cfg = self.cfg
        t = 0
        slot_base = 0
        plans = []
        for spec in cfg.schedule.phases:
            frame_len, payload_len = self._phase_frame_len(spec)
            hop = airtime_ns(frame_len - CRC_LEN, self.phy) + cfg.hop_gap_ns
            end = t + spec.max_hops * hop
            if end > cfg.schedule.epoch_interval_ns:
                raise EpochOverrun(
                    f"schedule ends at {end} ns, past the "
                    f"{cfg.schedule.epoch_interval_ns} ns epoch interval"
                )
            p_clean = None
            if cfg.ber > 0.0:
                p_byte = 1.0 - (1.0 - cfg.ber) ** 8
                p_clean = (1.0 - p_byte) ** frame_len
            plans.append(_PhasePlan(spec, t, slot_base, hop, frame_len, payload_len, p_clean))
            t = end
            slot_base += spec.max_hops
        return plans

    # -- run --

    def run(self) -> RunResult:
        for epoch in range(self.cfg.epochs):
            self._run_epoch(epoch)
        return RunResult(
            delivered=dict(self.delivered),
            expected=dict(self.expected),
            outcome_hist=self.outcomes,
            ledger_violations=self.ccm.ledger.violations,
            ledger_event_classes=self.ccm.ledger.event_classes(),
            ledger_event_counts=Counter(e.reuse_class for e in self.ccm.ledger.events),
            join_epochs=dict(self.join_epochs),
            observations=self.observations,
            deliveries=self.deliveries,
            event_log=self.event_log,
            ccm_late_slots=self.ccm_late_slots,
        )

    def _run_epoch(self, epoch: int):
        cfg = self.cfg
        t_epoch = epoch * cfg.schedule.epoch_interval_ns
        if cfg.collect_events:
            self.event_log.append(f"{t_epoch},-1,epoch_boundary,{epoch}")

        for nid in self._join_at.get(epoch, ()):  # powered on now, must join
            st = self.nodes[nid]
            st.alive = True
            st.sync_status = UNJOINED

        down = self._restart_map.get(epoch, set())
        for nid in down:
            self.nodes[nid].alive = False
        for nid in self._restart_map.get(epoch - 1, set()) - down:
            st = self.nodes[nid]
            st.alive = True
            if st.is_initiator:
                st.ec = restore_ec_after_restart(self.ec_store, nid)
                st.sync_status = JOINED
                st.adopted_epoch = epoch
                self._anchor[nid] = t_epoch
                self._grid_raw[nid] = 0
            else:
                st.sync_status = UNJOINED
                st.adopted_epoch = -1

        init = self.nodes[self.initiator]
        if init.alive:
            self.ec_store.persist(self.initiator, init.ec)

        heard_ind: set[int] = set()
        for pc, plan in enumerate(self.plans):
            self._run_phase(epoch, pc, plan, t_epoch, heard_ind)

        # IND-miss accounting and the desync policy
        for nid in sorted(self.nodes):
            st = self.nodes[nid]
            if st.sync_status != JOINED or st.is_initiator or not st.alive:
                continue
            if nid in heard_ind:
                st.missed_inds = 0
            else:
                st.missed_inds += 1
                if st.missed_inds >= cfg.desync_limit:
                    st.sync_status = DESYNCED
                    st.adopted_epoch = -1
        if init.alive:
            init.ec += 1

    # -- phase internals --

    def _build_version(self, epoch: int, pc: int, plan: _PhasePlan, src: int) -> _Version:
        spec = plan.spec
        st = self.nodes[src]
        ec = st.ec if st.is_initiator else st.predicted_ec(epoch)
        if spec.is_ind:
            body = pack_ind_body(ec)
            app = body
        else:
            app = _rng.stream_bytes(spec.payload_len, self.seed, _rng.P_PAYLOAD, epoch, pc, src)
            body = app
            if self.device_keys and st.device_key is not None:
                body = device_encrypt(app, st.device_key, device_nonce(ec, pc, src), self.ccm)
            if spec.pattern == "p2p":
                body = bytes([spec.target]) + body
        return _Version(src, body, ec, app)

    def _frame_for_slot(self, version: _Version, plan: _PhasePlan, pc: int, slot: int) -> bytes:
        frame = version.frames.get(slot)
        if frame is not None:
            return frame
        pt = pack_payload(slot, version.src, version.body)
        if not self.encrypted:
            frame = encode_frame(pt, None, with_length=False)
        else:
            spec = plan.spec
            if spec.is_ind:
                nonce, reuse = ZERO_NONCE, REUSE_IND
            else:
                nonce = build_nonce(version.ec, pc, slot)
                # multi-initiator MP2P shares the outer nonce across distinct
                # payloads; with device keys the inner layer stays protected
                # but the outer reuse is still a flagged event
                reuse = REUSE_MP2P if spec.pattern == "mp2p" else None
            out = self.ccm.seal(NETWORK_KEY, nonce, pt, bytes([len(pt)]), reuse_class=reuse)
            frame = encode_frame(out.ciphertext, out.mic)
        version.frames[slot] = frame
        return frame

    def _authenticate(self, listener, plan, epoch, pc, slot, version, raw):
        """Plaintext on MIC pass (CRC pass for legacy frames), else None.

        version is None for adversarial bytes, which always take the full
        crypto path; engine-built frames take a trusted fast path unless
        full_crypto is set.
        """
        spec = plan.spec
        if not self.encrypted:
            try:
                fr = decode_frame(
                    raw,
                    max_packet_length=plan.payload_len,
                    with_mic=False,
                    with_length=False,
                    expected_len=plan.payload_len,
                )
            except Exception:
                return None
            return fr.payload
        if version is not None and not self.cfg.full_crypto:
            if spec.is_ind or listener.predicted_ec(epoch) == version.ec:
                return pack_payload(slot, version.src, version.body)
            return None
        try:
            fr = decode_frame(raw, max_packet_length=plan.payload_len, with_mic=True)
        except Exception:
            return None
        nonce = (
            ZERO_NONCE
            if spec.is_ind
            else build_nonce(listener.predicted_ec(epoch), pc, slot)
        )
        try:
            return ccm_decrypt(NETWORK_KEY, nonce, fr.payload, bytes([fr.length]), fr.mic)
        except AuthFailure:
            return None

    def _run_phase(self, epoch: int, pc: int, plan: _PhasePlan, t_epoch: int, heard_ind: set):
        cfg = self.cfg
        spec = plan.spec
        nodes = self.nodes

        if spec.is_ind:
            intended: set[int] = set()
        elif spec.pattern == "p2mp":
            intended = {
                n
                for n in nodes
                if n not in spec.initiators and n not in self.observers
            }
        else:
            intended = {spec.target} if spec.target is not None else set()
        for nid in sorted(intended):
            self.expected[nid] += 1

        versions: dict[int, _Version] = {}
        tx_sched: dict[int, list[tuple[int, _Version]]] = {}
        done: set[int] = set()
        for src in sorted(spec.initiators):
            st = nodes[src]
            if not st.alive or st.sync_status != JOINED:
                continue
            v = versions[src] = self._build_version(epoch, pc, plan, src)
            tx_sched.setdefault(0, []).append((src, v))
            done.add(src)
        if not tx_sched:
            return

        ec_grid = self.nodes[self.initiator].ec
        rx_slot: dict[int, int] = {}
        delivered_phase: set[int] = set()
        listeners_all = sorted(nodes)
        g_t_epoch = t_epoch

        for s in range(spec.max_hops):
            txs = tx_sched.pop(s, [])
            channel = hop_channel(ec_grid, plan.slot_base + s)
            inject: list[TxInject] = []
            if cfg.attacker_tx is not None:
                inject = cfg.attacker_tx(self, epoch, pc, s, channel)
            if self._ccm_late and txs:
                self.ccm_late_slots += len(txs)
                txs = []
            if not txs and not inject:
                continue
            t_slot = g_t_epoch + plan.start_ns + s * plan.hop_ns
            if cfg.collect_events:
                self.event_log.append(f"{t_slot},-1,slot_start,{pc}:{s}")
                self.event_log.append(f"{t_slot + self._prep_ns},-1,ccm_ready,{pc}:{s}")
                self.event_log.append(f"{t_slot + cfg.rampup_ns},-1,tx_begin,{pc}:{s}")

            signals: list[tuple[int, bytes, int]] = []
            txers: set[int] = set()
            by_bytes: dict[bytes, _Version | None] = {}
            anchor = self._anchor
            grid_raw = self._grid_raw
            drift_mppm = self._drift_mppm
            for nid, v in txs:
                txers.add(nid)
                if nodes[nid].is_initiator:
                    off = 0
                else:
                    a = anchor[nid]
                    off = grid_raw[nid] if a is None else (
                        grid_raw[nid] + drift_mppm[nid] * (t_slot - a)
                    )
                data = self._frame_for_slot(v, plan, pc, s)
                signals.append((nid, data, off))
                by_bytes[data] = v
            for inj in inject:
                txers.add(inj.node_id)
                signals.append((inj.node_id, inj.data, inj.offset_raw))
                by_bytes.setdefault(inj.data, None)
            single_version = len(by_bytes) == 1 and cfg.capture_margin is None
            if cfg.collect_events:
                airtime = plan.hop_ns - cfg.hop_gap_ns
                self.event_log.append(
                    f"{t_slot + cfg.rampup_ns + airtime},-1,tx_end,{pc}:{s}"
                )

            for nid in listeners_all:
                st = nodes[nid]
                if nid in txers or not st.alive:
                    continue
                if nid in done and nid not in self.observers and not cfg.listen_all_slots:
                    continue
                if not self._is_listening(st, nid, channel, epoch, plan.slot_base + s):
                    continue
                nbrs = self.neighbors[nid]
                in_range = [
                    TxSignal(t_id, t_data, t_off, nbrs[t_id])
                    for t_id, t_data, t_off in signals
                    if t_id in nbrs
                ]
                if not in_range:
                    continue
                if (
                    st.sync_status == JOINED
                    and nid not in self.observers
                    and self._anchor[nid] is not None
                ):
                    a = self._anchor[nid]
                    rx_off = self._grid_raw[nid] + drift_mppm[nid] * (t_slot - a)
                    lock = max(in_range, key=lambda t: (t.p_link, -t.node_id))
                    if abs(rx_off - lock.offset_raw) >= self._window_raw:
                        self.outcomes[ERASED] += 1  # window missed the preamble
                        continue
                outcome, data = resolve_reception(
                    nid,
                    in_range,
                    self.phy,
                    ber=cfg.ber,
                    seed=self.seed,
                    draw_key=(epoch, pc, s),
                    capture_margin=cfg.capture_margin,
                    max_packet_length=plan.payload_len,
                    length_guarded=self.encrypted,
                    single_version=single_version,
                    p_clean=plan.p_clean,
                )
                payload = None
                if outcome.result == RECEIVED:
                    payload = self._authenticate(st, plan, epoch, pc, s, by_bytes.get(data), data)
                    if payload is None:
                        outcome = RxOutcome(AUTH_FAIL)
                self.outcomes[outcome.result] += 1
                if nid in self.observers:
                    self.observations.append(ObsRecord(epoch, pc, s, nid, outcome.result, data))
                if cfg.collect_events:
                    t_rx = t_slot + plan.hop_ns - cfg.hop_gap_ns + cfg.rampup_ns
                    self.event_log.append(f"{t_rx},{nid},rx_window,{outcome.result}")
                if payload is None or nid in self.observers:
                    continue  # observers are passive probes, never protocol actors
                self._handle_authenticated(
                    st,
                    nid,
                    plan,
                    epoch,
                    pc,
                    s,
                    t_slot,
                    payload,
                    by_bytes.get(data),
                    in_range,
                    rx_slot,
                    tx_sched,
                    done,
                    delivered_phase,
                    intended,
                    heard_ind,
                )

    def _is_listening(self, st: NodeState, nid: int, channel: int, epoch: int, global_slot: int) -> bool:
        if nid in self.observers:
            return True
        if st.sync_status != JOINED:
            # unjoined and desynced radios camp on the guaranteed channel
            return channel == GUARANTEED_CHANNEL
        pred = st.predicted_ec(epoch)
        if pred != self.nodes[self.initiator].ec:
            # wrong counters put the node on its own hopping track
            return hop_channel(pred, global_slot) == channel
        return True

    def _handle_authenticated(
        self,
        st: NodeState,
        nid: int,
        plan: _PhasePlan,
        epoch: int,
        pc: int,
        s: int,
        t_slot: int,
        payload: bytes,
        version: _Version | None,
        in_range: list[TxSignal],
        rx_slot: dict[int, int],
        tx_sched: dict[int, list],
        done: set[int],
        delivered_phase: set[int],
        intended: set[int],
        heard_ind: set[int],
    ):
        cfg = self.cfg
        spec = plan.spec
        rc, src, body = unpack_payload(payload)

        if spec.is_ind and not st.is_initiator:
            # the initiator is the EC authority and never adopts from the air
            ec_new = unpack_ind_body(body)
            if ec_new < st.last_ind_ec:
                return  # stale IND: replayed from a past epoch
            if st.sync_status != JOINED:
                st.sync_status = JOINED
                st.missed_inds = 0
                self.join_epochs.setdefault(nid, epoch)
            st.ec = ec_new
            st.adopted_epoch = epoch
            st.last_ind_ec = ec_new
            heard_ind.add(nid)

        if not st.is_initiator and (cfg.per_hop_resync or self._anchor[nid] is None):
            best = max(in_range, key=lambda t: (t.p_link, -t.node_id))
            self._anchor[nid] = t_slot
            self._grid_raw[nid] = best.offset_raw - rc * cfg.timing_error_ns * RAW_PER_NS

        if nid not in rx_slot:
            rx_slot[nid] = s
            done.add(nid)
            if version is not None and spec.slot_count > 0 and st.sync_status == JOINED:
                last = min(s + spec.slot_count, spec.max_hops - 1)
                for j in range(s + 1, last + 1):
                    tx_sched.setdefault(j, []).append((nid, version))

        if nid in intended and nid not in delivered_phase:
            delivered_phase.add(nid)
            self.delivered[nid] += 1
            if cfg.collect_deliveries:
                app: bytes | None = body
                if spec.pattern == "p2p":
                    app = body[1:]
                if self.device_keys and app is not None:
                    if st.device_key is None:
                        app = None  # cannot read the inner layer
                    else:
                        try:
                            app = device_decrypt(
                                app,
                                st.device_key,
                                device_nonce(st.predicted_ec(epoch), pc, src),
                            )
                        except AuthFailure:
                            app = None
                self.deliveries.append(Delivery(epoch, pc, nid, src, app))
