"""Flooding protocol state: epochs, phases, counters, hopping and joining.

Each epoch opens with an indicator flood (IND) that carries the epoch
counter under the all-zero nonce so unjoined nodes can decode it; data
phases follow, encrypted under nonces both ends derive from their own
(EC, PC, RC) counters.  The relay counter doubles as the channel-hopping
index, so a receiver that knows which slot it is listening in also knows
the nonce of any packet it can authenticate.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction

from ._rng import mix64
from .crypto import AuthFailure, CcmEngine, Key128, Nonce, build_nonce

PATTERNS = ("p2p", "p2mp", "mp2p")

UNJOINED = "unjoined"
JOINED = "joined"
DESYNCED = "desynced"

# Channel plan: 37 data channels plus a fixed join channel every
# guaranteed slot.  The guaranteed slots rotate with the epoch counter so
# that every slot index lands on the join channel once per period.
N_DATA_CHANNELS = 37
GUARANTEED_CHANNEL = 37
GUARANTEED_PERIOD = 4
_HOP_SALT = 0x5F0C7B1E2D4A3968


class ConfigError(Exception):
    pass


class StoreCorrupt(Exception):
    """EC persistence record unreadable; the node must not transmit."""


@dataclass(frozen=True)
class PhaseSpec:
    """One flood within the epoch schedule."""

    pattern: str
    initiators: tuple[int, ...]
    payload_len: int
    max_hops: int
    slot_count: int = 3
    target: int | None = None
    is_ind: bool = False

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ConfigError(f"unknown pattern {self.pattern!r}")
        if self.pattern in ("p2p", "p2mp") and len(self.initiators) != 1:
            raise ConfigError(f"{self.pattern} needs exactly one initiator")
        if self.pattern == "mp2p" and not self.initiators:
            raise ConfigError("mp2p needs at least one initiator")
        if self.pattern == "p2p" and self.target is None:
            raise ConfigError("p2p needs a target node")
        if self.max_hops < 1 or self.max_hops > 255:
            raise ConfigError("max_hops must be in 1..255")
        if self.slot_count < 0:
            raise ConfigError("slot_count must be >= 0")


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch interval plus the ordered phase list; phase 0 is the IND."""

    epoch_interval_ns: int
    phases: tuple[PhaseSpec, ...]

    def __post_init__(self):
        if not self.phases or not self.phases[0].is_ind:
            raise ConfigError("first phase of every epoch must be the IND")
        if any(p.is_ind for p in self.phases[1:]):
            raise ConfigError("only phase 0 may be the IND")


def hop_channel(ec: int, slot_index: int, *, period: int = GUARANTEED_PERIOD) -> int:
    """Channel for a slot: EC-seeded pseudo-random, with guaranteed slots.

    Slots where (slot_index + ec) % period == 0 always use the fixed join
    channel regardless of the seed; the rest draw uniformly from the data
    channels.
    """
    if (slot_index + ec) % period == 0:
        return GUARANTEED_CHANNEL
    return mix64(_HOP_SALT, ec, slot_index) % N_DATA_CHANNELS


def is_guaranteed_slot(ec: int, slot_index: int, *, period: int = GUARANTEED_PERIOD) -> bool:
    return (slot_index + ec) % period == 0


def compute_reference_time(local_rx_time_ns: int, rc: int, hop_duration_ns: int) -> int:
    """Initiator clock value at its own transmission, rebuilt from the RC.

    Every receiver of the same flood obtains the same value no matter how
    many hops away it sits: rx_time - rc * hop_duration.
    """
    return local_rx_time_ns - rc * hop_duration_ns


@dataclass
class ClockState:
    """Slot-grid alignment of one node relative to the initiator's grid.

    grid_offset_ns is the inherited scheduling error (exact arithmetic);
    drift accumulates on top of it from the anchor slot time onward.
    """

    drift_ppm: Fraction = Fraction(0)
    grid_offset_ns: Fraction = Fraction(0)
    anchor_ns: int | None = None

    def offset_at(self, t_ns: int) -> Fraction:
        if self.anchor_ns is None:
            return Fraction(0)
        return self.grid_offset_ns + self.drift_ppm * (t_ns - self.anchor_ns) / 1_000_000

    def sync(self, slot_time_ns: int, inherited_offset_ns: Fraction):
        self.anchor_ns = slot_time_ns
        self.grid_offset_ns = inherited_offset_ns


@dataclass
class NodeState:
    node_id: int
    network_key: Key128
    device_key: Key128 | None = None
    sync_status: str = UNJOINED
    ec: int = 0
    adopted_epoch: int = -1
    last_ind_ec: int = -1
    missed_inds: int = 0
    clock: ClockState = field(default_factory=ClockState)
    is_initiator: bool = False
    alive: bool = True

    def predicted_ec(self, epoch_index: int) -> int:
        """EC this node expects for the given epoch, extrapolated from the
        last adopted IND."""
        if self.adopted_epoch < 0:
            return self.ec
        return self.ec + (epoch_index - self.adopted_epoch)


class EcStore:
    """Non-volatile epoch-counter records, one little-endian u64 per node.

    Backed by a directory when given one (the run's state dir), otherwise
    in-memory.  restore() hands back the persisted value; callers must
    advance past it before initiating.
    """

    def __init__(self, directory: str | None = None):
        self.directory = directory
        self._mem: dict[int, bytes] = {}
        if directory:
            os.makedirs(directory, exist_ok=True)

    def _path(self, node_id: int) -> str:
        return os.path.join(self.directory, f"node{node_id:04d}.ec")

    def persist(self, node_id: int, ec: int):
        rec = ec.to_bytes(8, "little")
        if self.directory:
            with open(self._path(node_id), "wb") as f:
                f.write(rec)
        else:
            self._mem[node_id] = rec

    def restore(self, node_id: int) -> int | None:
        if self.directory:
            try:
                with open(self._path(node_id), "rb") as f:
                    rec = f.read()
            except FileNotFoundError:
                return None
        else:
            rec = self._mem.get(node_id)
            if rec is None:
                return None
        if len(rec) != 8:
            raise StoreCorrupt(f"EC record for node {node_id} is {len(rec)} bytes")
        return int.from_bytes(rec, "little")

    def corrupt(self, node_id: int):
        """Damage a record (test hook for the fail-closed path)."""
        if self.directory:
            with open(self._path(node_id), "wb") as f:
                f.write(b"\x00")
        else:
            self._mem[node_id] = b"\x00"


def restore_ec_after_restart(store: EcStore, node_id: int) -> int:
    """EC to resume with after a restart: strictly past every persisted use.

    Raises StoreCorrupt when the record is damaged; the caller must keep
    the node out of encrypted floods until a rejoin assigns a safe EC.
    """
    persisted = store.restore(node_id)
    if persisted is None:
        return 0
    return persisted + 1


# --- flood payload layout -------------------------------------------------
# plaintext = rc(1) || src(1) || body
# IND body  = ec(8, big-endian)
# P2P body  = target(1) || app payload
# data body = app payload

HEADER_LEN = 2
IND_BODY_LEN = 8


def pack_payload(rc: int, src: int, body: bytes) -> bytes:
    return bytes((rc, src)) + body


def unpack_payload(plaintext: bytes) -> tuple[int, int, bytes]:
    if len(plaintext) < HEADER_LEN:
        raise ValueError("plaintext shorter than the protocol header")
    return plaintext[0], plaintext[1], plaintext[HEADER_LEN:]


def pack_ind_body(ec: int) -> bytes:
    return ec.to_bytes(IND_BODY_LEN, "big")


def unpack_ind_body(body: bytes) -> int:
    if len(body) < IND_BODY_LEN:
        raise ValueError("IND body too short")
    return int.from_bytes(body[:IND_BODY_LEN], "big")


# --- device-key layer -----------------------------------------------------


def device_nonce(ec: int, pc: int, initiator_id: int) -> Nonce:
    """Application-layer nonce: the initiator id takes the RC byte so
    per-initiator inner nonces never collide within a phase."""
    if not 0 <= initiator_id <= 255:
        raise ValueError("initiator id must fit the RC byte")
    return build_nonce(ec, pc, initiator_id)


def device_encrypt(
    payload: bytes, device_key: Key128, app_nonce: Nonce, engine: CcmEngine
) -> bytes:
    """Inner encryption layer; runs outside the flood slot timeline."""
    if device_key.role != "device":
        raise ValueError("device layer requires a device-role key")
    out = engine.seal(device_key, app_nonce, payload)
    return out.ciphertext + out.mic


def device_decrypt(blob: bytes, device_key: Key128, app_nonce: Nonce) -> bytes:
    from .crypto import MIC_LEN, ccm_decrypt

    if len(blob) < MIC_LEN:
        raise AuthFailure("inner blob shorter than a MIC")
    return ccm_decrypt(device_key, app_nonce, blob[:-MIC_LEN], b"", blob[-MIC_LEN:])
