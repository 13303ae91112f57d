"""Authenticated encryption for synchronous flooding.

CCM (CTR + CBC-MAC over AES-128) with a 13-byte multipart nonce that both
ends of a link derive from network-synchronized counters instead of
transmitting it.  A per-engine nonce ledger enforces the one-plaintext-per
(key, nonce) discipline and flags the two reuse classes the protocol
knowingly permits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .backend import BACKEND_NAME, available_backends, impl

MIC_LEN = 4
NONCE_LEN = 13
MAX_PLAINTEXT = 251

# Measured CCM keystream latencies (ns) for the two execution models.
CCM_LATENCY_HARDWARE_NS = 80_000
CCM_LATENCY_SOFTWARE_NS = 1_556_000

REUSE_IND = "ind_zero_iv"
REUSE_MP2P = "mp2p_shared_iv"


class AuthFailure(Exception):
    """MIC verification failed; the packet must be silently discarded."""


class NonceReuseError(Exception):
    """A (key, nonce) pair was reused for a different plaintext.

    Outside the explicitly permitted classes this is a protocol-logic bug,
    not a recoverable condition.
    """


@dataclass(frozen=True)
class Key128:
    """16-byte AES key, tagged with its role (network or device)."""

    data: bytes
    role: str = "network"

    def __post_init__(self):
        if len(self.data) != 16:
            raise ValueError("Key128 must be exactly 16 bytes")
        if self.role not in ("network", "device"):
            raise ValueError("key role must be 'network' or 'device'")


@dataclass(frozen=True)
class Nonce:
    """Multipart IV: epoch counter, phase counter, relay counter.

    Serializes to 13 bytes, big-endian EC(8) || PC(2) || RC(1) || 2 zero
    pad bytes.
    """

    ec: int
    pc: int
    rc: int

    def __post_init__(self):
        if not 0 <= self.ec < 2**64:
            raise ValueError("epoch counter out of u64 range")
        if not 0 <= self.pc < 2**16:
            raise ValueError("phase counter out of u16 range")
        if not 0 <= self.rc < 2**8:
            raise ValueError("relay counter out of u8 range")

    def to_bytes(self) -> bytes:
        return (
            self.ec.to_bytes(8, "big")
            + self.pc.to_bytes(2, "big")
            + self.rc.to_bytes(1, "big")
            + b"\x00\x00"
        )


ZERO_NONCE = Nonce(0, 0, 0)


def build_nonce(ec: int, pc: int, rc: int) -> Nonce:
    return Nonce(ec, pc, rc)


@dataclass(frozen=True)
class CcmOutput:
    ciphertext: bytes
    mic: bytes


def aes128_encrypt_block(key: Key128 | bytes, block: bytes) -> bytes:
    """AES-128 forward transform of one 16-byte block."""
    kb = key.data if isinstance(key, Key128) else key
    return impl.aes128_encrypt_block(kb, block)


def ccm_encrypt(key: Key128, nonce: Nonce, plaintext: bytes, aad: bytes = b"") -> CcmOutput:
    """Encrypt and authenticate. Ciphertext length equals plaintext length."""
    if len(plaintext) > MAX_PLAINTEXT:
        raise ValueError(f"plaintext exceeds {MAX_PLAINTEXT} bytes")
    ct, mic = impl.ccm_seal(key.data, nonce.to_bytes(), plaintext, aad)
    return CcmOutput(ct, mic)


def ccm_decrypt(key: Key128, nonce: Nonce, ciphertext: bytes, aad: bytes, mic: bytes) -> bytes:
    """Verify the MIC and decrypt; raises AuthFailure on mismatch."""
    pt = impl.ccm_open(key.data, nonce.to_bytes(), ciphertext, aad, mic)
    if pt is None:
        raise AuthFailure("MIC mismatch")
    return pt


def ccm_latency(mode: str) -> int:
    """Keystream computation time in ns: 80 us hardware, 1556 us software."""
    if mode == "hardware":
        return CCM_LATENCY_HARDWARE_NS
    if mode == "software":
        return CCM_LATENCY_SOFTWARE_NS
    raise ValueError("mode must be 'hardware' or 'software'")


@dataclass
class ReuseEvent:
    reuse_class: str
    key_role: str
    nonce: bytes
    plaintext_hash: bytes


@dataclass
class NonceLedger:
    """Tracks (key, nonce) -> plaintext hashes across one engine instance.

    Retransmissions of the same plaintext are legitimate (that is how
    concurrent transmission works); a different plaintext under a used
    (key, nonce) is a violation unless the caller passes one of the two
    permitted reuse classes, in which case a flagged event is recorded.
    """

    _seen: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    violations: int = 0

    @staticmethod
    def _digest(plaintext: bytes) -> bytes:
        return hashlib.blake2b(plaintext, digest_size=16).digest()

    def record(self, key: Key128, nonce: Nonce, plaintext: bytes, reuse_class: str | None = None):
        h = self._digest(plaintext)
        k = (key.data, key.role, nonce.to_bytes())
        hashes = self._seen.get(k)
        if hashes is None:
            self._seen[k] = {h}
            return
        if h in hashes:
            return  # identical plaintext: concurrent retransmission
        hashes.add(h)
        if reuse_class in (REUSE_IND, REUSE_MP2P):
            self.events.append(ReuseEvent(reuse_class, key.role, k[2], h))
        else:
            self.violations += 1
            raise NonceReuseError(
                f"(key,{nonce.ec},{nonce.pc},{nonce.rc}) reused for a new plaintext"
            )

    def event_classes(self) -> set:
        return {e.reuse_class for e in self.events}


class CcmEngine:
    """Ledger-enforcing CCM front end owned by one simulation engine."""

    def __init__(self):
        self.ledger = NonceLedger()

    def seal(
        self,
        key: Key128,
        nonce: Nonce,
        plaintext: bytes,
        aad: bytes = b"",
        reuse_class: str | None = None,
    ) -> CcmOutput:
        self.ledger.record(key, nonce, plaintext, reuse_class)
        return ccm_encrypt(key, nonce, plaintext, aad)

    def open(self, key: Key128, nonce: Nonce, ciphertext: bytes, aad: bytes, mic: bytes) -> bytes:
        return ccm_decrypt(key, nonce, ciphertext, aad, mic)


__all__ = [
    "AuthFailure",
    "BACKEND_NAME",
    "CCM_LATENCY_HARDWARE_NS",
    "CCM_LATENCY_SOFTWARE_NS",
    "CcmEngine",
    "CcmOutput",
    "Key128",
    "MAX_PLAINTEXT",
    "MIC_LEN",
    "NONCE_LEN",
    "Nonce",
    "NonceLedger",
    "NonceReuseError",
    "REUSE_IND",
    "REUSE_MP2P",
    "ZERO_NONCE",
    "aes128_encrypt_block",
    "available_backends",
    "build_nonce",
    "ccm_decrypt",
    "ccm_encrypt",
    "ccm_latency",
]
