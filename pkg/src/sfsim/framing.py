"""On-air frame layout, CRC, airtime model and the max-length guard.

Two frame structures exist on the air:

* secure:  length(1) || payload || mic(4) || crc(3)
* legacy:  payload || crc(3)              (fixed payload length, no MIC)

The legacy structure is the unencrypted baseline; a secure frame carries
exactly 5 more bytes (the length header plus the MIC) than the legacy
frame for the same payload.  The length header is authenticated as CCM
associated data but never encrypted, so a receiver can size the reception
before decryption completes.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import yaml

MAX_PAYLOAD = 251
CRC_LEN = 3
MIC_LEN = 4

_CRC24_POLY = 0x00065B
_CRC24_INIT = 0x555555


def _crc24_table():
    tab = []
    for i in range(256):
        crc = i << 16
        for _ in range(8):
            crc <<= 1
            if crc & 0x1000000:
                crc ^= 0x1000000 | _CRC24_POLY
        tab.append(crc & 0xFFFFFF)
    return tab


_CRC24_TAB = _crc24_table()


class FrameError(Exception):
    pass


class PayloadTooLarge(FrameError):
    pass


class CrcFailure(FrameError):
    pass


class LengthOverrun(FrameError):
    """Length header exceeds the configured max packet length.

    The radio clamps the receive window, discards the frame, and the hop
    schedule stays intact.
    """


@dataclass(frozen=True)
class Phy:
    """One radio bitrate mode with its measured timing constants."""

    name: str
    bitrate_kbps: int
    preamble_us: int
    per_byte_us: int
    crc_bytes: int = CRC_LEN

    @property
    def per_byte_ns(self) -> int:
        return self.per_byte_us * 1000

    @property
    def preamble_ns(self) -> int:
        return self.preamble_us * 1000


@dataclass(frozen=True)
class Frame:
    payload: bytes
    mic: bytes | None = None

    @property
    def length(self) -> int:
        return len(self.payload)


def _crc24_py(data: bytes) -> int:
    crc = _CRC24_INIT
    tab = _CRC24_TAB
    for byte in data:
        crc = ((crc << 8) ^ tab[((crc >> 16) ^ byte) & 0xFF]) & 0xFFFFFF
    return crc


try:  # hot kernel: prefer the compiled implementation
    from .crypto._ccmcore import crc24 as _crc24_impl
except ImportError:
    _crc24_impl = _crc24_py


def crc24(data: bytes) -> int:
    return _crc24_impl(data)


def encode_frame(payload: bytes, mic: bytes | None = None, *, with_length: bool = True) -> bytes:
    """Serialize a frame; CRC covers everything before it."""
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload {len(payload)} exceeds {MAX_PAYLOAD} bytes")
    if mic is not None and len(mic) != MIC_LEN:
        raise ValueError("mic must be 4 bytes")
    body = bytearray()
    if with_length:
        body.append(len(payload))
    body += payload
    if mic is not None:
        body += mic
    body += crc24(bytes(body)).to_bytes(CRC_LEN, "big")
    return bytes(body)


def decode_frame(
    raw: bytes,
    *,
    max_packet_length: int,
    with_mic: bool,
    with_length: bool = True,
    expected_len: int | None = None,
) -> Frame:
    """Parse and CRC-check a serialized frame.

    max_packet_length bounds the payload length a receiver will accept;
    a larger length header aborts reception (LengthOverrun) without
    consuming more than airtime(max_packet_length) of radio time.
    """
    if with_length:
        if not raw:
            raise CrcFailure("empty reception")
        plen = raw[0]
        if plen > max_packet_length:
            raise LengthOverrun(f"length header {plen} > max {max_packet_length}")
        start = 1
    else:
        if expected_len is None:
            raise ValueError("legacy frames need expected_len")
        plen = expected_len
        start = 0
    miclen = MIC_LEN if with_mic else 0
    total = start + plen + miclen + CRC_LEN
    if len(raw) < total:
        raise CrcFailure("truncated frame")
    body = raw[: total - CRC_LEN]
    rx_crc = int.from_bytes(raw[total - CRC_LEN : total], "big")
    if crc24(body) != rx_crc:
        raise CrcFailure("crc mismatch")
    payload = raw[start : start + plen]
    mic = raw[start + plen : start + plen + miclen] if with_mic else None
    return Frame(bytes(payload), bytes(mic) if mic is not None else None)


def airtime_ns(frame_len_bytes: int, phy: Phy) -> int:
    """Time on air for a frame of the given length (length+payload+mic).

    Affine model: a fixed term for preamble plus CRC, and a per-byte term.
    """
    if frame_len_bytes > 255 + 5:
        raise ValueError("frame too long for the airtime model")
    return phy.preamble_ns + (frame_len_bytes + phy.crc_bytes) * phy.per_byte_ns


def frame_airtime_ns(raw: bytes, phy: Phy) -> int:
    """Airtime of a serialized frame (its CRC is covered by the fixed term)."""
    return airtime_ns(len(raw) - phy.crc_bytes, phy)


def load_phy_table(path: str | None = None) -> dict[str, Phy]:
    """Load the per-PHY timing table (name -> preamble_us/per_byte_us/crc)."""
    if path is None:
        text = resources.files("sfsim").joinpath("data/phy_timings.yaml").read_text()
    else:
        with open(path) as f:
            text = f.read()
    table = yaml.safe_load(text)
    phys = {}
    for name, row in table.items():
        phys[name] = Phy(
            name=name,
            bitrate_kbps=int(row["bitrate_kbps"]),
            preamble_us=int(row["preamble_us"]),
            per_byte_us=int(row["per_byte_us"]),
            crc_bytes=int(row.get("crc_bytes", CRC_LEN)),
        )
    return phys
