"""Pure-Python AES-128 and CCM backend.

Fallback used when the compiled extension is unavailable (and as the
reference for backend parity tests).  Encrypt-only AES is sufficient: both
CTR and CBC-MAC use the forward transform.

CCM parameters are fixed to the radio profile: 13-byte nonce (L=2 length
octets) and a 4-byte truncated MAC (M=4).
"""

from __future__ import annotations

NAME = "pure"

MIC_LEN = 4
NONCE_LEN = 13
_L = 2  # length-field octets

_SBOX = [
    0x63, 0x7C, 0x77, 0x7B, 0xF2, 0x6B, 0x6F, 0xC5, 0x30, 0x01, 0x67, 0x2B,
    0xFE, 0xD7, 0xAB, 0x76, 0xCA, 0x82, 0xC9, 0x7D, 0xFA, 0x59, 0x47, 0xF0,
    0xAD, 0xD4, 0xA2, 0xAF, 0x9C, 0xA4, 0x72, 0xC0, 0xB7, 0xFD, 0x93, 0x26,
    0x36, 0x3F, 0xF7, 0xCC, 0x34, 0xA5, 0xE5, 0xF1, 0x71, 0xD8, 0x31, 0x15,
    0x04, 0xC7, 0x23, 0xC3, 0x18, 0x96, 0x05, 0x9A, 0x07, 0x12, 0x80, 0xE2,
    0xEB, 0x27, 0xB2, 0x75, 0x09, 0x83, 0x2C, 0x1A, 0x1B, 0x6E, 0x5A, 0xA0,
    0x52, 0x3B, 0xD6, 0xB3, 0x29, 0xE3, 0x2F, 0x84, 0x53, 0xD1, 0x00, 0xED,
    0x20, 0xFC, 0xB1, 0x5B, 0x6A, 0xCB, 0xBE, 0x39, 0x4A, 0x4C, 0x58, 0xCF,
    0xD0, 0xEF, 0xAA, 0xFB, 0x43, 0x4D, 0x33, 0x85, 0x45, 0xF9, 0x02, 0x7F,
    0x50, 0x3C, 0x9F, 0xA8, 0x51, 0xA3, 0x40, 0x8F, 0x92, 0x9D, 0x38, 0xF5,
    0xBC, 0xB6, 0xDA, 0x21, 0x10, 0xFF, 0xF3, 0xD2, 0xCD, 0x0C, 0x13, 0xEC,
    0x5F, 0x97, 0x44, 0x17, 0xC4, 0xA7, 0x7E, 0x3D, 0x64, 0x5D, 0x19, 0x73,
    0x60, 0x81, 0x4F, 0xDC, 0x22, 0x2A, 0x90, 0x88, 0x46, 0xEE, 0xB8, 0x14,
    0xDE, 0x5E, 0x0B, 0xDB, 0xE0, 0x32, 0x3A, 0x0A, 0x49, 0x06, 0x24, 0x5C,
    0xC2, 0xD3, 0xAC, 0x62, 0x91, 0x95, 0xE4, 0x79, 0xE7, 0xC8, 0x37, 0x6D,
    0x8D, 0xD5, 0x4E, 0xA9, 0x6C, 0x56, 0xF4, 0xEA, 0x65, 0x7A, 0xAE, 0x08,
    0xBA, 0x78, 0x25, 0x2E, 0x1C, 0xA6, 0xB4, 0xC6, 0xE8, 0xDD, 0x74, 0x1F,
    0x4B, 0xBD, 0x8B, 0x8A, 0x70, 0x3E, 0xB5, 0x66, 0x48, 0x03, 0xF6, 0x0E,
    0x61, 0x35, 0x57, 0xB9, 0x86, 0xC1, 0x1D, 0x9E, 0xE1, 0xF8, 0x98, 0x11,
    0x69, 0xD9, 0x8E, 0x94, 0x9B, 0x1E, 0x87, 0xE9, 0xCE, 0x55, 0x28, 0xDF,
    0x8C, 0xA1, 0x89, 0x0D, 0xBF, 0xE6, 0x42, 0x68, 0x41, 0x99, 0x2D, 0x0F,
    0xB0, 0x54, 0xBB, 0x16,
]

_RCON = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36]


def _xtime(a: int) -> int:
    a <<= 1
    if a & 0x100:
        a = (a ^ 0x1B) & 0xFF
    return a


def expand_key(key: bytes) -> list[int]:
    """AES-128 key schedule as a flat list of 176 bytes."""
    if len(key) != 16:
        raise ValueError("AES-128 key must be 16 bytes")
    rk = list(key)
    for i in range(16, 176, 4):
        t = rk[i - 4 : i]
        if i % 16 == 0:
            t = [
                _SBOX[t[1]] ^ _RCON[i // 16 - 1],
                _SBOX[t[2]],
                _SBOX[t[3]],
                _SBOX[t[0]],
            ]
        rk.extend(rk[i - 16 + j] ^ t[j] for j in range(4))
    return rk


def _sub_shift(state: list[int]) -> list[int]:
    s = [_SBOX[b] for b in state]
    # column-major state: byte i is row i%4, col i//4; shift rows left
    return [
        s[0], s[5], s[10], s[15],
        s[4], s[9], s[14], s[3],
        s[8], s[13], s[2], s[7],
        s[12], s[1], s[6], s[11],
    ]


def _mix_columns(state: list[int]) -> list[int]:
    out = []
    for c in range(4):
        a = state[4 * c : 4 * c + 4]
        t = a[0] ^ a[1] ^ a[2] ^ a[3]
        out.extend(
            [
                a[0] ^ t ^ _xtime(a[0] ^ a[1]),
                a[1] ^ t ^ _xtime(a[1] ^ a[2]),
                a[2] ^ t ^ _xtime(a[2] ^ a[3]),
                a[3] ^ t ^ _xtime(a[3] ^ a[0]),
            ]
        )
    return out


def aes128_encrypt_block(key: bytes, block: bytes) -> bytes:
    """FIPS-197 forward transform of one 16-byte block."""
    if len(block) != 16:
        raise ValueError("AES block must be 16 bytes")
    rk = expand_key(key)
    state = [block[i] ^ rk[i] for i in range(16)]
    for rnd in range(1, 10):
        state = _mix_columns(_sub_shift(state))
        state = [state[i] ^ rk[16 * rnd + i] for i in range(16)]
    state = _sub_shift(state)
    state = [state[i] ^ rk[160 + i] for i in range(16)]
    return bytes(state)


def _encrypt_block_rk(rk: list[int], block: list[int]) -> list[int]:
    state = [block[i] ^ rk[i] for i in range(16)]
    for rnd in range(1, 10):
        state = _mix_columns(_sub_shift(state))
        state = [state[i] ^ rk[16 * rnd + i] for i in range(16)]
    state = _sub_shift(state)
    return [state[i] ^ rk[160 + i] for i in range(16)]


def _cbc_mac(rk: list[int], nonce: bytes, data: bytes, aad: bytes) -> bytes:
    flags = 0x09 | (0x40 if aad else 0x00)  # M'=(4-2)/2=1, L'=1
    b0 = bytes([flags]) + nonce + len(data).to_bytes(2, "big")
    blocks = bytearray(b0)
    if aad:
        a = len(aad).to_bytes(2, "big") + aad
        blocks += a
        if len(a) % 16:
            blocks += bytes(16 - len(a) % 16)
    blocks += data
    if len(data) % 16:
        blocks += bytes(16 - len(data) % 16)
    x = [0] * 16
    first = True
    for off in range(0, len(blocks), 16):
        blk = blocks[off : off + 16]
        if first:
            x = _encrypt_block_rk(rk, list(blk))
            first = False
        else:
            x = _encrypt_block_rk(rk, [x[i] ^ blk[i] for i in range(16)])
    return bytes(x[:MIC_LEN])


def _ctr_stream(rk: list[int], nonce: bytes, counter: int, n: int) -> bytes:
    out = bytearray()
    while len(out) < n:
        a = bytes([_L - 1]) + nonce + counter.to_bytes(2, "big")
        out += bytes(_encrypt_block_rk(rk, list(a)))
        counter += 1
    return bytes(out[:n])


def ccm_seal(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes) -> tuple[bytes, bytes]:
    """CCM encrypt: returns (ciphertext, 4-byte mic)."""
    if len(nonce) != NONCE_LEN:
        raise ValueError("nonce must be 13 bytes")
    rk = expand_key(key)
    tag = _cbc_mac(rk, nonce, plaintext, aad)
    s0 = _ctr_stream(rk, nonce, 0, 16)
    mic = bytes(tag[i] ^ s0[i] for i in range(MIC_LEN))
    ks = _ctr_stream(rk, nonce, 1, len(plaintext))
    ct = bytes(p ^ k for p, k in zip(plaintext, ks))
    return ct, mic


def ccm_open(key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes, mic: bytes):
    """CCM decrypt: returns plaintext, or None when the MIC does not verify."""
    if len(nonce) != NONCE_LEN:
        raise ValueError("nonce must be 13 bytes")
    rk = expand_key(key)
    ks = _ctr_stream(rk, nonce, 1, len(ciphertext))
    pt = bytes(c ^ k for c, k in zip(ciphertext, ks))
    tag = _cbc_mac(rk, nonce, pt, aad)
    s0 = _ctr_stream(rk, nonce, 0, 16)
    expect = bytes(tag[i] ^ s0[i] for i in range(MIC_LEN))
    if expect != bytes(mic):
        return None
    return pt
