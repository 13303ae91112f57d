# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled AES-128/CCM core.

T-table AES with the CCM (M=4, L=2) seal/open loops in C. Same interface
as the pure backend; selected at import by sfsim.crypto.backend.
"""

from cpython.bytes cimport PyBytes_FromStringAndSize, PyBytes_AS_STRING
from libc.string cimport memcpy, memset

NAME = "compiled"

MIC_LEN = 4
NONCE_LEN = 13

cdef unsigned char SBOX[256]
cdef unsigned int TE0[256]
cdef unsigned int TE1[256]
cdef unsigned int TE2[256]
cdef unsigned int TE3[256]
cdef unsigned int RCON[10]
cdef unsigned int CRC24_TAB[256]

_SBOX_PY = [
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


def _init_tables():
    cdef int i
    cdef unsigned int s, s2, s3
    rcon = 1
    for i in range(10):
        RCON[i] = rcon << 24
        rcon = (rcon << 1) ^ (0x11B if rcon & 0x80 else 0)
        rcon &= 0xFF
    for i in range(256):
        s = _SBOX_PY[i]
        SBOX[i] = s
        s2 = (s << 1) ^ (0x1B if s & 0x80 else 0)
        s2 &= 0xFF
        s3 = s2 ^ s
        TE0[i] = (s2 << 24) | (s << 16) | (s << 8) | s3
        TE1[i] = (s3 << 24) | (s2 << 16) | (s << 8) | s
        TE2[i] = (s << 24) | (s3 << 16) | (s2 << 8) | s
        TE3[i] = (s << 24) | (s << 16) | (s3 << 8) | s2
    cdef unsigned int crc, j
    for i in range(256):
        crc = (<unsigned int> i) << 16
        for j in range(8):
            crc <<= 1
            if crc & 0x1000000:
                crc ^= 0x100065B
        CRC24_TAB[i] = crc & 0xFFFFFF


_init_tables()


cdef inline unsigned int _getu32(const unsigned char *p) nogil:
    return ((<unsigned int> p[0]) << 24) | ((<unsigned int> p[1]) << 16) | \
           ((<unsigned int> p[2]) << 8) | (<unsigned int> p[3])


cdef inline void _putu32(unsigned char *p, unsigned int v) nogil:
    p[0] = <unsigned char> (v >> 24)
    p[1] = <unsigned char> (v >> 16)
    p[2] = <unsigned char> (v >> 8)
    p[3] = <unsigned char> v


cdef void _expand_key(const unsigned char *key, unsigned int *rk) nogil:
    cdef int i
    cdef unsigned int t
    for i in range(4):
        rk[i] = _getu32(key + 4 * i)
    for i in range(4, 44):
        t = rk[i - 1]
        if i % 4 == 0:
            t = ((<unsigned int> SBOX[(t >> 16) & 0xFF]) << 24) | \
                ((<unsigned int> SBOX[(t >> 8) & 0xFF]) << 16) | \
                ((<unsigned int> SBOX[t & 0xFF]) << 8) | \
                (<unsigned int> SBOX[(t >> 24) & 0xFF])
            t ^= RCON[i // 4 - 1]
        rk[i] = rk[i - 4] ^ t


cdef void _enc_block(const unsigned int *rk, const unsigned char *inp,
                     unsigned char *outp) nogil:
    cdef unsigned int s0, s1, s2, s3, t0, t1, t2, t3
    cdef int r
    s0 = _getu32(inp) ^ rk[0]
    s1 = _getu32(inp + 4) ^ rk[1]
    s2 = _getu32(inp + 8) ^ rk[2]
    s3 = _getu32(inp + 12) ^ rk[3]
    for r in range(1, 10):
        t0 = TE0[s0 >> 24] ^ TE1[(s1 >> 16) & 0xFF] ^ TE2[(s2 >> 8) & 0xFF] ^ \
             TE3[s3 & 0xFF] ^ rk[4 * r]
        t1 = TE0[s1 >> 24] ^ TE1[(s2 >> 16) & 0xFF] ^ TE2[(s3 >> 8) & 0xFF] ^ \
             TE3[s0 & 0xFF] ^ rk[4 * r + 1]
        t2 = TE0[s2 >> 24] ^ TE1[(s3 >> 16) & 0xFF] ^ TE2[(s0 >> 8) & 0xFF] ^ \
             TE3[s1 & 0xFF] ^ rk[4 * r + 2]
        t3 = TE0[s3 >> 24] ^ TE1[(s0 >> 16) & 0xFF] ^ TE2[(s1 >> 8) & 0xFF] ^ \
             TE3[s2 & 0xFF] ^ rk[4 * r + 3]
        s0 = t0
        s1 = t1
        s2 = t2
        s3 = t3
    t0 = ((<unsigned int> SBOX[s0 >> 24]) << 24) | \
         ((<unsigned int> SBOX[(s1 >> 16) & 0xFF]) << 16) | \
         ((<unsigned int> SBOX[(s2 >> 8) & 0xFF]) << 8) | \
         (<unsigned int> SBOX[s3 & 0xFF])
    t1 = ((<unsigned int> SBOX[s1 >> 24]) << 24) | \
         ((<unsigned int> SBOX[(s2 >> 16) & 0xFF]) << 16) | \
         ((<unsigned int> SBOX[(s3 >> 8) & 0xFF]) << 8) | \
         (<unsigned int> SBOX[s0 & 0xFF])
    t2 = ((<unsigned int> SBOX[s2 >> 24]) << 24) | \
         ((<unsigned int> SBOX[(s3 >> 16) & 0xFF]) << 16) | \
         ((<unsigned int> SBOX[(s0 >> 8) & 0xFF]) << 8) | \
         (<unsigned int> SBOX[s1 & 0xFF])
    t3 = ((<unsigned int> SBOX[s3 >> 24]) << 24) | \
         ((<unsigned int> SBOX[(s0 >> 16) & 0xFF]) << 16) | \
         ((<unsigned int> SBOX[(s1 >> 8) & 0xFF]) << 8) | \
         (<unsigned int> SBOX[s2 & 0xFF])
    _putu32(outp, t0 ^ rk[40])
    _putu32(outp + 4, t1 ^ rk[41])
    _putu32(outp + 8, t2 ^ rk[42])
    _putu32(outp + 12, t3 ^ rk[43])


cdef void _mac_section(const unsigned int *rk, unsigned char *x,
                       const unsigned char *pre, Py_ssize_t prelen,
                       const unsigned char *body, Py_ssize_t bodylen) nogil:
    # feeds (pre || body) zero-padded to a block multiple into the CBC chain
    cdef unsigned char blk[16]
    cdef Py_ssize_t total = prelen + bodylen
    cdef Py_ssize_t off = 0
    cdef Py_ssize_t i, pos
    while off < total:
        for i in range(16):
            pos = off + i
            if pos < prelen:
                blk[i] = pre[pos]
            elif pos < total:
                blk[i] = body[pos - prelen]
            else:
                blk[i] = 0
        for i in range(16):
            x[i] ^= blk[i]
        _enc_block(rk, x, x)
        off += 16


cdef void _cbc_mac(const unsigned int *rk, const unsigned char *nonce,
                   const unsigned char *data, Py_ssize_t dlen,
                   const unsigned char *aad, Py_ssize_t alen,
                   unsigned char *tag4) nogil:
    cdef unsigned char x[16]
    cdef unsigned char b0[16]
    cdef unsigned char lenbuf[2]
    b0[0] = 0x09 | (0x40 if alen > 0 else 0x00)
    memcpy(b0 + 1, nonce, 13)
    b0[14] = <unsigned char> (dlen >> 8)
    b0[15] = <unsigned char> dlen
    _enc_block(rk, b0, x)
    if alen > 0:
        lenbuf[0] = <unsigned char> (alen >> 8)
        lenbuf[1] = <unsigned char> alen
        _mac_section(rk, x, lenbuf, 2, aad, alen)
    if dlen > 0:
        _mac_section(rk, x, NULL, 0, data, dlen)
    memcpy(tag4, x, 4)


cdef void _ctr_xor(const unsigned int *rk, const unsigned char *nonce,
                   unsigned int counter, const unsigned char *inp,
                   unsigned char *outp, Py_ssize_t n) nogil:
    cdef unsigned char a[16]
    cdef unsigned char s[16]
    cdef Py_ssize_t off = 0
    cdef Py_ssize_t i, m
    a[0] = 0x01
    memcpy(a + 1, nonce, 13)
    while off < n:
        a[14] = <unsigned char> (counter >> 8)
        a[15] = <unsigned char> counter
        _enc_block(rk, a, s)
        m = n - off
        if m > 16:
            m = 16
        for i in range(m):
            outp[off + i] = inp[off + i] ^ s[i]
        off += 16
        counter += 1


def aes128_encrypt_block(key, block):
    """FIPS-197 forward transform of one 16-byte block."""
    cdef bytes k = bytes(key)
    cdef bytes b = bytes(block)
    if len(k) != 16:
        raise ValueError("AES-128 key must be 16 bytes")
    if len(b) != 16:
        raise ValueError("AES block must be 16 bytes")
    cdef unsigned int rk[44]
    _expand_key(<const unsigned char *> PyBytes_AS_STRING(k), rk)
    out = PyBytes_FromStringAndSize(NULL, 16)
    _enc_block(rk, <const unsigned char *> PyBytes_AS_STRING(b),
               <unsigned char *> PyBytes_AS_STRING(out))
    return out


def ccm_seal(key, nonce, plaintext, aad):
    """CCM encrypt: returns (ciphertext, 4-byte mic)."""
    cdef bytes k = bytes(key)
    cdef bytes n13 = bytes(nonce)
    cdef bytes pt = bytes(plaintext)
    cdef bytes ad = bytes(aad)
    if len(k) != 16:
        raise ValueError("AES-128 key must be 16 bytes")
    if len(n13) != 13:
        raise ValueError("nonce must be 13 bytes")
    if len(pt) > 0xFFFF or len(ad) > 0xFEFF:
        raise ValueError("input too long for L=2 CCM")
    cdef unsigned int rk[44]
    cdef unsigned char tag[4]
    cdef unsigned char s0[16]
    cdef unsigned char zeros[16]
    cdef Py_ssize_t dlen = len(pt)
    cdef const unsigned char *np = <const unsigned char *> PyBytes_AS_STRING(n13)
    _expand_key(<const unsigned char *> PyBytes_AS_STRING(k), rk)
    _cbc_mac(rk, np, <const unsigned char *> PyBytes_AS_STRING(pt), dlen,
             <const unsigned char *> PyBytes_AS_STRING(ad), len(ad), tag)
    memset(zeros, 0, 16)
    _ctr_xor(rk, np, 0, zeros, s0, 16)
    mic = PyBytes_FromStringAndSize(NULL, 4)
    cdef unsigned char *micp = <unsigned char *> PyBytes_AS_STRING(mic)
    cdef int i
    for i in range(4):
        micp[i] = tag[i] ^ s0[i]
    ct = PyBytes_FromStringAndSize(NULL, dlen)
    _ctr_xor(rk, np, 1, <const unsigned char *> PyBytes_AS_STRING(pt),
             <unsigned char *> PyBytes_AS_STRING(ct), dlen)
    return ct, mic


def crc24(data):
    """CRC-24 (poly 0x65B, init 0x555555) over the given bytes."""
    cdef bytes b = bytes(data)
    cdef const unsigned char *p = <const unsigned char *> PyBytes_AS_STRING(b)
    cdef Py_ssize_t n = len(b)
    cdef unsigned int crc = 0x555555
    cdef Py_ssize_t i
    for i in range(n):
        crc = ((crc << 8) ^ CRC24_TAB[((crc >> 16) ^ p[i]) & 0xFF]) & 0xFFFFFF
    return crc


def mix64(*parts):
    """splitmix64-fold of an integer tuple (same output as the pure hash)."""
    cdef unsigned long long h = 0x632BE59BD9B4E019ULL
    cdef unsigned long long z
    for p in parts:
        h = h ^ (<unsigned long long> (p & 0xFFFFFFFFFFFFFFFF))
        h = h + 0x9E3779B97F4A7C15ULL
        z = h
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
        h = z ^ (z >> 31)
    return h


def uniform(*parts):
    """Uniform float in [0, 1) derived from the integer tuple."""
    cdef unsigned long long h = 0x632BE59BD9B4E019ULL
    cdef unsigned long long z
    for p in parts:
        h = h ^ (<unsigned long long> (p & 0xFFFFFFFFFFFFFFFF))
        h = h + 0x9E3779B97F4A7C15ULL
        z = h
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
        h = z ^ (z >> 31)
    return <double> (h >> 11) * (2.0 ** -53)


def ccm_open(key, nonce, ciphertext, aad, mic):
    """CCM decrypt: returns plaintext, or None when the MIC does not verify."""
    cdef bytes k = bytes(key)
    cdef bytes n13 = bytes(nonce)
    cdef bytes ct = bytes(ciphertext)
    cdef bytes ad = bytes(aad)
    cdef bytes mc = bytes(mic)
    if len(k) != 16:
        raise ValueError("AES-128 key must be 16 bytes")
    if len(n13) != 13:
        raise ValueError("nonce must be 13 bytes")
    if len(mc) != 4:
        raise ValueError("mic must be 4 bytes")
    cdef unsigned int rk[44]
    cdef unsigned char tag[4]
    cdef unsigned char s0[16]
    cdef unsigned char zeros[16]
    cdef Py_ssize_t dlen = len(ct)
    cdef const unsigned char *np = <const unsigned char *> PyBytes_AS_STRING(n13)
    _expand_key(<const unsigned char *> PyBytes_AS_STRING(k), rk)
    pt = PyBytes_FromStringAndSize(NULL, dlen)
    _ctr_xor(rk, np, 1, <const unsigned char *> PyBytes_AS_STRING(ct),
             <unsigned char *> PyBytes_AS_STRING(pt), dlen)
    _cbc_mac(rk, np, <const unsigned char *> PyBytes_AS_STRING(pt), dlen,
             <const unsigned char *> PyBytes_AS_STRING(ad), len(ad), tag)
    memset(zeros, 0, 16)
    _ctr_xor(rk, np, 0, zeros, s0, 16)
    cdef const unsigned char *mp = <const unsigned char *> PyBytes_AS_STRING(mc)
    cdef int i
    cdef int bad = 0
    for i in range(4):
        if (tag[i] ^ s0[i]) != mp[i]:
            bad = 1
    if bad:
        return None
    return pt
