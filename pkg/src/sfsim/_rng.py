"""Counter-based deterministic randomness.

Every stochastic decision in the simulator is a pure function of a seed and
a tuple of integer coordinates (epoch, phase, slot, node, ...).  This keeps
runs byte-reproducible regardless of event-processing order and lets
matched experiment cells share random draws (common random numbers): two
runs that differ only in PHY, payload size or encryption mode compare the
same uniform variate against different thresholds.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Draw purposes; distinct first coordinate keeps streams independent.
P_DRIFT = 1
P_LINK = 2
P_BER = 3
P_CORRUPT_COUNT = 4
P_CORRUPT_POS = 5
P_PAYLOAD = 6
P_TOPOLOGY = 7
P_ATTACK = 8


def splitmix64(x: int) -> int:
    """One splitmix64 output step for the given 64-bit state."""
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_py(*parts: int) -> int:
    h = 0x632BE59BD9B4E019
    for p in parts:
        h = splitmix64(h ^ (p & MASK64))
    return h


def _uniform_py(*parts: int) -> float:
    return (_mix64_py(*parts) >> 11) * (2.0**-53)


try:  # hot kernels: identical outputs, compiled when available
    from .crypto._ccmcore import mix64, uniform
except ImportError:
    mix64 = _mix64_py
    uniform = _uniform_py


def mix64_py(*parts: int) -> int:
    """Pure-Python reference of the tuple hash (parity tests)."""
    return _mix64_py(*parts)


def randint(bound: int, *parts: int) -> int:
    """Integer in [0, bound) derived from the integer tuple."""
    return mix64(*parts) % bound


def stream_bytes(n: int, *parts: int) -> bytes:
    """n deterministic bytes derived from the integer tuple."""
    out = bytearray()
    i = 0
    while len(out) < n:
        out += mix64(*parts, i).to_bytes(8, "big")
        i += 1
    return bytes(out[:n])
