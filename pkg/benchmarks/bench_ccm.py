#!/usr/bin/env python3
"""Benchmark the compiled CCM core against the pure-Python fallback.

Run: python benchmarks/bench_ccm.py [--repeats N]
"""

import argparse
import time

from sfsim._rng import stream_bytes
from sfsim.crypto.backend import available_backends
from sfsim.framing import _crc24_py, crc24


def bench(fn, n):
    t0 = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - t0) / n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5000)
    args = ap.parse_args()
    n = args.repeats

    key = stream_bytes(16, 1)
    nonce = stream_bytes(13, 2)
    block = stream_bytes(16, 3)
    aad = b"\x6e"
    payloads = {20: stream_bytes(20, 4), 110: stream_bytes(110, 5), 251: stream_bytes(251, 6)}

    backends = available_backends()
    print(f"{'operation':<28}" + "".join(f"{b.NAME:>14}" for b in backends) + f"{'speedup':>10}")
    rows = []
    t = [bench(lambda be=be: be.aes128_encrypt_block(key, block), n) for be in backends]
    rows.append(("aes128 block", t))
    for size, pt in payloads.items():
        t = [bench(lambda be=be: be.ccm_seal(key, nonce, pt, aad), n) for be in backends]
        rows.append((f"ccm seal {size}B", t))
    sealed = {b.NAME: b.ccm_seal(key, nonce, payloads[110], aad) for b in backends}
    t = [
        bench(lambda be=be: be.ccm_open(key, nonce, *sealed[be.NAME][:1], aad, sealed[be.NAME][1]), n)
        for be in backends
    ]
    rows.append(("ccm open 110B", t))

    frame = stream_bytes(110, 7)
    crc_fns = [crc24, _crc24_py] if len(backends) > 1 else [crc24]
    t = [bench(lambda f=f: f(frame), n) for f in crc_fns]
    rows.append(("crc24 110B", t))

    for name, times in rows:
        line = f"{name:<28}" + "".join(f"{t * 1e6:>12.2f}us" for t in times)
        if len(times) > 1 and times[0] > 0:
            line += f"{times[-1] / times[0]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
