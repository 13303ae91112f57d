"""Frame layout, CRC behavior, the length guard and the airtime model."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfsim._rng import stream_bytes
from sfsim.framing import (
    CrcFailure,
    LengthOverrun,
    PayloadTooLarge,
    Phy,
    airtime_ns,
    crc24,
    decode_frame,
    encode_frame,
    frame_airtime_ns,
    load_phy_table,
)


def test_empty_frame_layout():
    raw = encode_frame(b"", None)
    assert len(raw) == 1 + 3
    assert raw[0] == 0


def test_secure_frame_on_air_size():
    # 20-byte payload with MIC: 1 + 20 + 4 + 3 bytes
    raw = encode_frame(stream_bytes(20, 30, 0), b"\x01\x02\x03\x04")
    assert len(raw) == 28


def test_secure_vs_legacy_overhead_is_five_bytes():
    # the secure structure adds the length header and the MIC over the
    # legacy fixed-length frame
    for n in (0, 20, 100, 200, 251):
        payload = stream_bytes(n, 31, n)
        legacy = encode_frame(payload, None, with_length=False)
        secure = encode_frame(payload, b"\xaa\xbb\xcc\xdd")
        assert len(secure) - len(legacy) == 5


def test_round_trip_all_lengths():
    for n in range(0, 252):
        payload = stream_bytes(n, 32, n)
        raw = encode_frame(payload, None)
        fr = decode_frame(raw, max_packet_length=255, with_mic=False)
        assert fr.payload == payload
        mic = stream_bytes(4, 33, n)
        raw = encode_frame(payload, mic)
        fr = decode_frame(raw, max_packet_length=255, with_mic=True)
        assert fr.payload == payload and fr.mic == mic


def test_legacy_round_trip():
    payload = stream_bytes(40, 34, 0)
    raw = encode_frame(payload, None, with_length=False)
    fr = decode_frame(
        raw, max_packet_length=255, with_mic=False, with_length=False, expected_len=40
    )
    assert fr.payload == payload


def test_payload_too_large():
    with pytest.raises(PayloadTooLarge):
        encode_frame(bytes(252), None)


def test_length_overrun_guard():
    raw = bytearray(encode_frame(stream_bytes(20, 35, 0), b"\x00\x11\x22\x33"))
    raw[0] = 0xFF
    with pytest.raises(LengthOverrun):
        decode_frame(bytes(raw), max_packet_length=60, with_mic=True)


def test_corrupt_payload_byte_sweep():
    payload = stream_bytes(20, 36, 0)
    good = encode_frame(payload, b"\x10\x20\x30\x40")
    for i in range(1, len(good)):
        bad = bytearray(good)
        bad[i] ^= 0x01
        with pytest.raises((CrcFailure, LengthOverrun)):
            decode_frame(bytes(bad), max_packet_length=20, with_mic=True)


def test_truncated_frame_is_crc_failure():
    raw = encode_frame(stream_bytes(20, 37, 0), None)
    with pytest.raises(CrcFailure):
        decode_frame(raw[:-2], max_packet_length=255, with_mic=False)


def test_crc24_stability():
    # catches accidental polynomial or init changes
    assert crc24(b"") == 0x555555
    assert crc24(b"123456789") == crc24(b"123456789")
    assert crc24(b"123456789") != crc24(b"123456788")


@settings(max_examples=80, deadline=None)
@given(payload=st.binary(max_size=251), with_mic=st.booleans())
def test_round_trip_property(payload, with_mic):
    mic = b"\x01\x02\x03\x04" if with_mic else None
    raw = encode_frame(payload, mic)
    fr = decode_frame(raw, max_packet_length=255, with_mic=with_mic)
    assert fr.payload == payload
    assert fr.mic == mic


# --- airtime -------------------------------------------------------------------


def test_phy_table_has_all_four_bitrates(phys):
    assert sorted(phys) == ["phy_125k", "phy_1m", "phy_2m", "phy_500k"]
    rates = {p.bitrate_kbps for p in phys.values()}
    assert rates == {125, 500, 1000, 2000}


def test_per_byte_time_matches_bitrate(phys):
    # 8 bits / bitrate, including coding expansion on the coded PHYs
    for p in phys.values():
        assert p.per_byte_us == int(8_000 / p.bitrate_kbps)


def test_airtime_affine_and_monotone(phys):
    for p in phys.values():
        prev = airtime_ns(0, p)
        slope = None
        for n in range(1, 50):
            t = airtime_ns(n, p)
            assert t > prev
            if slope is None:
                slope = t - prev
            else:
                assert t - prev == slope
            prev = t
        assert slope == p.per_byte_ns


def test_airtime_extra_100_bytes_at_2m(phys):
    # 2 Mbps: 4 us per byte, so +100 bytes is +400 us
    p = phys["phy_2m"]
    assert airtime_ns(150, p) - airtime_ns(50, p) == 400_000


def test_airtime_bitrate_ratios(phys):
    # per-byte component halves when the bitrate doubles
    n = 80
    per_1m = airtime_ns(n, phys["phy_1m"]) - airtime_ns(0, phys["phy_1m"])
    per_2m = airtime_ns(n, phys["phy_2m"]) - airtime_ns(0, phys["phy_2m"])
    assert per_1m == 2 * per_2m
    per_125 = airtime_ns(n, phys["phy_125k"]) - airtime_ns(0, phys["phy_125k"])
    per_500 = airtime_ns(n, phys["phy_500k"]) - airtime_ns(0, phys["phy_500k"])
    assert per_125 == 4 * per_500


def test_airtime_decreasing_in_bitrate(phys):
    ordered = ["phy_125k", "phy_500k", "phy_1m", "phy_2m"]
    times = [airtime_ns(100, phys[n]) for n in ordered]
    assert times == sorted(times, reverse=True)


def test_frame_airtime_uses_serialized_length(phys):
    p = phys["phy_1m"]
    raw = encode_frame(stream_bytes(20, 38, 0), b"\x00\x00\x00\x00")
    assert frame_airtime_ns(raw, p) == airtime_ns(len(raw) - 3, p)


def test_airtime_length_cap(phys):
    with pytest.raises(ValueError):
        airtime_ns(261, phys["phy_1m"])


def test_custom_phy_table(tmp_path):
    path = tmp_path / "phy.yaml"
    path.write_text(
        "phy_custom:\n  bitrate_kbps: 250\n  preamble_us: 100\n  per_byte_us: 32\n"
    )
    table = load_phy_table(str(path))
    assert table["phy_custom"] == Phy("phy_custom", 250, 100, 32)
