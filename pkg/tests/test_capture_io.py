"""Capture file reading: unit conversion exactness, formats, error handling."""

import logging
import struct

import pytest

from tlslayers import synth
from tlslayers.capture import CapturedFrame, open_capture
from tlslayers.errors import UnknownLinkType, UnknownMagic, UnreadableFile



def _write_pcap_us(path, records):
    with path.open("wb") as fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
        for ts_sec, ts_usec, data in records:
            fh.write(struct.pack("<IIII", ts_sec, ts_usec, len(data), len(data)))
            fh.write(data)


def test_empty_capture(tmp_path):
    path = tmp_path / "empty.pcap"
    _write_pcap_us(path, [])
    assert list(open_capture(path)) == []


def test_microsecond_timestamp_conversion_is_exact(tmp_path):
    path = tmp_path / "us.pcap"
    _write_pcap_us(path, [(1, 500_000, b"\x01\x02\x03")])
    (frame,) = open_capture(path)
    assert frame.timestamp_ns == 1_500_000_000
    assert frame.data == b"\x01\x02\x03"


def test_synth_frames_round_trip_all_formats(tmp_path, clean_scenario):
    frames, _, _ = synth.generate(clean_scenario)
    for fmt in ("pcap-us", "pcap-ns", "pcapng"):
        path = tmp_path / f"cap-{fmt}"
        synth.emit_capture(frames, path, fmt)
        back = list(open_capture(path))
        assert len(back) == len(frames)
        if fmt == "pcap-us":
            # microsecond container: encoded value is the truncated timestamp
            expected = [f.timestamp_ns // 1000 * 1000 for f in frames]
        else:
            expected = [f.timestamp_ns for f in frames]
        assert [f.timestamp_ns for f in back] == expected
        assert [f.data for f in back] == [f.data for f in frames]
        assert [f.orig_len for f in back] == [f.orig_len for f in frames]


def test_pcap_ns_preserves_sub_microsecond(tmp_path):
    frames = [CapturedFrame(timestamp_ns=1_000_000_123, link_type=1, data=b"x" * 60, orig_len=60)]
    path = tmp_path / "ns.pcap"
    synth.emit_capture(frames, path, "pcap-ns")
    (back,) = open_capture(path)
    assert back.timestamp_ns == 1_000_000_123


def test_big_endian_pcap(tmp_path):
    path = tmp_path / "be.pcap"
    with path.open("wb") as fh:
        fh.write(struct.pack(">IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
        fh.write(struct.pack(">IIII", 2, 7, 4, 4))
        fh.write(b"abcd")
    (frame,) = open_capture(path)
    assert frame.timestamp_ns == 2_000_007_000
    assert frame.data == b"abcd"


def test_unknown_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"\xde\xad\xbe\xef" + bytes(60))
    with pytest.raises(UnknownMagic):
        list(open_capture(path))


def test_missing_file():
    with pytest.raises(UnreadableFile):
        list(open_capture("/nonexistent/file.pcap"))


def test_unsupported_link_type(tmp_path):
    path = tmp_path / "wifi.pcap"
    with path.open("wb") as fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 105))
    with pytest.raises(UnknownLinkType):
        list(open_capture(path))


def test_truncated_trailing_record_skipped_with_warning(tmp_path, caplog):
    path = tmp_path / "trunc.pcap"
    with path.open("wb") as fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
        fh.write(struct.pack("<IIII", 1, 0, 4, 4))
        fh.write(b"good")
        fh.write(struct.pack("<IIII", 2, 0, 100, 100))
        fh.write(b"cut")  # body shorter than caplen
    with caplog.at_level(logging.WARNING):
        frames = list(open_capture(path))
    assert len(frames) == 1
    assert frames[0].data == b"good"
    assert any("truncated" in r.message for r in caplog.records)


def test_pcapng_skips_unknown_blocks(tmp_path, clean_scenario):
    frames, _, _ = synth.generate(clean_scenario)
    path = tmp_path / "blocks.pcapng"
    synth.emit_capture(frames, path, "pcapng")
    raw = path.read_bytes()
    # splice a custom block (type 0x0BAD) right after the SHB and IDB
    shb_len = struct.unpack_from("<I", raw, 4)[0]
    idb_len = struct.unpack_from("<I", raw, shb_len + 4)[0]
    cut = shb_len + idb_len
    custom_body = b"\x00" * 8
    custom = struct.pack("<II", 0x0BAD, len(custom_body) + 12) + custom_body + struct.pack("<I", len(custom_body) + 12)
    path.write_bytes(raw[:cut] + custom + raw[cut:])
    back = list(open_capture(path))
    assert len(back) == len(frames)


def test_pcapng_microsecond_default_resolution(tmp_path):
    path = tmp_path / "us.pcapng"
    with path.open("wb") as fh:
        shb = struct.pack("<IHHq", 0x1A2B3C4D, 1, 0, -1)
        fh.write(struct.pack("<II", 0x0A0D0D0A, 28) + shb + struct.pack("<I", 28))
        idb = struct.pack("<HHI", 1, 0, 65535)  # no if_tsresol option -> 10^-6
        fh.write(struct.pack("<II", 1, len(idb) + 12) + idb + struct.pack("<I", len(idb) + 12))
        ticks = 1_500_000  # microseconds
        data = b"z" * 16
        body = struct.pack("<IIIII", 0, ticks >> 32, ticks & 0xFFFFFFFF, len(data), len(data)) + data
        fh.write(struct.pack("<II", 6, len(body) + 12) + body + struct.pack("<I", len(body) + 12))
    (frame,) = open_capture(path)
    assert frame.timestamp_ns == 1_500_000_000
