"""Frame decoding: both kernels, header arithmetic, truncation marking."""

import struct

import pytest

from tlslayers import synth
from tlslayers.capture import CapturedFrame
from tlslayers.decode import DecodedPacket, TcpFlags, available_kernels, decode_frame
from tlslayers.errors import MalformedHeader

from conftest import clean_connection_spec

KERNELS = sorted(available_kernels().items())


def _eth_ipv4_tcp(payload=b"", options=b"", flags=0x18, total_len_override=None):
    tcp_len = 20 + len(options) + len(payload)
    doff = (20 + len(options)) // 4
    tcp = struct.pack(">HHIIBBHHH", 40000, 443, 1000, 2000, doff << 4, flags, 65535, 0, 0)
    tcp += options + payload
    total_len = total_len_override if total_len_override is not None else 20 + tcp_len
    ip = struct.pack(
        ">BBHHHBBH4s4s", 0x45, 0, total_len, 1, 0x4000, 64, 6, 0,
        bytes([10, 0, 0, 1]), bytes([10, 0, 0, 2]),
    )
    return b"\x02" * 6 + b"\x04" * 6 + b"\x08\x00" + ip + tcp


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_arp_frame_is_non_tcp(name, kernel):
    arp = b"\xff" * 6 + b"\x02" * 6 + b"\x08\x06" + bytes(28)
    assert kernel(1, arp) is None


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_udp_is_non_tcp(name, kernel):
    ip = struct.pack(
        ">BBHHHBBH4s4s", 0x45, 0, 28, 1, 0, 64, 17, 0, bytes(4), bytes(4)
    )
    frame = b"\x02" * 6 + b"\x04" * 6 + b"\x08\x00" + ip + bytes(8)
    assert kernel(1, frame) is None


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_syn_segment_empty_payload(name, kernel):
    frame = _eth_ipv4_tcp(flags=0x02)
    fields = kernel(1, frame)
    src_ip, dst_ip, sport, dport, flags, seq, pstart, pend, truncated = fields
    assert flags == TcpFlags.SYN
    assert pend - pstart == 0
    assert not truncated
    assert (sport, dport) == (40000, 443)
    assert seq == 1000


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_options_skipped_by_data_offset(name, kernel):
    # data offset 8 words: 12 option bytes; payload must be exactly 100 bytes
    frame = _eth_ipv4_tcp(payload=b"p" * 100, options=b"\x01" * 12)
    fields = kernel(1, frame)
    pstart, pend = fields[6], fields[7]
    assert pend - pstart == 100
    assert frame[pstart:pend] == b"p" * 100


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_ethernet_trailer_padding_excluded(name, kernel):
    frame = _eth_ipv4_tcp(payload=b"q" * 10) + b"\x00" * 6  # 60-byte minimum pad
    fields = kernel(1, frame)
    pstart, pend = fields[6], fields[7]
    assert frame[pstart:pend] == b"q" * 10
    assert not fields[8]


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_snap_truncation_detected(name, kernel):
    full = _eth_ipv4_tcp(payload=b"r" * 200)
    cut = full[: len(full) - 150]
    fields = kernel(1, cut)
    assert fields[8] is True or fields[8] == 1
    pstart, pend = fields[6], fields[7]
    assert pend - pstart == 50


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_ipv4_fragment_is_skipped(name, kernel):
    tcp = struct.pack(">HHIIBBHHH", 1, 2, 0, 0, 5 << 4, 0x10, 0, 0, 0)
    ip = struct.pack(
        ">BBHHHBBH4s4s", 0x45, 0, 40, 1, 0x2000, 64, 6, 0, bytes(4), bytes(4)
    )
    frame = b"\x02" * 6 + b"\x04" * 6 + b"\x08\x00" + ip + tcp
    assert kernel(1, frame) is None


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_ipv6_tcp(name, kernel):
    payload = b"v6data"
    tcp = struct.pack(">HHIIBBHHH", 5000, 443, 7, 8, 5 << 4, 0x18, 0, 0, 0) + payload
    ip6 = struct.pack(">IHBB", 6 << 28, len(tcp), 6, 64) + bytes(range(16)) + bytes(range(16, 32))
    frame = b"\x02" * 6 + b"\x04" * 6 + b"\x86\xdd" + ip6 + tcp
    fields = kernel(1, frame)
    src_ip, dst_ip = fields[0], fields[1]
    assert src_ip == bytes(range(16))
    assert dst_ip == bytes(range(16, 32))
    assert frame[fields[6] : fields[7]] == payload


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_linux_sll_and_raw_ip(name, kernel):
    inner = _eth_ipv4_tcp(payload=b"xyz")[14:]
    sll = struct.pack(">HHH8sH", 0, 1, 6, bytes(8), 0x0800) + inner
    fields = kernel(113, sll)
    assert sll[fields[6] : fields[7]] == b"xyz"
    fields = kernel(101, inner)
    assert inner[fields[6] : fields[7]] == b"xyz"


@pytest.mark.parametrize("name,kernel", KERNELS)
def test_malformed_lengths_raise(name, kernel):
    with pytest.raises(ValueError):
        kernel(1, b"\x00" * 10)  # runt ethernet
    bad_ihl = bytearray(_eth_ipv4_tcp())
    bad_ihl[14] = 0x42  # ihl below minimum
    with pytest.raises(ValueError):
        kernel(1, bytes(bad_ihl))
    bad_doff = bytearray(_eth_ipv4_tcp())
    bad_doff[14 + 20 + 12] = 0x30  # tcp data offset below minimum
    with pytest.raises(ValueError):
        kernel(1, bytes(bad_doff))


def test_kernels_agree_on_synth_corpus():
    kernels = available_kernels()
    if len(kernels) < 2:
        pytest.skip("compiled kernel not built")
    spec = synth.ScenarioSpec(
        connections=tuple(clean_connection_spec(offset_ns=i * 10**8, seed=i) for i in range(10))
    )
    frames, _, _ = synth.generate(spec)
    for frame in frames:
        results = {name: k(frame.link_type, frame.data) for name, k in kernels.items()}
        vals = list(results.values())
        assert all(v == vals[0] for v in vals), results


def test_decode_frame_wrapper():
    frame = CapturedFrame(
        timestamp_ns=123, link_type=1, data=_eth_ipv4_tcp(payload=b"hello", flags=0x18), orig_len=0
    )
    pkt = decode_frame(frame)
    assert isinstance(pkt, DecodedPacket)
    assert pkt.timestamp_ns == 123
    assert pkt.payload == b"hello"
    assert pkt.flag(TcpFlags.ACK) and pkt.flag(TcpFlags.PSH)
    with pytest.raises(MalformedHeader):
        decode_frame(CapturedFrame(timestamp_ns=1, link_type=1, data=b"\x00" * 8, orig_len=8))


def test_decode_frame_orig_len_truncation():
    data = _eth_ipv4_tcp(payload=b"ok")
    pkt = decode_frame(CapturedFrame(timestamp_ns=1, link_type=1, data=data, orig_len=len(data) + 10))
    assert pkt.truncated
