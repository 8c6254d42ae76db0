"""Frame to TCP-segment decoding with compiled/pure kernel selection.

The header-parsing inner loop dominates ingest time on large captures, so it
lives in a small kernel with two interchangeable implementations: a Cython
extension (built at install time) and a pure-Python twin.  The compiled one
is picked at import when available; set TLSLAYERS_PURE=1 to force the pure
path.  `benchmarks/bench_decode.py` compares the two.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

from tlslayers import _decode_py
from tlslayers.capture import CapturedFrame
from tlslayers.errors import MalformedHeader

_kernel = None
if not os.environ.get("TLSLAYERS_PURE"):
    try:
        from tlslayers import _decode_cy

        _kernel = _decode_cy.decode
    except ImportError:
        _kernel = None
if _kernel is None:
    _kernel = _decode_py.decode

USING_COMPILED_KERNEL = _kernel is not _decode_py.decode


class TcpFlags(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10


@dataclass(frozen=True, slots=True)
class DecodedPacket:
    """One TCP segment; IPs are raw 4-byte (v4) or 16-byte (v6) values."""

    timestamp_ns: int
    src_ip: bytes
    dst_ip: bytes
    src_port: int
    dst_port: int
    tcp_flags: int
    seq: int
    payload: bytes
    truncated: bool

    def flag(self, f: TcpFlags) -> bool:
        return bool(self.tcp_flags & f)


def decode_frame(frame: CapturedFrame) -> DecodedPacket | None:
    """Decode one frame; returns None for non-TCP traffic (never an error).

    Raises MalformedHeader when length fields are inconsistent with the
    frame size.
    """
    try:
        fields = _kernel(frame.link_type, frame.data)
    except ValueError as exc:
        raise MalformedHeader(str(exc)) from exc
    if fields is None:
        return None
    src_ip, dst_ip, src_port, dst_port, flags, seq, pstart, pend, truncated = fields
    return DecodedPacket(
        timestamp_ns=frame.timestamp_ns,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_port=src_port,
        dst_port=dst_port,
        tcp_flags=flags,
        seq=seq,
        payload=frame.data[pstart:pend],
        truncated=truncated or frame.orig_len > len(frame.data),
    )


def available_kernels() -> dict[str, object]:
    """Decoder kernels present in this installation (for tests/benchmarks)."""
    kernels: dict[str, object] = {"pure": _decode_py.decode}
    try:
        from tlslayers import _decode_cy

        kernels["compiled"] = _decode_cy.decode
    except ImportError:
        pass
    return kernels


def format_ip(ip: bytes) -> str:
    import ipaddress

    return str(ipaddress.ip_address(ip))
