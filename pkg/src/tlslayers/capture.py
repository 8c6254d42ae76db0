"""Packet capture ingest: classic pcap and pcapng readers.

Both formats are normalized to `CapturedFrame`s with integer-nanosecond
timestamps regardless of the file's native resolution (microsecond pcap,
nanosecond pcap, or pcapng per-interface resolution).  Truncated trailing
records are skipped with a warning rather than aborting: partial captures of
long load tests are common.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

from tlslayers.errors import MalformedHeader, UnknownLinkType, UnknownMagic, UnreadableFile

logger = logging.getLogger(__name__)

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW_IP = 101
LINKTYPE_LINUX_SLL = 113
SUPPORTED_LINK_TYPES = frozenset({LINKTYPE_ETHERNET, LINKTYPE_RAW_IP, LINKTYPE_LINUX_SLL})

PCAP_MAGIC_US = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
PCAP_MAGIC_US_SWAPPED = 0xD4C3B2A1
PCAP_MAGIC_NS_SWAPPED = 0x4D3CB2A1
PCAPNG_SHB_TYPE = 0x0A0D0D0A
PCAPNG_BYTE_ORDER_MAGIC = 0x1A2B3C4D

_SHB = 0x0A0D0D0A
_IDB = 0x00000001
_EPB = 0x00000006


@dataclass(frozen=True)
class CapturedFrame:
    """One captured link-layer frame."""

    timestamp_ns: int
    link_type: int
    data: bytes
    orig_len: int  # length on the wire; > len(data) when snap-truncated


def open_capture(path: str | Path) -> Iterator[CapturedFrame]:
    """Yield frames from a pcap or pcapng file in file order.

    Raises UnreadableFile on I/O errors, UnknownMagic if the file is neither
    format, UnknownLinkType for unsupported interfaces.
    """
    path = Path(path)
    try:
        fh = path.open("rb")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    with fh:
        try:
            head = fh.read(4)
        except OSError as exc:
            raise UnreadableFile(f"{path}: {exc}") from exc
        if len(head) < 4:
            raise UnknownMagic(f"{path}: file shorter than any capture header")
        (magic,) = struct.unpack("<I", head)
        if magic in (PCAP_MAGIC_US, PCAP_MAGIC_NS, PCAP_MAGIC_US_SWAPPED, PCAP_MAGIC_NS_SWAPPED):
            yield from _read_pcap(fh, magic, str(path))
        elif magic == PCAPNG_SHB_TYPE:
            yield from _read_pcapng(fh, str(path))
        else:
            raise UnknownMagic(f"{path}: magic 0x{magic:08X} is neither pcap nor pcapng")


def _read_pcap(fh: BinaryIO, magic: int, name: str) -> Iterator[CapturedFrame]:
    if magic in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
        endian = "<"
    else:
        endian = ">"
        magic = struct.unpack(">I", struct.pack("<I", magic))[0]
    frac_to_ns = 1000 if magic == PCAP_MAGIC_US else 1

    rest = fh.read(20)
    if len(rest) < 20:
        raise MalformedHeader(f"{name}: pcap global header truncated")
    _vmaj, _vmin, _tz, _sigfigs, _snaplen, network = struct.unpack(endian + "HHiIII", rest)
    if network not in SUPPORTED_LINK_TYPES:
        raise UnknownLinkType(f"{name}: link type {network} not supported")

    rec_hdr = struct.Struct(endian + "IIII")
    while True:
        hdr = fh.read(16)
        if not hdr:
            return
        if len(hdr) < 16:
            logger.warning("%s: truncated trailing record header, skipping", name)
            return
        ts_sec, ts_frac, caplen, origlen = rec_hdr.unpack(hdr)
        data = fh.read(caplen)
        if len(data) < caplen:
            logger.warning("%s: truncated trailing record body, skipping", name)
            return
        if caplen == 0:
            logger.warning("%s: zero-length record, skipping", name)
            continue
        ts_ns = ts_sec * 1_000_000_000 + ts_frac * frac_to_ns
        yield CapturedFrame(timestamp_ns=ts_ns, link_type=network, data=data, orig_len=origlen)


def _pcapng_ts_to_ns(ticks: int, resol_pow10: int | None, resol_pow2: int | None) -> int:
    if resol_pow2 is not None:
        return (ticks * 1_000_000_000) >> resol_pow2
    n = 6 if resol_pow10 is None else resol_pow10
    if n <= 9:
        return ticks * 10 ** (9 - n)
    return ticks // 10 ** (n - 9)


def _read_pcapng(fh: BinaryIO, name: str) -> Iterator[CapturedFrame]:
    # Per-section state; a new SHB resets endianness and the interface list.
    endian = "<"
    interfaces: list[tuple[int, int | None, int | None]] = []  # (linktype, pow10, pow2)

    # open_capture consumed the SHB block-type field already
    first = True
    while True:
        if first:
            block_type = _SHB
            lenfield = fh.read(4)
            if len(lenfield) < 4:
                raise MalformedHeader(f"{name}: pcapng SHB truncated")
            # Peek byte-order magic to pick endianness before trusting lengths.
            bom_raw = fh.read(4)
            if len(bom_raw) < 4:
                raise MalformedHeader(f"{name}: pcapng SHB truncated")
            (bom,) = struct.unpack("<I", bom_raw)
            if bom == PCAPNG_BYTE_ORDER_MAGIC:
                endian = "<"
            elif struct.unpack(">I", bom_raw)[0] == PCAPNG_BYTE_ORDER_MAGIC:
                endian = ">"
            else:
                raise UnknownMagic(f"{name}: bad pcapng byte-order magic")
            (total_len,) = struct.unpack(endian + "I", lenfield)
            # type + length + byte-order magic (12 bytes) already consumed
            body = fh.read(total_len - 12)
            if len(body) < total_len - 12:
                logger.warning("%s: truncated SHB, stopping", name)
                return
            first = False
            continue

        head = fh.read(8)
        if not head:
            return
        if len(head) < 8:
            logger.warning("%s: truncated block header, stopping", name)
            return
        block_type, total_len = struct.unpack(endian + "II", head)
        if total_len < 12 or total_len % 4 != 0:
            logger.warning("%s: implausible block length %d, stopping", name, total_len)
            return
        body = fh.read(total_len - 8)
        if len(body) < total_len - 8:
            logger.warning("%s: truncated block body, stopping", name)
            return
        body = body[:-4]  # drop trailing duplicate length

        if block_type == _SHB:
            (bom,) = struct.unpack("<I", body[:4])
            endian = "<" if bom == PCAPNG_BYTE_ORDER_MAGIC else ">"
            interfaces = []
        elif block_type == _IDB:
            if len(body) < 8:
                logger.warning("%s: short IDB, skipping", name)
                continue
            linktype, _resv, _snaplen = struct.unpack(endian + "HHI", body[:8])
            if linktype not in SUPPORTED_LINK_TYPES:
                raise UnknownLinkType(f"{name}: link type {linktype} not supported")
            pow10, pow2 = _parse_tsresol(body[8:], endian)
            interfaces.append((linktype, pow10, pow2))
        elif block_type == _EPB:
            if len(body) < 20:
                logger.warning("%s: short EPB, skipping", name)
                continue
            iface_id, ts_high, ts_low, caplen, origlen = struct.unpack(endian + "IIIII", body[:20])
            if iface_id >= len(interfaces):
                raise MalformedHeader(f"{name}: EPB references undefined interface {iface_id}")
            data = body[20 : 20 + caplen]
            if len(data) < caplen:
                logger.warning("%s: EPB shorter than caplen, skipping", name)
                continue
            if caplen == 0:
                continue
            linktype, pow10, pow2 = interfaces[iface_id]
            ticks = (ts_high << 32) | ts_low
            ts_ns = _pcapng_ts_to_ns(ticks, pow10, pow2)
            yield CapturedFrame(timestamp_ns=ts_ns, link_type=linktype, data=data, orig_len=origlen)
        # all other block types are skipped


def _parse_tsresol(options: bytes, endian: str) -> tuple[int | None, int | None]:
    """Extract if_tsresol (option 9) from an IDB option list."""
    off = 0
    while off + 4 <= len(options):
        code, length = struct.unpack(endian + "HH", options[off : off + 4])
        off += 4
        if code == 0:  # opt_endofopt
            break
        val = options[off : off + length]
        off += (length + 3) & ~3
        if code == 9 and length == 1:
            raw = val[0]
            if raw & 0x80:
                return None, raw & 0x7F
            return raw, None
    return None, None
