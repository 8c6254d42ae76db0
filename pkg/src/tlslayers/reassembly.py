"""TCP stream reassembly with first-arrival timestamping.

Packets are grouped into bidirectional connections keyed by the four-tuple,
oriented by the SYN direction.  Each direction becomes a contiguous byte
stream (starting at ISN+1) plus an offset-to-timestamp map recording when
each byte range FIRST crossed the wire; retransmissions never overwrite the
first arrival, so reassembly is insensitive to capture-file ordering.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable

from tlslayers.decode import DecodedPacket, TcpFlags
from tlslayers.errors import GapAtOffset

logger = logging.getLogger(__name__)

_SEQ_MOD = 1 << 32
_FORWARD_WINDOW = 1 << 30  # relative offsets past this are treated as pre-ISN junk

FLAG_COMPLETE = "complete"
FLAG_PARTIAL = "partial"
FLAG_RESET = "reset"


@dataclass(frozen=True)
class FlowKey:
    """Connection endpoints; orientation fixed by the SYN direction."""

    client_ip: bytes
    server_ip: bytes
    client_port: int
    server_port: int


class DirectionalStream:
    """One direction's reassembled bytes and per-offset first-arrival times."""

    __slots__ = ("data", "_offsets", "_times", "has_gap", "total_span")

    def __init__(self, data: bytes, offsets_ts: list[tuple[int, int]], has_gap: bool, total_span: int):
        self.data = data
        self._offsets = [o for o, _ in offsets_ts]
        self._times = [t for _, t in offsets_ts]
        self.has_gap = has_gap
        self.total_span = total_span

    def __len__(self) -> int:
        return len(self.data)

    @property
    def offsets_ts(self) -> list[tuple[int, int]]:
        return list(zip(self._offsets, self._times))

    def timestamp_at(self, offset: int) -> int:
        """Arrival time of the segment that first carried the byte at offset."""
        if offset < 0:
            raise ValueError(f"negative offset {offset}")
        if offset >= len(self.data):
            raise GapAtOffset(f"offset {offset} beyond contiguous data ({len(self.data)} bytes)")
        idx = bisect_right(self._offsets, offset) - 1
        if idx < 0:
            raise GapAtOffset(f"offset {offset} precedes first mapped byte")
        return self._times[idx]


def timestamp_at(stream: DirectionalStream, offset: int) -> int:
    return stream.timestamp_at(offset)


EMPTY_STREAM = DirectionalStream(b"", [], False, 0)


@dataclass
class TcpConnection:
    key: FlowKey
    t_syn: int | None
    t_synack: int | None
    client_to_server: DirectionalStream
    server_to_client: DirectionalStream
    flags: set[str]
    anomalies: set[str] = field(default_factory=set)
    truncated: bool = False
    first_ts: int = 0
    incarnation: int = 0

    def sort_key(self) -> tuple:
        return (
            self.t_syn if self.t_syn is not None else self.first_ts,
            self.key.client_ip,
            self.key.client_port,
            self.key.server_ip,
            self.key.server_port,
            self.incarnation,
        )


class _Incarnation:
    """Mutable state for one SYN-initiated connection instance."""

    __slots__ = (
        "client", "server", "isn_c", "isn_s", "t_syn", "t_synack",
        "segs_c", "segs_s", "anomalies", "reset", "fin_c", "fin_s",
        "truncated", "first_ts", "index",
    )

    def __init__(self, client: tuple[bytes, int], server: tuple[bytes, int], first_ts: int, index: int):
        self.client = client
        self.server = server
        self.isn_c: int | None = None
        self.isn_s: int | None = None
        self.t_syn: int | None = None
        self.t_synack: int | None = None
        self.segs_c: list[tuple[int, bytes, int]] = []  # (seq, payload, ts)
        self.segs_s: list[tuple[int, bytes, int]] = []
        self.anomalies: set[str] = set()
        self.reset = False
        self.fin_c = False
        self.fin_s = False
        self.truncated = False
        self.first_ts = first_ts
        self.index = index

    @property
    def closed(self) -> bool:
        return self.reset or (self.fin_c and self.fin_s)


def assemble_connections(packets: Iterable[DecodedPacket]) -> list[TcpConnection]:
    """Group packets into connections; one per SYN-initiated incarnation.

    Nothing here is fatal: anomalies (duplicate SYN with a new ISN,
    inconsistent overlapping data) flag the connection partial instead.
    """
    groups: dict[tuple, list[tuple[int, DecodedPacket]]] = {}
    for idx, pkt in enumerate(packets):
        a = (pkt.src_ip, pkt.src_port)
        b = (pkt.dst_ip, pkt.dst_port)
        canon = (a, b) if a <= b else (b, a)
        groups.setdefault(canon, []).append((idx, pkt))

    connections: list[TcpConnection] = []
    for canon in sorted(groups):
        entries = groups[canon]
        # first-arrival semantics: order by timestamp, file order breaks ties
        entries.sort(key=lambda e: (e[1].timestamp_ns, e[0]))
        connections.extend(_walk_group(entries))
    return connections


def _walk_group(entries: list[tuple[int, DecodedPacket]]) -> list[TcpConnection]:
    done: list[TcpConnection] = []
    curr: _Incarnation | None = None
    count = 0

    for _, pkt in entries:
        src = (pkt.src_ip, pkt.src_port)
        dst = (pkt.dst_ip, pkt.dst_port)
        syn = pkt.flag(TcpFlags.SYN)
        ack = pkt.flag(TcpFlags.ACK)

        if syn and not ack:
            if curr is None or curr.closed:
                if curr is not None:
                    done.append(_finalize(curr))
                curr = _Incarnation(src, dst, pkt.timestamp_ns, count)
                count += 1
                curr.isn_c = pkt.seq
                curr.t_syn = pkt.timestamp_ns
            elif src == curr.client:
                if pkt.seq != curr.isn_c:
                    curr.anomalies.add("dual_isn")
                # retransmitted SYN: entries are time-ordered, first wins
            else:
                curr.anomalies.add("simultaneous_open")
            continue

        if curr is None:
            # mid-stream capture: orientation unknown, flagged downstream
            curr = _Incarnation(src, dst, pkt.timestamp_ns, count)
            count += 1

        if syn and ack:
            if src == curr.server:
                if curr.isn_s is None:
                    curr.isn_s = pkt.seq
                    curr.t_synack = pkt.timestamp_ns
                elif pkt.seq != curr.isn_s:
                    curr.anomalies.add("dual_isn")
            else:
                curr.anomalies.add("synack_from_client")
            continue

        if pkt.flag(TcpFlags.RST):
            curr.reset = True
            continue
        if pkt.flag(TcpFlags.FIN):
            if src == curr.client:
                curr.fin_c = True
            else:
                curr.fin_s = True

        if pkt.truncated:
            curr.truncated = True
        if pkt.payload:
            if src == curr.client:
                curr.segs_c.append((pkt.seq, pkt.payload, pkt.timestamp_ns))
            elif src == curr.server:
                curr.segs_s.append((pkt.seq, pkt.payload, pkt.timestamp_ns))

    if curr is not None:
        done.append(_finalize(curr))
    return done


def _finalize(inc: _Incarnation) -> TcpConnection:
    anomalies = set(inc.anomalies)
    c2s = _build_stream(inc.segs_c, inc.isn_c, anomalies)
    s2c = _build_stream(inc.segs_s, inc.isn_s, anomalies)

    flags: set[str] = set()
    if inc.reset:
        flags.add(FLAG_RESET)
    has_data = bool(len(c2s) or len(s2c))
    gap = c2s.has_gap or s2c.has_gap
    if anomalies or gap or inc.truncated or inc.t_syn is None or inc.t_synack is None or not has_data:
        flags.add(FLAG_PARTIAL)
    else:
        flags.add(FLAG_COMPLETE)

    return TcpConnection(
        key=FlowKey(inc.client[0], inc.server[0], inc.client[1], inc.server[1]),
        t_syn=inc.t_syn,
        t_synack=inc.t_synack,
        client_to_server=c2s,
        server_to_client=s2c,
        flags=flags,
        anomalies=anomalies,
        truncated=inc.truncated,
        first_ts=inc.first_ts,
        incarnation=inc.index,
    )


def _build_stream(segs: list[tuple[int, bytes, int]], isn: int | None, anomalies: set[str]) -> DirectionalStream:
    if not segs:
        return EMPTY_STREAM
    if isn is None:
        # no SYN/SYN-ACK anchors this direction; data cannot be placed
        anomalies.add("unanchored_data")
        return EMPTY_STREAM

    base = (isn + 1) % _SEQ_MOD
    placed: list[tuple[int, bytes, int]] = []  # (rel_offset, payload, ts)
    for seq, payload, ts in segs:
        rel = (seq - base) % _SEQ_MOD
        if rel >= _FORWARD_WINDOW:
            continue  # keep-alive style probe at ISN or stale sequence
        placed.append((rel, payload, ts))
    if not placed:
        return EMPTY_STREAM

    span = max(rel + len(p) for rel, p, _ in placed)
    data = bytearray(span)
    covered = bytearray(span)
    offsets_ts: list[tuple[int, int]] = []

    placed.sort(key=lambda s: (s[2], s[0]))
    end_seen = 0
    for rel, payload, ts in placed:
        # zero-window probe / keep-alive: one stale byte at the stream edge
        if len(payload) == 1 and rel == end_seen - 1 and covered[rel]:
            continue
        pos = rel
        plen = len(payload)
        while pos < rel + plen:
            if covered[pos]:
                run = pos
                while run < rel + plen and covered[run]:
                    run += 1
                if data[pos:run] != payload[pos - rel : run - rel]:
                    anomalies.add("overlap_mismatch")
                pos = run
            else:
                run = pos
                while run < rel + plen and not covered[run]:
                    run += 1
                data[pos:run] = payload[pos - rel : run - rel]
                covered[pos:run] = b"\x01" * (run - pos)
                offsets_ts.append((pos, ts))
                pos = run
        end_seen = max(end_seen, rel + plen)

    prefix = covered.find(0)
    if prefix == -1:
        prefix = span
    has_gap = prefix < span
    offsets_ts = sorted((o, t) for o, t in offsets_ts if o < prefix)
    return DirectionalStream(bytes(data[:prefix]), offsets_ts, has_gap, span)
