"""Capture-to-statistics pipeline.

Ingest and reassembly are single-pass sequential; the per-connection TLS
walk is pure and embarrassingly parallel, so connections are partitioned
into contiguous batches across worker processes.  Results are re-merged in
a deterministic connection order, making the output independent of the
worker count.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from tlslayers import timeline as tmod
from tlslayers.capture import open_capture
from tlslayers.decode import decode_frame
from tlslayers.errors import (
    AuthFailure,
    BadRecordHeader,
    EmptyInnerPlaintext,
    MalformedHeader,
    NoRequestFound,
    NoResponseFound,
    OversizeRecord,
    TlsLayersError,
    UnsupportedCipherSuite,
)
from tlslayers.keylog import (
    LABEL_CLIENT_AP,
    LABEL_CLIENT_HS,
    LABEL_SERVER_AP,
    LABEL_SERVER_HS,
    KeyLogStore,
    parse_keylog,
)
from tlslayers.keyschedule import derive_traffic_keys, decrypt_record
from tlslayers.reassembly import TcpConnection, assemble_connections
from tlslayers.stats import LayerStatistics, summarize
from tlslayers.timeline import (
    BOUNDARIES,
    LAYERS,
    NS_PER_MS,
    PARTIAL,
    VALID,
    ConnectionTimeline,
    build_timeline,
    compute_deltas,
    layer_delta_ns,
    measurable_layers,
)
from tlslayers.tlswire import (
    CT_APPLICATION_DATA,
    CT_CHANGE_CIPHER_SPEC,
    CT_HANDSHAKE,
    HT_CLIENT_HELLO,
    HT_FINISHED,
    HT_KEY_UPDATE,
    HT_SERVER_HELLO,
    HandshakeAccumulator,
    build_handshake_message,
    group_name,
    parse_client_hello,
    parse_records,
    parse_server_hello,
)

logger = logging.getLogger(__name__)


class NoUsableStreams(TlsLayersError):
    """No connection contributed a sample to any layer."""


@dataclass
class RunResult:
    """Full-precision analysis of one capture run."""

    label: str
    timelines: list[ConnectionTimeline]
    layer_stats: dict[str, LayerStatistics]
    e2e_stats: LayerStatistics | None
    ttlb_stats: LayerStatistics | None
    counts: dict
    handshake: dict
    ingest: dict
    inputs: dict = field(default_factory=dict)
    decrypted: bool = True


def analyze_connection(conn: TcpConnection, keystore: KeyLogStore | None) -> ConnectionTimeline:
    """Walk one connection's TLS session and extract the six boundaries."""
    meta = _Walk(conn, keystore)
    try:
        meta.run()
    except (BadRecordHeader, OversizeRecord):
        meta.stop_partial("bad_tls_stream")
    return meta.finish()


class _Walk:
    """Per-connection boundary extraction state."""

    def __init__(self, conn: TcpConnection, keystore: KeyLogStore | None):
        self.conn = conn
        self.keystore = keystore
        self.t_clienthello: int | None = None
        self.t_client_finished: int | None = None
        self.t_http_get: int | None = None
        self.t_http_200: int | None = None
        self.http_status: int | None = None
        self.t_response_last: int | None = None
        self.group: str | None = None
        self.cipher_suite: str | None = None
        self.client_hello_len: int | None = None
        self.server_hello_len: int | None = None
        self.key_share_len: int | None = None
        self.partial_reason: str | None = None
        self.excluded_reason: str | None = None
        self._stopped = False

    def stop_partial(self, reason: str) -> None:
        if not self._stopped:
            # snap-truncated captures take precedence as the root cause
            if self.conn.truncated or self.conn.client_to_server.has_gap or self.conn.server_to_client.has_gap:
                reason = "truncated"
            self.partial_reason = reason
            self._stopped = True

    def stop_excluded(self, reason: str) -> None:
        if not self._stopped:
            self.excluded_reason = reason
            self._stopped = True

    def run(self) -> None:
        conn = self.conn
        if conn.t_syn is None:
            return self.stop_partial("no_syn")
        if conn.t_synack is None:
            return self.stop_partial("no_synack")

        client_records, _c_tail = parse_records(conn.client_to_server)
        server_records, _s_tail = parse_records(conn.server_to_client)

        ch_info = self._find_client_hello(client_records)
        if ch_info is None:
            return self.stop_partial("no_clienthello")

        sh_info = self._find_server_hello(server_records)
        if self._stopped:
            return
        if sh_info is None:
            return self.stop_partial("no_serverhello")
        if sh_info.is_hrr:
            return self.stop_excluded("hrr")

        self.cipher_suite = sh_info.cipher_suite
        self.server_hello_len = sh_info.total_length
        if sh_info.selected_group is not None:
            self.group = group_name(sh_info.selected_group)
            for gid, length in ch_info.key_shares:
                if gid == sh_info.selected_group:
                    self.key_share_len = length
                    break

        if self.keystore is None or not self.keystore.has_connection(ch_info.client_random):
            return self.stop_partial("no_keys")

        keys = self._derive_keys(ch_info.client_random)
        if keys is None:
            return
        self._walk_client(client_records, keys)
        if self._stopped or self.t_http_get is None:
            return
        self._walk_server(server_records, keys)
        self._response_tail(server_records)

    # -- helpers ---------------------------------------------------------

    def _find_client_hello(self, records):
        acc = HandshakeAccumulator()
        for rec in records:
            if rec.content_type == CT_CHANGE_CIPHER_SPEC:
                continue
            if rec.content_type != CT_HANDSHAKE:
                break
            for msg_type, body, ts in acc.feed(rec.body, rec.timestamp_ns):
                if msg_type == HT_CLIENT_HELLO:
                    info = parse_client_hello(build_handshake_message(msg_type, body))
                    self.t_clienthello = ts
                    self.client_hello_len = info.total_length
                    return info
                return None
        return None

    def _find_server_hello(self, records):
        acc = HandshakeAccumulator()
        for rec in records:
            if rec.content_type == CT_CHANGE_CIPHER_SPEC:
                continue
            if rec.content_type != CT_HANDSHAKE:
                break
            msgs = acc.feed(rec.body, rec.timestamp_ns)
            for msg_type, body, _ts in msgs:
                if msg_type != HT_SERVER_HELLO:
                    return None
                try:
                    return parse_server_hello(build_handshake_message(msg_type, body))
                except UnsupportedCipherSuite:
                    self.stop_partial("undecryptable")
                    return None
        return None

    def _derive_keys(self, client_random: bytes) -> dict | None:
        store = self.keystore
        out = {}
        for name, label in (
            ("client_hs", LABEL_CLIENT_HS),
            ("server_hs", LABEL_SERVER_HS),
            ("client_ap", LABEL_CLIENT_AP),
            ("server_ap", LABEL_SERVER_AP),
        ):
            secret = store.get(client_random, label)
            if secret is None:
                self.stop_partial("no_keys")
                return None
            try:
                out[name] = derive_traffic_keys(secret, self.cipher_suite)
            except (TlsLayersError, KeyError):
                self.stop_partial("undecryptable")
                return None
        return out

    def _walk_client(self, records, keys) -> None:
        """Find the client Finished, then the HTTP request."""
        epoch = "hs"
        acc = HandshakeAccumulator()
        for rec in records:
            if rec.content_type != CT_APPLICATION_DATA:
                continue
            try:
                msg = decrypt_record(rec, keys["client_hs" if epoch == "hs" else "client_ap"])
            except (AuthFailure, EmptyInnerPlaintext):
                return self.stop_partial("undecryptable")
            if msg.inner_type == CT_HANDSHAKE:
                finished_here = False
                for msg_type, _body, ts in acc.feed(msg.plaintext, msg.record_timestamp_ns):
                    if msg_type == HT_FINISHED and self.t_client_finished is None:
                        self.t_client_finished = ts
                        finished_here = True
                    elif msg_type == HT_KEY_UPDATE and self.t_http_200 is None:
                        return self.stop_partial("undecryptable")
                if finished_here and acc.pending == 0:
                    epoch = "ap"
            elif msg.inner_type == CT_APPLICATION_DATA:
                try:
                    self.t_http_get = tmod.detect_http_request([msg])
                    return  # decryption stops once the boundary is found
                except NoRequestFound:
                    continue  # body continuation; keep scanning
        if self.t_client_finished is None:
            self.stop_partial("no_finished")
        elif self.t_http_get is None:
            self.stop_partial("no_request")

    def _walk_server(self, records, keys) -> None:
        """Find the HTTP status line; stops decrypting once found."""
        epoch = "hs"
        acc = HandshakeAccumulator()
        for rec in records:
            if rec.content_type != CT_APPLICATION_DATA:
                continue
            try:
                msg = decrypt_record(rec, keys["server_hs" if epoch == "hs" else "server_ap"])
            except (AuthFailure, EmptyInnerPlaintext):
                return self.stop_partial("undecryptable")
            if msg.inner_type == CT_HANDSHAKE:
                finished_here = False
                for msg_type, _body, _ts in acc.feed(msg.plaintext, msg.record_timestamp_ns):
                    if msg_type == HT_FINISHED:
                        finished_here = True
                if finished_here and acc.pending == 0:
                    epoch = "ap"
            elif msg.inner_type == CT_APPLICATION_DATA:
                try:
                    self.http_status, self.t_http_200 = tmod.detect_http_response(
                        [msg], self.t_http_get
                    )
                    return
                except NoResponseFound:
                    continue
        if self.t_http_200 is None:
            self.stop_partial("no_response")

    def _response_tail(self, records) -> None:
        """TTLB anchor from record metadata alone (no decryption needed)."""
        last = None
        stream = self.conn.server_to_client
        for rec in records:
            if rec.content_type == CT_APPLICATION_DATA:
                last = rec
        if last is not None:
            self.t_response_last = stream.timestamp_at(last.stream_offset + 5 + len(last.body) - 1)

    def finish(self) -> ConnectionTimeline:
        return build_timeline(
            t_syn=self.conn.t_syn,
            t_synack=self.conn.t_synack,
            t_clienthello=self.t_clienthello,
            t_client_finished=self.t_client_finished,
            t_http_get=self.t_http_get,
            t_http_200=self.t_http_200,
            group=self.group,
            cipher_suite=self.cipher_suite,
            client_hello_len=self.client_hello_len,
            server_hello_len=self.server_hello_len,
            key_share_len=self.key_share_len,
            http_status=self.http_status,
            t_response_last=self.t_response_last,
            partial_reason=self.partial_reason,
            excluded_reason=self.excluded_reason,
            sort_key=self.conn.sort_key(),
        )


def _analyze_batch(args) -> list[ConnectionTimeline]:
    conns, keystore = args
    return [analyze_connection(c, keystore) for c in conns]


def analyze_packets(
    packets,
    keystore: KeyLogStore | None,
    label: str,
    workers: int = 1,
    ingest: dict | None = None,
    inputs: dict | None = None,
) -> RunResult:
    conns = assemble_connections(packets)
    conns.sort(key=TcpConnection.sort_key)
    return analyze_connections(conns, keystore, label, workers=workers, ingest=ingest, inputs=inputs)


def analyze_connections(
    conns: list[TcpConnection],
    keystore: KeyLogStore | None,
    label: str,
    workers: int = 1,
    ingest: dict | None = None,
    inputs: dict | None = None,
) -> RunResult:
    if workers <= 1 or len(conns) < 2:
        timelines = [analyze_connection(c, keystore) for c in conns]
    else:
        batches = _split(conns, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_analyze_batch, [(b, keystore) for b in batches]))
        timelines = [tl for part in parts for tl in part]
    return summarize_run(timelines, label, decrypted=keystore is not None, ingest=ingest, inputs=inputs)


def _split(items: list, n: int) -> list[list]:
    n = max(1, min(n, len(items)))
    size, extra = divmod(len(items), n)
    out, pos = [], 0
    for i in range(n):
        take = size + (1 if i < extra else 0)
        out.append(items[pos : pos + take])
        pos += take
    return out


def summarize_run(
    timelines: list[ConnectionTimeline],
    label: str,
    decrypted: bool = True,
    ingest: dict | None = None,
    inputs: dict | None = None,
) -> RunResult:
    timelines = sorted(timelines, key=lambda t: t.sort_key)
    layer_samples: dict[str, list[float]] = {layer: [] for layer in LAYERS}
    e2e: list[float] = []
    ttlb: list[float] = []
    valid = 0
    partial: dict[str, int] = {}
    excluded: dict[str, int] = {}
    meta: dict[str, list] = {k: [] for k in ("group", "key_share_len", "client_hello_len", "server_hello_len", "cipher_suite")}

    for tl in timelines:
        for layer in measurable_layers(tl):
            layer_samples[layer].append(layer_delta_ns(tl, layer) / NS_PER_MS)
        if tl.validity == VALID:
            valid += 1
            deltas = compute_deltas(tl)
            e2e.append(deltas.e2e_ms)
            if tl.t_response_last is not None and tl.t_response_last >= tl.t_http_get:
                ttlb.append((tl.t_response_last - tl.t_http_get) / NS_PER_MS)
        elif tl.validity == PARTIAL:
            partial[tl.reason] = partial.get(tl.reason, 0) + 1
        else:
            excluded[tl.reason] = excluded.get(tl.reason, 0) + 1
        for k in meta:
            v = getattr(tl, k)
            if v is not None:
                meta[k].append(v)

    counts = {
        "total_streams": len(timelines),
        "valid": valid,
        "partial": dict(sorted(partial.items())),
        "excluded": dict(sorted(excluded.items())),
    }
    bucket_sum = valid + sum(partial.values()) + sum(excluded.values())
    if bucket_sum != len(timelines):
        raise AssertionError(
            f"stream tallies ({bucket_sum}) do not sum to total ({len(timelines)})"
        )

    layer_stats = {
        layer: summarize(samples) for layer, samples in layer_samples.items() if samples
    }
    return RunResult(
        label=label,
        timelines=timelines,
        layer_stats=layer_stats,
        e2e_stats=summarize(e2e) if e2e else None,
        ttlb_stats=summarize(ttlb) if ttlb else None,
        counts=counts,
        handshake={k: _modal(v) for k, v in meta.items()},
        ingest=ingest or {},
        inputs=inputs or {},
        decrypted=decrypted,
    )


def _modal(values: list):
    if not values:
        return None
    freq: dict = {}
    for v in values:
        freq[v] = freq.get(v, 0) + 1
    return sorted(freq.items(), key=lambda kv: (-kv[1], str(kv[0])))[0][0]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def analyze_capture(
    pcap_path: str | Path,
    keylog_path: str | Path | None,
    label: str,
    workers: int = 1,
) -> RunResult:
    """Run the full pipeline over a capture file and optional key log."""
    pcap_path = Path(pcap_path)
    packets = []
    frames = 0
    non_tcp = 0
    malformed = 0
    for frame in open_capture(pcap_path):
        frames += 1
        try:
            pkt = decode_frame(frame)
        except MalformedHeader:
            malformed += 1
            continue
        if pkt is None:
            non_tcp += 1
            continue
        packets.append(pkt)

    keystore = None
    inputs: dict = {"pcap_sha256": _sha256(pcap_path), "keylog_sha256": None}
    if keylog_path is not None:
        keylog_path = Path(keylog_path)
        try:
            text = keylog_path.read_text()
        except OSError as exc:
            from tlslayers.errors import UnreadableFile

            raise UnreadableFile(f"{keylog_path}: {exc}") from exc
        keystore = parse_keylog(text)
        inputs["keylog_sha256"] = _sha256(keylog_path)

    if malformed:
        logger.warning("%s: %d malformed frames skipped", pcap_path, malformed)

    ingest = {"frames": frames, "non_tcp_frames": non_tcp, "malformed_frames": malformed}
    return analyze_packets(packets, keystore, label, workers=workers, ingest=ingest, inputs=inputs)
