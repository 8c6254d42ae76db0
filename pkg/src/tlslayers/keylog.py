"""NSS key log (SSLKEYLOGFILE) parsing and rendering.

Line format, bit-exact: ``<LABEL> <client_random hex> <secret hex>``.
Only the four TLS 1.3 traffic-secret labels are stored; anything else
(e.g. TLS 1.2 CLIENT_RANDOM lines) is counted and ignored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

logger = logging.getLogger(__name__)

LABEL_CLIENT_HS = "CLIENT_HANDSHAKE_TRAFFIC_SECRET"
LABEL_SERVER_HS = "SERVER_HANDSHAKE_TRAFFIC_SECRET"
LABEL_CLIENT_AP = "CLIENT_TRAFFIC_SECRET_0"
LABEL_SERVER_AP = "SERVER_TRAFFIC_SECRET_0"

KNOWN_LABELS = frozenset({LABEL_CLIENT_HS, LABEL_SERVER_HS, LABEL_CLIENT_AP, LABEL_SERVER_AP})

_SECRET_LENGTHS = frozenset({32, 48})


@dataclass
class KeyLogStore:
    """Traffic secrets keyed by (client_random, label)."""

    _entries: dict[tuple[bytes, str], bytes] = field(default_factory=dict)
    malformed_lines: int = 0
    unknown_labels: int = 0
    duplicates: int = 0

    def insert(self, client_random: bytes, label: str, secret: bytes) -> None:
        key = (client_random, label)
        if key in self._entries:
            # Re-keying exporters append; observed behavior is last-wins.
            self.duplicates += 1
            logger.warning("duplicate keylog entry for %s/%s, keeping last", client_random.hex(), label)
        self._entries[key] = secret

    def get(self, client_random: bytes, label: str) -> bytes | None:
        return self._entries.get((client_random, label))

    def has_connection(self, client_random: bytes) -> bool:
        return any((client_random, label) in self._entries for label in KNOWN_LABELS)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()


def parse_keylog(lines: str | Iterable[str]) -> KeyLogStore:
    """Parse key-log text; malformed lines are recorded and skipped."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    store = KeyLogStore()
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 3:
            store.malformed_lines += 1
            continue
        label, random_hex, secret_hex = fields
        if label not in KNOWN_LABELS:
            store.unknown_labels += 1
            continue
        try:
            client_random = bytes.fromhex(random_hex)
            secret = bytes.fromhex(secret_hex)
        except ValueError:
            store.malformed_lines += 1
            continue
        if len(client_random) != 32 or len(secret) not in _SECRET_LENGTHS:
            store.malformed_lines += 1
            continue
        store.insert(client_random, label, secret)
    return store


def render_keylog(store: KeyLogStore) -> str:
    """Render a store back to key-log text (lowercase hex, one entry per line)."""
    out = []
    for (client_random, label), secret in store.items():
        out.append(f"{label} {client_random.hex()} {secret.hex()}\n")
    return "".join(out)
