"""Capture-analysis toolkit for HTTPS-over-TLS 1.3 latency decomposition.

Reads packet captures plus the matching NSS key log, reassembles each TCP
connection, decrypts the TLS 1.3 session, and splits every transaction into
five protocol layers (TCP handshake, TCP-to-TLS delay, TLS handshake,
TLS-to-App delay, application response).  Per-layer statistics from two runs
can then be compared with normalized overhead metrics: per-layer Overhead
Factor, combined Overhead Factor, Cryptographic Overhead Share, and Glass's
delta effect sizes.
"""

__version__ = "0.1.0"
