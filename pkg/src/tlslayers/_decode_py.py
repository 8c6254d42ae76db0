"""Pure-Python frame decoder (fallback twin of the compiled kernel).

Both kernels share one contract: given (link_type, frame bytes) return None
for non-TCP traffic, raise ValueError for frames whose length fields are
inconsistent, or return the tuple

    (src_ip, dst_ip, src_port, dst_port, flags, seq, payload_start,
     payload_end, truncated)

where the IPs are raw 4- or 16-byte values and payload bounds index into the
original frame.  Keep this file and _decode_cy.pyx behaviorally identical.
"""

from __future__ import annotations

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD

_LINK_ETHERNET = 1
_LINK_RAW_IP = 101
_LINK_LINUX_SLL = 113


def decode(link_type: int, data: bytes):
    n = len(data)
    if link_type == _LINK_ETHERNET:
        if n < 14:
            raise ValueError("ethernet header truncated")
        ethertype = (data[12] << 8) | data[13]
        off = 14
    elif link_type == _LINK_LINUX_SLL:
        if n < 16:
            raise ValueError("sll header truncated")
        ethertype = (data[14] << 8) | data[15]
        off = 16
    elif link_type == _LINK_RAW_IP:
        if n < 1:
            raise ValueError("empty raw-ip frame")
        ethertype = ETH_IPV4 if (data[0] >> 4) == 4 else ETH_IPV6
        off = 0
    else:
        raise ValueError(f"unsupported link type {link_type}")

    if ethertype == ETH_IPV4:
        if n < off + 20:
            raise ValueError("ipv4 header truncated")
        b0 = data[off]
        if (b0 >> 4) != 4:
            raise ValueError("ipv4 version mismatch")
        ihl = (b0 & 0x0F) * 4
        if ihl < 20:
            raise ValueError("ipv4 header length below minimum")
        total_len = (data[off + 2] << 8) | data[off + 3]
        if total_len < ihl:
            raise ValueError("ipv4 total length below header length")
        flags_frag = (data[off + 6] << 8) | data[off + 7]
        if (flags_frag & 0x2000) or (flags_frag & 0x1FFF):
            return None  # fragments are out of scope
        proto = data[off + 9]
        if proto != 6:
            return None
        if n < off + ihl:
            raise ValueError("ipv4 options truncated")
        src_ip = data[off + 12 : off + 16]
        dst_ip = data[off + 16 : off + 20]
        tcp_start = off + ihl
        ip_end = off + total_len
    elif ethertype == ETH_IPV6:
        if n < off + 40:
            raise ValueError("ipv6 header truncated")
        if (data[off] >> 4) != 6:
            raise ValueError("ipv6 version mismatch")
        payload_len = (data[off + 4] << 8) | data[off + 5]
        next_header = data[off + 6]
        if next_header != 6:
            return None  # extension headers / non-TCP are out of scope
        src_ip = data[off + 8 : off + 24]
        dst_ip = data[off + 24 : off + 40]
        tcp_start = off + 40
        ip_end = off + 40 + payload_len
    else:
        return None  # ARP, LLC, anything else

    if n < tcp_start + 20:
        raise ValueError("tcp header truncated")
    src_port = (data[tcp_start] << 8) | data[tcp_start + 1]
    dst_port = (data[tcp_start + 2] << 8) | data[tcp_start + 3]
    seq = (
        (data[tcp_start + 4] << 24)
        | (data[tcp_start + 5] << 16)
        | (data[tcp_start + 6] << 8)
        | data[tcp_start + 7]
    )
    doff = (data[tcp_start + 12] >> 4) * 4
    if doff < 20:
        raise ValueError("tcp data offset below minimum")
    if tcp_start + doff > ip_end:
        raise ValueError("tcp header exceeds ip length")
    if n < tcp_start + doff:
        raise ValueError("tcp options truncated")
    flags = data[tcp_start + 13] & 0x1F

    payload_start = tcp_start + doff
    payload_end = ip_end  # excludes ethernet trailer padding
    truncated = False
    if payload_end > n:
        truncated = True  # snap-length cut into the payload
        payload_end = n
    return (src_ip, dst_ip, src_port, dst_port, flags, seq, payload_start, payload_end, truncated)
