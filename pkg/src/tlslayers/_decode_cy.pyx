# cython: boundscheck=False, wraparound=False
"""Compiled frame decoder (hot kernel).

Behavioral twin of _decode_py.decode; see that module for the contract.
"""

DEF ETH_IPV4 = 0x0800
DEF ETH_IPV6 = 0x86DD


def decode(int link_type, bytes data):
    cdef const unsigned char* p = data
    cdef Py_ssize_t n = len(data)
    cdef int ethertype, off
    cdef int b0, ihl, total_len, flags_frag, proto
    cdef int payload_len, next_header
    cdef int tcp_start, ip_end
    cdef int src_port, dst_port, doff, flags
    cdef unsigned long seq
    cdef int payload_start, payload_end
    cdef bint truncated = False

    if link_type == 1:  # Ethernet
        if n < 14:
            raise ValueError("ethernet header truncated")
        ethertype = (p[12] << 8) | p[13]
        off = 14
    elif link_type == 113:  # Linux SLL
        if n < 16:
            raise ValueError("sll header truncated")
        ethertype = (p[14] << 8) | p[15]
        off = 16
    elif link_type == 101:  # raw IP
        if n < 1:
            raise ValueError("empty raw-ip frame")
        ethertype = ETH_IPV4 if (p[0] >> 4) == 4 else ETH_IPV6
        off = 0
    else:
        raise ValueError(f"unsupported link type {link_type}")

    if ethertype == ETH_IPV4:
        if n < off + 20:
            raise ValueError("ipv4 header truncated")
        b0 = p[off]
        if (b0 >> 4) != 4:
            raise ValueError("ipv4 version mismatch")
        ihl = (b0 & 0x0F) * 4
        if ihl < 20:
            raise ValueError("ipv4 header length below minimum")
        total_len = (p[off + 2] << 8) | p[off + 3]
        if total_len < ihl:
            raise ValueError("ipv4 total length below header length")
        flags_frag = (p[off + 6] << 8) | p[off + 7]
        if (flags_frag & 0x2000) or (flags_frag & 0x1FFF):
            return None  # fragments are out of scope
        proto = p[off + 9]
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
        if (p[off] >> 4) != 6:
            raise ValueError("ipv6 version mismatch")
        payload_len = (p[off + 4] << 8) | p[off + 5]
        next_header = p[off + 6]
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
    src_port = (p[tcp_start] << 8) | p[tcp_start + 1]
    dst_port = (p[tcp_start + 2] << 8) | p[tcp_start + 3]
    seq = (
        (<unsigned long> p[tcp_start + 4] << 24)
        | (p[tcp_start + 5] << 16)
        | (p[tcp_start + 6] << 8)
        | p[tcp_start + 7]
    )
    doff = (p[tcp_start + 12] >> 4) * 4
    if doff < 20:
        raise ValueError("tcp data offset below minimum")
    if tcp_start + doff > ip_end:
        raise ValueError("tcp header exceeds ip length")
    if n < tcp_start + doff:
        raise ValueError("tcp options truncated")
    flags = p[tcp_start + 13] & 0x1F

    payload_start = tcp_start + doff
    payload_end = ip_end  # excludes ethernet trailer padding
    if payload_end > n:
        truncated = True  # snap-length cut into the payload
        payload_end = n
    return (src_ip, dst_ip, src_port, dst_port, flags, seq, payload_start, payload_end, truncated)
