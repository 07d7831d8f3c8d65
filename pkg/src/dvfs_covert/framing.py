"""Marker-delimited framing: marker, 32-bit byte count, payload, marker.

Bitstreams are ASCII strings of ``'0'``/``'1'``; every field is sent MSB first.
"""

from __future__ import annotations

from .errors import BadEndMarker, NoStartMarker, TruncatedFrame

MARKER = 0xA0000000
WORD_BITS = 32
MARKER_BITS = format(MARKER, "032b")


def check_bits(bits: str) -> str:
    if bits.strip("01"):
        raise ValueError("bitstream may only contain '0' and '1'")
    return bits


def bytes_to_bits(data: bytes) -> str:
    return "".join(format(b, "08b") for b in data)


def bits_to_bytes(bits: str) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit length is not a multiple of 8")
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


def frame_encode(payload: bytes) -> str:
    if len(payload) >= 1 << WORD_BITS:
        raise ValueError("payload too long for a 32-bit size field")
    return MARKER_BITS + format(len(payload), "032b") + bytes_to_bits(payload) + MARKER_BITS


def frame_decode(stream: str) -> bytes:
    """Extract the payload of the first frame in ``stream``.

    Raises NoStartMarker, TruncatedFrame or BadEndMarker.
    """
    check_bits(stream)
    pos = stream.find(MARKER_BITS)
    if pos < 0:
        raise NoStartMarker("no 0xA0000000 marker in stream")
    pos += WORD_BITS
    if len(stream) < pos + WORD_BITS:
        raise TruncatedFrame("stream ends inside the size field")
    size = int(stream[pos:pos + WORD_BITS], 2)
    pos += WORD_BITS
    need = pos + 8 * size + WORD_BITS
    if len(stream) < need:
        raise TruncatedFrame(f"frame announces {size} bytes but the stream ends {need - len(stream)} bits short")
    payload = stream[pos:pos + 8 * size]
    trailer = stream[pos + 8 * size:need]
    if trailer != MARKER_BITS:
        raise BadEndMarker(f"trailer is {int(trailer, 2):#010x}")
    return bits_to_bytes(payload)
