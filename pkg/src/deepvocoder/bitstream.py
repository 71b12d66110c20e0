"""Bit-exact packing of codeword indices and the "DVOC" container format."""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import FormatError

CONTAINER_MAGIC = b"DVOC"
CONTAINER_VERSION = 1

# Payload bits per super-frame for each rate tag (0 = 2400 bit/s, 1 = 1200 bit/s).
PAYLOAD_BITS_BY_TAG = {0: 72, 1: 54}

_HEADER = struct.Struct("<4sBBIQIII")


@dataclass
class EncodedFile:
    """Parsed "DVOC" container: header fields plus the packed index payload."""

    mode_tag: int
    sample_rate: int
    original_len: int
    superframe_count: int
    model_hash: int
    codebook_hash: int
    payload: bytes
    version: int = CONTAINER_VERSION


def pack_indices(index_tuples, bits) -> bytes:
    """Pack D-tuples of codeword indices MSB-first with the given bit widths.

    Super-frames are concatenated without per-frame padding; only the final
    byte is zero-padded in its low bits.
    """
    bits = tuple(int(b) for b in bits)
    out = bytearray()
    acc = 0
    n_acc = 0
    for tup in index_tuples:
        if len(tup) != len(bits):
            raise ValueError(f"expected {len(bits)} indices per super-frame, got {len(tup)}")
        for value, width in zip(tup, bits):
            value = int(value)
            if not 0 <= value < (1 << width):
                raise ValueError(f"index {value} does not fit in {width} bits")
            acc = (acc << width) | value
            n_acc += width
            while n_acc >= 8:
                n_acc -= 8
                out.append((acc >> n_acc) & 0xFF)
    if n_acc:
        out.append((acc << (8 - n_acc)) & 0xFF)
    return bytes(out)


def unpack_indices(data: bytes, superframe_count: int, bits) -> list:
    """Exact inverse of pack_indices; validates the buffer length first."""
    bits = tuple(int(b) for b in bits)
    expected = (superframe_count * sum(bits) + 7) // 8
    if len(data) != expected:
        raise FormatError(
            f"payload is {len(data)} bytes but {superframe_count} super-frames need {expected}"
        )
    tuples = []
    acc = 0
    n_acc = 0
    pos = 0
    for _ in range(superframe_count):
        tup = []
        for width in bits:
            while n_acc < width:
                acc = (acc << 8) | data[pos]
                pos += 1
                n_acc += 8
            n_acc -= width
            tup.append((acc >> n_acc) & ((1 << width) - 1))
        tuples.append(tuple(tup))
    return tuples


def write_container(enc: EncodedFile) -> bytes:
    header = _HEADER.pack(
        CONTAINER_MAGIC,
        enc.version,
        enc.mode_tag,
        enc.sample_rate,
        enc.original_len,
        enc.superframe_count,
        enc.model_hash,
        enc.codebook_hash,
    )
    return header + enc.payload


def read_container(data: bytes) -> EncodedFile:
    """Parse and validate a "DVOC" container."""
    if len(data) < _HEADER.size:
        raise FormatError("container truncated before header")
    magic, version, mode_tag, rate, orig, count, mh, ch = _HEADER.unpack_from(data)
    if magic != CONTAINER_MAGIC:
        raise FormatError(f"bad container magic {magic!r}, expected {CONTAINER_MAGIC!r}")
    if version != CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {version}")
    if mode_tag not in PAYLOAD_BITS_BY_TAG:
        raise FormatError(f"unknown rate mode tag {mode_tag}")
    payload = data[_HEADER.size :]
    expected = (count * PAYLOAD_BITS_BY_TAG[mode_tag] + 7) // 8
    if len(payload) != expected:
        raise FormatError(
            f"payload is {len(payload)} bytes but header declares {count} "
            f"super-frames ({expected} bytes)"
        )
    return EncodedFile(
        mode_tag=mode_tag,
        sample_rate=rate,
        original_len=orig,
        superframe_count=count,
        model_hash=mh,
        codebook_hash=ch,
        payload=payload,
        version=version,
    )
