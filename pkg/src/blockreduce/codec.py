"""Self-contained block codecs: an LZ77-family lossless compressor and a
reference-based delta compressor, both with strict round-trip guarantees
and deterministic encoded sizes.

Frame layouts (internal, versioned):

Lossless frame
    u8 version (=1), u8 mode (0 = token stream, 1 = raw escape), payload.
    Raw escape stores the 4096 block bytes verbatim, bounding expansion
    at the 2-byte header.  The token stream is a sequence of LZ4-style
    sequences: a token byte holding a literal-length nibble and a
    match-length nibble (15 means "extended": add following bytes, each
    byte continuing while equal to 255), the literal bytes, and -- unless
    the block is complete -- a u16 LE match distance.  Match lengths are
    stored minus the 4-byte minimum.  Matches may overlap their source.

Delta frame
    u8 version (=1), then instructions:
    u8 0x00 (ADD),  u16 LE length, literal bytes
    u8 0x01 (COPY), u16 LE reference offset, u16 LE length
    Applied lengths must sum to exactly 4096 and every COPY window must
    lie inside the reference block.
"""

from __future__ import annotations

import struct

from .backend import kernels
from .corpus import BLOCK_SIZE
from .errors import FrameDecodeError, UnsupportedVersionError

LOSSLESS_VERSION = 1
DELTA_VERSION = 1

_MODE_TOKENS = 0
_MODE_RAW = 1

_OP_ADD = 0x00
_OP_COPY = 0x01

_LZ_MIN_MATCH = 4


def _check_block(b: bytes, name: str) -> None:
    if len(b) != BLOCK_SIZE:
        raise ValueError(f"{name} must be exactly {BLOCK_SIZE} bytes, got {len(b)}")


def _emit_varlen(out: bytearray, extra: int) -> None:
    # LZ4 length extension: repeat 255 while the remainder allows, then
    # the final byte (a trailing 255 is followed by an explicit 0).
    while extra >= 255:
        out.append(255)
        extra -= 255
    out.append(extra)


def _read_varlen(payload: bytes, pos: int, base: int) -> tuple[int, int]:
    length = base
    while True:
        if pos >= len(payload):
            raise FrameDecodeError("truncated length extension")
        b = payload[pos]
        pos += 1
        length += b
        if b != 255:
            return length, pos


def lossless_compress(block: bytes) -> bytes:
    """Compress one block into a self-describing frame.

    The encoded size is a deterministic function of the block; for
    incompressible data the raw-escape mode caps the frame at
    BLOCK_SIZE + 2 bytes.
    """
    _check_block(block, "block")
    out = bytearray([LOSSLESS_VERSION, _MODE_TOKENS])
    for lit_start, lit_end, dist, mlen in kernels.lz_tokens(block):
        lit_len = lit_end - lit_start
        lit_nib = min(lit_len, 15)
        if mlen > 0:
            m_nib = min(mlen - _LZ_MIN_MATCH, 15)
            out.append((lit_nib << 4) | m_nib)
            if lit_nib == 15:
                _emit_varlen(out, lit_len - 15)
            out += block[lit_start:lit_end]
            out += struct.pack("<H", dist)
            if m_nib == 15:
                _emit_varlen(out, mlen - _LZ_MIN_MATCH - 15)
        else:
            out.append(lit_nib << 4)
            if lit_nib == 15:
                _emit_varlen(out, lit_len - 15)
            out += block[lit_start:lit_end]
    if len(out) >= BLOCK_SIZE + 2:
        return bytes([LOSSLESS_VERSION, _MODE_RAW]) + block
    return bytes(out)


def lossless_decompress(frame: bytes) -> bytes:
    """Exact inverse of lossless_compress; malformed frames raise
    FrameDecodeError rather than decoding to wrong bytes."""
    if len(frame) < 2:
        raise FrameDecodeError("frame too short")
    if frame[0] != LOSSLESS_VERSION:
        raise UnsupportedVersionError(f"lossless frame version {frame[0]}")
    mode = frame[1]
    payload = frame[2:]
    if mode == _MODE_RAW:
        if len(payload) != BLOCK_SIZE:
            raise FrameDecodeError("raw frame payload must be one block")
        return payload
    if mode != _MODE_TOKENS:
        raise FrameDecodeError(f"unknown lossless mode {mode}")

    out = bytearray()
    pos = 0
    n = len(payload)
    while len(out) < BLOCK_SIZE:
        if pos >= n:
            raise FrameDecodeError("token stream ended before block complete")
        token = payload[pos]
        pos += 1
        lit_len = token >> 4
        if lit_len == 15:
            lit_len, pos = _read_varlen(payload, pos, 15)
        if pos + lit_len > n:
            raise FrameDecodeError("literal run past end of frame")
        if len(out) + lit_len > BLOCK_SIZE:
            raise FrameDecodeError("literal run past end of block")
        out += payload[pos:pos + lit_len]
        pos += lit_len
        if len(out) == BLOCK_SIZE:
            break
        if pos + 2 > n:
            raise FrameDecodeError("truncated match distance")
        dist = struct.unpack_from("<H", payload, pos)[0]
        pos += 2
        mlen = token & 0x0F
        if mlen == 15:
            mlen, pos = _read_varlen(payload, pos, 15)
        mlen += _LZ_MIN_MATCH
        if dist == 0 or dist > len(out):
            raise FrameDecodeError(f"match distance {dist} out of range")
        if len(out) + mlen > BLOCK_SIZE:
            raise FrameDecodeError("match run past end of block")
        src = len(out) - dist
        if dist >= mlen:
            out += out[src:src + mlen]
        else:
            for i in range(mlen):  # overlapping self-reference
                out.append(out[src + i])
    if pos != n:
        raise FrameDecodeError("trailing bytes after block complete")
    return bytes(out)


def delta_encode(target: bytes, reference: bytes) -> bytes:
    """Encode `target` as COPY/ADD instructions against `reference`."""
    _check_block(target, "target")
    _check_block(reference, "reference")
    out = bytearray([DELTA_VERSION])
    for instr in kernels.delta_instructions(target, reference):
        if instr[0] == 1:
            _, off, length = instr
            out.append(_OP_COPY)
            out += struct.pack("<HH", off, length)
        else:
            _, start, end = instr
            out.append(_OP_ADD)
            out += struct.pack("<H", end - start)
            out += target[start:end]
    return bytes(out)


def delta_decode(frame: bytes, reference: bytes) -> bytes:
    """Apply a delta frame to its reference block; byte-exact or error."""
    _check_block(reference, "reference")
    if len(frame) < 1:
        raise FrameDecodeError("empty delta frame")
    if frame[0] != DELTA_VERSION:
        raise UnsupportedVersionError(f"delta frame version {frame[0]}")
    out = bytearray()
    pos = 1
    n = len(frame)
    while pos < n:
        op = frame[pos]
        pos += 1
        if op == _OP_COPY:
            if pos + 4 > n:
                raise FrameDecodeError("truncated COPY instruction")
            off, length = struct.unpack_from("<HH", frame, pos)
            pos += 4
            if length == 0:
                raise FrameDecodeError("zero-length COPY")
            if off + length > BLOCK_SIZE:
                raise FrameDecodeError("COPY window outside reference")
            out += reference[off:off + length]
        elif op == _OP_ADD:
            if pos + 2 > n:
                raise FrameDecodeError("truncated ADD instruction")
            length = struct.unpack_from("<H", frame, pos)[0]
            pos += 2
            if length == 0:
                raise FrameDecodeError("zero-length ADD")
            if pos + length > n:
                raise FrameDecodeError("ADD literals past end of frame")
            out += frame[pos:pos + length]
            pos += length
        else:
            raise FrameDecodeError(f"unknown delta opcode {op:#x}")
        if len(out) > BLOCK_SIZE:
            raise FrameDecodeError("instruction lengths exceed block size")
    if len(out) != BLOCK_SIZE:
        raise FrameDecodeError(
            f"instruction lengths sum to {len(out)}, want {BLOCK_SIZE}")
    return bytes(out)


def drr(original_size: int, reduced_size: int) -> float:
    """Data-reduction ratio: original size over reduced size."""
    if reduced_size <= 0:
        raise ValueError("reduced_size must be positive")
    return original_size / reduced_size
