import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockreduce import codec
from blockreduce.corpus import BLOCK_SIZE, perturb_block
from blockreduce.errors import FrameDecodeError, UnsupportedVersionError


def _structured_block(rng: random.Random) -> bytes:
    kind = rng.randrange(4)
    if kind == 0:
        return rng.randbytes(BLOCK_SIZE)
    if kind == 1:
        pat = rng.randbytes(rng.randint(1, 64))
        return (pat * (BLOCK_SIZE // len(pat) + 1))[:BLOCK_SIZE]
    if kind == 2:
        b = bytearray(BLOCK_SIZE)
        for _ in range(rng.randint(0, 32)):
            off = rng.randrange(BLOCK_SIZE)
            b[off:off + 16] = rng.randbytes(16)[:BLOCK_SIZE - off]
        return bytes(b[:BLOCK_SIZE])
    b = bytearray(rng.randbytes(256) * 16)
    for _ in range(rng.randint(0, 64)):
        b[rng.randrange(BLOCK_SIZE)] = rng.randrange(256)
    return bytes(b)


# -- lossless ------------------------------------------------------------------

def test_lossless_zero_block_small_and_round_trips():
    b = bytes(BLOCK_SIZE)
    f = codec.lossless_compress(b)
    assert len(f) <= 64
    assert codec.lossless_decompress(f) == b


def test_lossless_random_block_raw_escape():
    b = random.Random(0).randbytes(BLOCK_SIZE)
    f = codec.lossless_compress(b)
    assert len(f) <= BLOCK_SIZE + 16
    assert codec.lossless_decompress(f) == b


def test_lossless_pattern_block():
    b = b"abcd" * 1024
    f = codec.lossless_compress(b)
    assert len(f) < 256
    assert codec.lossless_decompress(f) == b


def test_lossless_round_trip_10k_cases():
    # randomized round-trip identity at the scale the contract demands
    rng = random.Random(1234)
    for i in range(10_000):
        b = _structured_block(rng)
        assert codec.lossless_decompress(codec.lossless_compress(b)) == b, i


def test_lossless_truncated_frame_errors():
    f = codec.lossless_compress(b"abcd" * 1024)
    for cut in (0, 1, len(f) // 2, len(f) - 1):
        with pytest.raises(FrameDecodeError):
            codec.lossless_decompress(f[:cut])


def test_lossless_unsupported_version():
    f = codec.lossless_compress(bytes(BLOCK_SIZE))
    with pytest.raises(UnsupportedVersionError):
        codec.lossless_decompress(bytes([99]) + f[1:])


def test_lossless_trailing_garbage_errors():
    f = codec.lossless_compress(b"abcd" * 1024)
    with pytest.raises(FrameDecodeError):
        codec.lossless_decompress(f + b"\x00")


def test_lossless_deterministic_size():
    b = _structured_block(random.Random(5))
    assert len(codec.lossless_compress(b)) == len(codec.lossless_compress(b))


def test_delta_deterministic_frames():
    rng = random.Random(55)
    ref = _structured_block(rng)
    tgt = perturb_block(ref, 128, 4, rng)
    assert codec.delta_encode(tgt, ref) == codec.delta_encode(tgt, ref)


# -- delta ---------------------------------------------------------------------

def test_delta_identical_blocks_tiny_frame():
    b = random.Random(2).randbytes(BLOCK_SIZE)
    f = codec.delta_encode(b, b)
    assert len(f) <= 16
    assert codec.delta_decode(f, b) == b


def test_delta_small_change_small_frame():
    rng = random.Random(3)
    ref = rng.randbytes(BLOCK_SIZE)
    target = bytearray(ref)
    target[1000:1008] = rng.randbytes(8)
    target = bytes(target)
    f = codec.delta_encode(target, ref)
    assert len(f) < 128
    assert codec.delta_decode(f, ref) == target


def test_delta_unrelated_blocks_no_copies():
    target = random.Random(4).randbytes(BLOCK_SIZE)
    f = codec.delta_encode(target, bytes(BLOCK_SIZE))
    assert len(f) >= BLOCK_SIZE
    assert codec.delta_decode(f, bytes(BLOCK_SIZE)) == target


def test_delta_round_trip_10k_cases():
    rng = random.Random(99)
    for i in range(10_000):
        ref = _structured_block(rng)
        if rng.random() < 0.5:
            target = perturb_block(ref, rng.randint(1, 512), rng.randint(1, 8), rng)
        else:
            target = _structured_block(rng)
        assert codec.delta_decode(codec.delta_encode(target, ref), ref) == target, i


def test_delta_lengths_must_sum_to_block():
    import struct
    # single COPY of 4095 bytes only
    frame = bytes([1, 0x01]) + struct.pack("<HH", 0, 4095)
    with pytest.raises(FrameDecodeError):
        codec.delta_decode(frame, bytes(BLOCK_SIZE))


def test_delta_copy_out_of_range():
    import struct
    frame = bytes([1, 0x01]) + struct.pack("<HH", 4095, 2)
    with pytest.raises(FrameDecodeError):
        codec.delta_decode(frame, bytes(BLOCK_SIZE))


def test_delta_unsupported_version():
    b = bytes(BLOCK_SIZE)
    f = codec.delta_encode(b, b)
    with pytest.raises(UnsupportedVersionError):
        codec.delta_decode(bytes([2]) + f[1:], b)


def test_delta_beats_lossless_on_near_duplicates():
    rng = random.Random(12)
    for _ in range(100):
        b = rng.randbytes(BLOCK_SIZE)
        assert len(codec.delta_encode(b, b)) < len(codec.lossless_compress(b))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_codec_round_trip_property(seed):
    rng = random.Random(seed)
    b = _structured_block(rng)
    ref = _structured_block(rng)
    assert codec.lossless_decompress(codec.lossless_compress(b)) == b
    assert codec.delta_decode(codec.delta_encode(b, ref), ref) == b


def test_decoders_fail_closed_on_junk():
    # malformed frames must raise FrameDecodeError, never crash or
    # silently decode to wrong bytes
    rng = random.Random(999)
    for _ in range(2000):
        junk = rng.randbytes(rng.randint(0, 200))
        with pytest.raises(FrameDecodeError):
            codec.lossless_decompress(bytes([1, rng.randrange(2)]) + junk)
        with pytest.raises(FrameDecodeError):
            codec.delta_decode(bytes([1]) + junk, bytes(BLOCK_SIZE))


# -- drr -----------------------------------------------------------------------

def test_drr_values():
    assert codec.drr(4096, 4096) == 1.0
    assert codec.drr(4096, 1024) == 4.0
    assert codec.drr(4096, 2048) == 2.0


def test_drr_rejects_nonpositive():
    with pytest.raises(ValueError):
        codec.drr(4096, 0)
