"""The compiled and pure-Python kernels must emit identical instruction
lists: encoded frame sizes are part of the deterministic contract."""

import random

import pytest

from blockreduce import _kernels_py
from blockreduce.backend import BACKEND_NAME, kernels
from blockreduce.corpus import BLOCK_SIZE, perturb_block

compiled_only = pytest.mark.skipif(
    BACKEND_NAME != "cython",
    reason="compiled backend not available; nothing to cross-check")


def _cases(n):
    rng = random.Random(2024)
    for _ in range(n):
        kind = rng.randrange(4)
        if kind == 0:
            ref = rng.randbytes(BLOCK_SIZE)
            tgt = perturb_block(ref, rng.randint(1, 256), rng.randint(1, 6), rng)
        elif kind == 1:
            ref = rng.randbytes(BLOCK_SIZE)
            tgt = rng.randbytes(BLOCK_SIZE)
        elif kind == 2:
            pat = rng.randbytes(rng.randint(1, 32))
            ref = (pat * (BLOCK_SIZE // len(pat) + 1))[:BLOCK_SIZE]
            tgt = perturb_block(ref, rng.randint(1, 64), 2, rng)
        else:
            ref = bytes(BLOCK_SIZE)
            tgt = bytes(BLOCK_SIZE)
        yield tgt, ref


@compiled_only
def test_delta_instructions_equivalence():
    for tgt, ref in _cases(300):
        assert kernels.delta_instructions(tgt, ref) == \
            _kernels_py.delta_instructions(tgt, ref)


@compiled_only
def test_lz_tokens_equivalence():
    for tgt, _ in _cases(300):
        assert kernels.lz_tokens(tgt) == _kernels_py.lz_tokens(tgt)


@compiled_only
def test_short_input_equivalence():
    for data in (b"", b"a", b"abc", b"abcd" * 3, bytes(20)):
        assert kernels.lz_tokens(data) == _kernels_py.lz_tokens(data)
        assert kernels.delta_instructions(data, data) == \
            _kernels_py.delta_instructions(data, data)


def test_pure_backend_importable():
    tokens = _kernels_py.lz_tokens(bytes(64))
    covered = sum((le - ls) + ml for ls, le, _, ml in tokens)
    assert covered == 64
