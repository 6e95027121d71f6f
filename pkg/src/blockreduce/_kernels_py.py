"""Pure-Python match-finding kernels.

These are the fallback implementations selected when the compiled
extension (`blockreduce._kernels`) is unavailable.  The two backends
must produce *identical* instruction lists for identical inputs --
encoded frame sizes are part of the engine's deterministic contract --
so any algorithmic change here must be mirrored in `_kernels.pyx`.

Delta matcher: 16-byte seeds hashed with a rolling 64-bit polynomial
over the reference (first offset wins per hash value), greedy forward
and backward extension, ADD for unmatched spans.

Lossless matcher: LZ4-style single-pass scan with 4-byte seeds and a
most-recent-offset table; matches may overlap their source (classic
LZ77 self-reference).
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

DELTA_SEED = 16
_A = 0x9E3779B97F4A7C15
_A_POW_SEED_1 = pow(_A, DELTA_SEED - 1, 1 << 64)  # A^(SEED-1) mod 2^64

LZ_MIN_MATCH = 4
_LZ_HASH_SHIFT = 32 - 13  # 8192-entry table


def _hash_seed(data: bytes, pos: int) -> int:
    h = 0
    for t in range(DELTA_SEED):
        h = (h * _A + data[pos + t]) & MASK64
    return h


def _roll(h: int, out_byte: int, in_byte: int) -> int:
    h = (h - out_byte * _A_POW_SEED_1) & MASK64
    return (h * _A + in_byte) & MASK64


def _extend_forward(a: bytes, i: int, b: bytes, j: int, limit: int) -> int:
    """Longest common extension of a[i:] and b[j:], capped at limit.
    Chunked compares first, then a byte walk to the exact mismatch."""
    ext = 0
    chunk = 128
    while ext + chunk <= limit and a[i + ext:i + ext + chunk] == b[j + ext:j + ext + chunk]:
        ext += chunk
    while ext < limit and a[i + ext] == b[j + ext]:
        ext += 1
    return ext


def delta_instructions(target: bytes, reference: bytes) -> list[tuple[int, int, int]]:
    """Greedy COPY/ADD decomposition of `target` against `reference`.

    Returns (0, start, end) for an ADD of target[start:end] and
    (1, offset, length) for a COPY of reference[offset:offset+length].
    Emitted spans cover the target exactly, in order.
    """
    tn = len(target)
    rn = len(reference)
    out: list[tuple[int, int, int]] = []
    if tn == 0:
        return out
    if rn < DELTA_SEED or tn < DELTA_SEED:
        return [(0, 0, tn)]

    # Index the reference: first offset wins per 64-bit seed hash.
    table: dict[int, int] = {}
    h = _hash_seed(reference, 0)
    table.setdefault(h, 0)
    for j in range(1, rn - DELTA_SEED + 1):
        h = _roll(h, reference[j - 1], reference[j + DELTA_SEED - 1])
        table.setdefault(h, j)

    pos = 0
    lit = 0
    h = _hash_seed(target, 0)
    h_pos = 0
    last = tn - DELTA_SEED
    while pos <= last:
        if pos != h_pos:
            if pos == h_pos + 1:
                h = _roll(h, target[pos - 1], target[pos + DELTA_SEED - 1])
            else:
                h = _hash_seed(target, pos)
            h_pos = pos
        off = table.get(h, -1)
        if off >= 0 and reference[off:off + DELTA_SEED] == target[pos:pos + DELTA_SEED]:
            fwd = DELTA_SEED + _extend_forward(
                target, pos + DELTA_SEED, reference, off + DELTA_SEED,
                min(tn - pos, rn - off) - DELTA_SEED)
            back = 0
            max_back = min(pos - lit, off)
            while back < max_back and target[pos - back - 1] == reference[off - back - 1]:
                back += 1
            start = pos - back
            if lit < start:
                out.append((0, lit, start))
            out.append((1, off - back, fwd + back))
            lit = start + back + fwd
            pos = lit
            continue
        pos += 1
    if lit < tn:
        out.append((0, lit, tn))
    return out


def lz_tokens(block: bytes) -> list[tuple[int, int, int, int]]:
    """Single-pass LZ77 token scan over one block.

    Returns (lit_start, lit_end, distance, match_len) tuples; a trailing
    literal-only token carries distance == match_len == 0.
    """
    n = len(block)
    tokens: list[tuple[int, int, int, int]] = []
    if n == 0:
        return tokens
    table = [-1] * 8192
    pos = 0
    lit = 0
    last = n - LZ_MIN_MATCH
    while pos <= last:
        v = block[pos] | (block[pos + 1] << 8) | (block[pos + 2] << 16) | (block[pos + 3] << 24)
        hidx = ((v * 2654435761) & 0xFFFFFFFF) >> _LZ_HASH_SHIFT
        cand = table[hidx]
        table[hidx] = pos
        if cand >= 0 and block[cand:cand + LZ_MIN_MATCH] == block[pos:pos + LZ_MIN_MATCH]:
            mlen = LZ_MIN_MATCH
            while pos + mlen < n and block[cand + mlen] == block[pos + mlen]:
                mlen += 1
            tokens.append((lit, pos, pos - cand, mlen))
            pos += mlen
            lit = pos
        else:
            pos += 1
    if lit < n:
        tokens.append((lit, n, 0, 0))
    return tokens
