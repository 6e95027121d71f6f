# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled match-finding kernels.

Semantics must stay identical to `_kernels_py` (the pure-Python
fallback): same hash functions, same first-offset-wins seed table for
the delta matcher, same most-recent-offset table for the LZ matcher,
same greedy extension rules.  `tests/test_backends.py` asserts the two
backends emit identical instruction lists.
"""

from libc.stdlib cimport free, malloc

ctypedef unsigned long long u64
ctypedef unsigned int u32

DEF DELTA_SEED = 16
cdef u64 _A = 0x9E3779B97F4A7C15ULL

DELTA_SEED_LEN = DELTA_SEED  # exported for the codec layer


cdef inline u64 _hash_seed(const unsigned char* data, Py_ssize_t pos) nogil:
    cdef u64 h = 0
    cdef int t
    for t in range(DELTA_SEED):
        h = h * _A + <u64>data[pos + t]
    return h


cdef u64 _a_pow_seed_1():
    cdef u64 p = 1
    cdef int i
    for i in range(DELTA_SEED - 1):
        p = p * _A
    return p

cdef u64 _A15 = _a_pow_seed_1()


cdef inline u64 _roll(u64 h, unsigned char out_b, unsigned char in_b) nogil:
    h = h - <u64>out_b * _A15
    return h * _A + <u64>in_b


cdef inline int _seed_eq(const unsigned char* a, Py_ssize_t i,
                         const unsigned char* b, Py_ssize_t j) nogil:
    cdef int t
    for t in range(DELTA_SEED):
        if a[i + t] != b[j + t]:
            return 0
    return 1


def delta_instructions(const unsigned char[::1] target,
                       const unsigned char[::1] reference):
    """Greedy COPY/ADD decomposition of `target` against `reference`.

    Returns (0, start, end) ADD spans and (1, offset, length) COPYs,
    covering the target exactly, in order.
    """
    cdef Py_ssize_t tn = target.shape[0]
    cdef Py_ssize_t rn = reference.shape[0]
    out = []
    if tn == 0:
        return out
    if rn < DELTA_SEED or tn < DELTA_SEED:
        out.append((0, 0, tn))
        return out

    cdef const unsigned char* tgt = &target[0]
    cdef const unsigned char* ref = &reference[0]

    # Open-addressed first-wins table keyed by the full 64-bit hash;
    # behaviour is identical to the fallback's dict.setdefault.
    cdef Py_ssize_t n_seeds = rn - DELTA_SEED + 1
    cdef Py_ssize_t cap = 8
    while cap < 2 * n_seeds:
        cap <<= 1
    cdef u64 mask = <u64>(cap - 1)
    cdef u64* keys = <u64*>malloc(cap * sizeof(u64))
    cdef Py_ssize_t* vals = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    if keys == NULL or vals == NULL:
        free(keys)
        free(vals)
        raise MemoryError()

    cdef Py_ssize_t i, j, idx
    cdef Py_ssize_t pos, lit, h_pos, last, off, limit, fwd, max_back, back, start
    cdef u64 h
    try:
        for i in range(cap):
            vals[i] = -1

        h = _hash_seed(ref, 0)
        with nogil:
            idx = <Py_ssize_t>(h & mask)
            while vals[idx] >= 0 and keys[idx] != h:
                idx = <Py_ssize_t>((idx + 1) & mask)
            if vals[idx] < 0:
                keys[idx] = h
                vals[idx] = 0
            for j in range(1, n_seeds):
                h = _roll(h, ref[j - 1], ref[j + DELTA_SEED - 1])
                idx = <Py_ssize_t>(h & mask)
                while vals[idx] >= 0 and keys[idx] != h:
                    idx = <Py_ssize_t>((idx + 1) & mask)
                if vals[idx] < 0:
                    keys[idx] = h
                    vals[idx] = j

        # Scan the target.
        pos = 0
        lit = 0
        h = _hash_seed(tgt, 0)
        h_pos = 0
        last = tn - DELTA_SEED
        while pos <= last:
            if pos != h_pos:
                if pos == h_pos + 1:
                    h = _roll(h, tgt[pos - 1], tgt[pos + DELTA_SEED - 1])
                else:
                    h = _hash_seed(tgt, pos)
                h_pos = pos
            idx = <Py_ssize_t>(h & mask)
            off = -1
            while vals[idx] >= 0:
                if keys[idx] == h:
                    off = vals[idx]
                    break
                idx = <Py_ssize_t>((idx + 1) & mask)
            if off >= 0 and _seed_eq(ref, off, tgt, pos):
                limit = tn - pos
                if rn - off < limit:
                    limit = rn - off
                fwd = DELTA_SEED
                while fwd < limit and ref[off + fwd] == tgt[pos + fwd]:
                    fwd += 1
                max_back = pos - lit
                if off < max_back:
                    max_back = off
                back = 0
                while back < max_back and tgt[pos - back - 1] == ref[off - back - 1]:
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
    finally:
        free(keys)
        free(vals)


DEF LZ_MIN_MATCH = 4
DEF LZ_TABLE = 8192
DEF LZ_HASH_SHIFT = 19  # 32 - 13


def lz_tokens(const unsigned char[::1] block):
    """Single-pass LZ77 token scan over one block.

    Returns (lit_start, lit_end, distance, match_len) tuples; a trailing
    literal-only token carries distance == match_len == 0.
    """
    cdef Py_ssize_t n = block.shape[0]
    tokens = []
    if n == 0:
        return tokens
    cdef const unsigned char* b = &block[0]
    cdef Py_ssize_t table[LZ_TABLE]
    cdef Py_ssize_t i, pos, lit, last, cand, mlen
    cdef u32 v, hidx
    for i in range(LZ_TABLE):
        table[i] = -1
    pos = 0
    lit = 0
    last = n - LZ_MIN_MATCH
    while pos <= last:
        v = (<u32>b[pos] | (<u32>b[pos + 1] << 8)
             | (<u32>b[pos + 2] << 16) | (<u32>b[pos + 3] << 24))
        hidx = (v * <u32>2654435761U) >> LZ_HASH_SHIFT
        cand = table[hidx]
        table[hidx] = pos
        if (cand >= 0 and b[cand] == b[pos] and b[cand + 1] == b[pos + 1]
                and b[cand + 2] == b[pos + 2] and b[cand + 3] == b[pos + 3]):
            mlen = LZ_MIN_MATCH
            while pos + mlen < n and b[cand + mlen] == b[pos + mlen]:
                mlen += 1
            tokens.append((lit, pos, pos - cand, mlen))
            pos += mlen
            lit = pos
        else:
            pos += 1
    if lit < n:
        tokens.append((lit, n, 0, 0))
    return tokens
