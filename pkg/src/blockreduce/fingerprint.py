"""Strong 128-bit block fingerprints (MD5) and the exact-match store
backing deduplication.

A fingerprint match is trusted without content verification: the digest
collision rate is far below a disk's uncorrectable bit-error rate, which
is the accepted correctness assumption for dedup stores.
"""

from __future__ import annotations

import hashlib


def fingerprint(block: bytes) -> bytes:
    """MD5 digest (16 bytes) of the block contents."""
    return hashlib.md5(block).digest()


class FpStore:
    """Fingerprint -> block id of the first stored (non-deduplicated)
    record with that digest.  At most one entry per fingerprint."""

    def __init__(self):
        self._map: dict[bytes, int] = {}

    def lookup(self, fp: bytes) -> int | None:
        return self._map.get(fp)

    def insert(self, fp: bytes, block_id: int) -> bool:
        """Insert iff absent; returns whether the entry was inserted."""
        if fp in self._map:
            return False
        self._map[fp] = block_id
        return True

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, fp: bytes) -> bool:
        return fp in self._map
