"""Learned-sketch store: exact nearest-neighbor search in Hamming space
over 128-bit sketches, with a recent-sketch buffer and batched commits.

Inserts land in a pending buffer and are committed to the scan index in
whole batches once the buffer reaches the flush threshold (128 by
default), mirroring a batch-updated ANN index.  Queries always see the
committed index plus any pending entry whose distance beats the best
committed hit, so a freshly written similar block is never missed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SKETCH_BYTES = 16  # 128-bit sketches


@dataclass(frozen=True)
class SkStoreConfig:
    flush_threshold: int = 128   # pending batch size that triggers a commit
    buffer_capacity: int = 128   # R; must hold at most one un-flushed batch
    mode: str = "exact"          # "exact" | "approximate"

    def __post_init__(self):
        if self.flush_threshold < 1:
            raise ValueError("flush_threshold must be >= 1")
        if self.buffer_capacity < self.flush_threshold:
            raise ValueError("buffer_capacity must be >= flush_threshold")
        if self.mode not in ("exact", "approximate"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Candidate:
    block_id: int
    distance: int
    source: str  # "index" | "buffer"


class SkStore:
    """Exact-scan sketch index with an un-flushed pending buffer."""

    _GROW = 4096

    def __init__(self, cfg: SkStoreConfig = SkStoreConfig()):
        if cfg.mode == "approximate":
            raise NotImplementedError(
                "approximate mode is a reserved slot; exact scan is the "
                "shipping implementation")
        self.cfg = cfg
        self._packed = np.zeros((self._GROW, SKETCH_BYTES), dtype=np.uint8)
        self._ids = np.zeros(self._GROW, dtype=np.int64)
        self._committed = 0
        self.pending: list[tuple[bytes, int]] = []

    @property
    def committed_count(self) -> int:
        return self._committed

    @property
    def pending_count(self) -> int:
        return len(self.pending)

    def __len__(self) -> int:
        return self._committed + len(self.pending)

    def insert(self, sketch: bytes, block_id: int) -> None:
        """Append to the pending buffer; commits the whole batch once the
        flush threshold is reached, so |pending| < threshold afterwards."""
        if len(sketch) != SKETCH_BYTES:
            raise ValueError(f"sketch must be {SKETCH_BYTES} bytes")
        self.pending.append((sketch, block_id))
        if len(self.pending) >= self.cfg.flush_threshold:
            self.flush()

    def flush(self) -> None:
        """Commit all pending entries (any count); idempotent when empty.
        The batch becomes visible to queries atomically."""
        if not self.pending:
            return
        n = len(self.pending)
        need = self._committed + n
        if need > self._packed.shape[0]:
            grow = max(need, self._packed.shape[0] * 2)
            packed = np.zeros((grow, SKETCH_BYTES), dtype=np.uint8)
            ids = np.zeros(grow, dtype=np.int64)
            packed[:self._committed] = self._packed[:self._committed]
            ids[:self._committed] = self._ids[:self._committed]
            self._packed = packed
            self._ids = ids
        for i, (sk, bid) in enumerate(self.pending):
            self._packed[self._committed + i] = np.frombuffer(sk, dtype=np.uint8)
            self._ids[self._committed + i] = bid
        self._committed += n
        self.pending.clear()

    def committed_ids(self) -> list[int]:
        return self._ids[:self._committed].tolist()

    def query(self, sketch: bytes, k: int = 1) -> list[Candidate]:
        """k nearest entries by Hamming distance, nearest first.

        The committed index is scanned exactly; a pending entry is
        preferred whenever its distance is strictly below the best
        committed distance.  Ties break by lower block id, then
        index-before-buffer.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if len(sketch) != SKETCH_BYTES:
            raise ValueError(f"sketch must be {SKETCH_BYTES} bytes")

        results: list[Candidate] = []
        best_committed = SKETCH_BYTES * 8 + 1  # above any real distance
        if self._committed > 0:
            q = np.frombuffer(sketch, dtype=np.uint8)
            dists = np.bitwise_count(
                self._packed[:self._committed] ^ q).sum(axis=1, dtype=np.int64)
            order = np.lexsort((self._ids[:self._committed], dists))[:k]
            results = [Candidate(int(self._ids[i]), int(dists[i]), "index")
                       for i in order]
            best_committed = int(dists[order[0]])

        if self.pending:
            qi = int.from_bytes(sketch, "big")
            for sk, bid in self.pending:
                d = (qi ^ int.from_bytes(sk, "big")).bit_count()
                if d < best_committed:
                    results.append(Candidate(bid, d, "buffer"))

        results.sort(key=lambda c: (c.distance, c.block_id,
                                    0 if c.source == "index" else 1))
        return results[:k]
