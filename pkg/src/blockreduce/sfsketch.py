"""Super-feature LSH sketcher and its exact-match store.

Per feature index i, a 64-bit rolling polynomial hash is evaluated over
every w-byte window of the block (L - w + 1 positions) and the maximum
kept as feature F_i.  Independence across indices comes from a per-index
finalizer mix of the shared window hash rather than m separate rolling
passes, which preserves the max-of-hashes semantics at a twelfth of the
cost.  Groups of 4 features are packed (low 48 bits each) into three
192-bit super-features; two blocks are deemed similar when at least one
super-feature matches exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_A = 0x9E3779B97F4A7C15  # odd, hence invertible mod 2^64
_A_INV = pow(_A, -1, 1 << 64)
_MIX1 = np.uint64(0xFF51AFD7ED558CCD)
_MIX2 = np.uint64(0xC4CEB9FE1A85EC53)
_S33 = np.uint64(33)
_LOW48 = (1 << 48) - 1


@dataclass(frozen=True)
class SfConfig:
    feature_count: int = 12      # m
    superfeature_count: int = 3  # N
    window_bytes: int = 48       # w
    block_bytes: int = 4096      # L

    def __post_init__(self):
        if self.feature_count % self.superfeature_count != 0:
            raise ValueError("feature_count must be divisible by superfeature_count")
        if not 1 <= self.window_bytes <= self.block_bytes:
            raise ValueError("window_bytes must be in [1, block_bytes]")

    @property
    def features_per_sf(self) -> int:
        return self.feature_count // self.superfeature_count

    @property
    def window_positions(self) -> int:
        """Number of window placements evaluated per feature (L - w + 1)."""
        return self.block_bytes - self.window_bytes + 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


_pow_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_seed_cache: dict[int, np.ndarray] = {}


def _powers(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(A^k for k in 0..n, A^-(t+1) for t in 0..n-1), both mod 2^64."""
    if n not in _pow_cache:
        a_pow = np.empty(n + 1, dtype=np.uint64)
        a_pow[0] = 1
        np.multiply.accumulate(
            np.full(n, _A & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64), out=a_pow[1:])
        ainv_pow = np.empty(n, dtype=np.uint64)
        np.multiply.accumulate(
            np.full(n, _A_INV, dtype=np.uint64), out=ainv_pow)
        _pow_cache[n] = (a_pow, ainv_pow)
    return _pow_cache[n]


def _seeds(m: int) -> np.ndarray:
    if m not in _seed_cache:
        _seed_cache[m] = np.array([_splitmix64(i + 1) for i in range(m)],
                                  dtype=np.uint64)
    return _seed_cache[m]


def _window_hashes(data: np.ndarray, w: int) -> np.ndarray:
    """Rolling polynomial hash of every w-byte window, all positions at
    once:  H(j) = sum_t data[j+t] * A^(w-1-t) mod 2^64, computed from a
    prefix scan in the inverse-power domain so no sequential rolling is
    needed."""
    n = data.shape[0]
    a_pow, ainv_pow = _powers(n)
    q = np.empty(n + 1, dtype=np.uint64)
    q[0] = 0
    np.cumsum(data.astype(np.uint64) * ainv_pow, out=q[1:])
    return (q[w:] - q[:n - w + 1]) * a_pow[w:]


def _mix(h: np.ndarray, seed: np.uint64) -> np.ndarray:
    v = h ^ seed
    v ^= v >> _S33
    v *= _MIX1
    v ^= v >> _S33
    v *= _MIX2
    v ^= v >> _S33
    return v


def extract_features(block: bytes, cfg: SfConfig = SfConfig()) -> np.ndarray:
    """Per-index maximum window hash values; shape (m,), dtype uint64."""
    if len(block) != cfg.block_bytes:
        raise ValueError(f"block must be {cfg.block_bytes} bytes")
    data = np.frombuffer(block, dtype=np.uint8)
    hashes = _window_hashes(data, cfg.window_bytes)
    seeds = _seeds(cfg.feature_count)
    features = np.empty(cfg.feature_count, dtype=np.uint64)
    for i in range(cfg.feature_count):
        features[i] = _mix(hashes, seeds[i]).max()
    return features


def build_superfeatures(features: np.ndarray,
                        cfg: SfConfig = SfConfig()) -> tuple[int, ...]:
    """Pack each group of 4 features (low 48 bits each) into one 192-bit
    super-feature value."""
    if len(features) != cfg.feature_count:
        raise ValueError("feature vector length does not match config")
    g = cfg.features_per_sf
    sfs = []
    for k in range(cfg.superfeature_count):
        v = 0
        for t in range(g):
            v = (v << 48) | (int(features[k * g + t]) & _LOW48)
        sfs.append(v)
    return tuple(sfs)


def sketch_block(block: bytes, cfg: SfConfig = SfConfig()) -> tuple[int, ...]:
    return build_superfeatures(extract_features(block, cfg), cfg)


def match_count(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    """Number of slot-wise equal super-features between two sketches."""
    return sum(1 for x, y in zip(a, b) if x == y)


class SfStore:
    """Per-slot exact-match maps: (slot k, SF value) -> block ids in
    insertion order.  A block id appears at most once per (slot, value)."""

    def __init__(self, cfg: SfConfig = SfConfig()):
        self.cfg = cfg
        self._slots: list[dict[int, list[int]]] = [
            {} for _ in range(cfg.superfeature_count)]
        self._arrival: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._arrival)

    def insert(self, sfs: tuple[int, ...], block_id: int) -> None:
        if block_id not in self._arrival:
            self._arrival[block_id] = len(self._arrival)
        for k, value in enumerate(sfs):
            ids = self._slots[k].setdefault(value, [])
            if block_id not in ids:
                ids.append(block_id)

    def match_topk(self, sfs: tuple[int, ...], k: int) -> list[tuple[int, int]]:
        """Stored blocks sharing >= 1 SF, ranked by match count then by
        earliest insertion (first-fit)."""
        counts: dict[int, int] = {}
        for slot, value in enumerate(sfs):
            for bid in self._slots[slot].get(value, ()):
                counts[bid] = counts.get(bid, 0) + 1
        ranked = sorted(counts.items(),
                        key=lambda kv: (-kv[1], self._arrival[kv[0]]))
        return ranked[:k]

    def match(self, sfs: tuple[int, ...]) -> tuple[int, int] | None:
        top = self.match_topk(sfs, 1)
        return top[0] if top else None
