"""Reader for the DSDS labeled-dataset interchange format.

Layout: magic "DSDS", u32 LE version=1, u32 record count, u32 class
count, then per record a u32 LE label followed by 4096 raw block bytes.
"""

from __future__ import annotations

import struct

import numpy as np

BLOCK_SIZE = 4096
MAGIC = b"DSDS"
VERSION = 1


class DatasetFormatError(Exception):
    pass


def load_dsds(path: str) -> tuple[np.ndarray, np.ndarray, int]:
    """Returns (blocks uint8 (N, 4096), labels int64 (N,), class_count)."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:4] != MAGIC:
        raise DatasetFormatError("not a DSDS dataset file")
    version, count, class_count = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported DSDS version {version}")
    record = 4 + BLOCK_SIZE
    if len(data) != 16 + count * record:
        raise DatasetFormatError("file length does not match record count")
    blocks = np.empty((count, BLOCK_SIZE), dtype=np.uint8)
    labels = np.empty(count, dtype=np.int64)
    pos = 16
    for i in range(count):
        labels[i] = struct.unpack_from("<I", data, pos)[0]
        blocks[i] = np.frombuffer(data, dtype=np.uint8, count=BLOCK_SIZE,
                                  offset=pos + 4)
        pos += record
    if count and labels.max() >= class_count:
        raise DatasetFormatError("label outside declared class count")
    return blocks, labels, class_count


def stratified_split(labels: np.ndarray, train_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split indices (train, held_out); every class keeps at
    least one training record."""
    import random
    train: list[int] = []
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label).tolist()
        rng = random.Random(f"{seed}:split:{int(label)}")
        n_train = max(1, int(train_fraction * len(idx)))
        train.extend(rng.sample(idx, n_train))
    train_set = set(train)
    held = [i for i in range(len(labels)) if i not in train_set]
    return np.array(sorted(train_set), dtype=np.int64), \
        np.array(held, dtype=np.int64)
