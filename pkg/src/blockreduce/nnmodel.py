"""Fixed-architecture forward pass producing 128-bit learned sketches
from exported weights.

The network is three 1D conv blocks (conv, batch-norm, ReLU, max-pool 4)
over the byte stream, a dense layer, and a hash layer whose pre-activation
signs form the sketch (sign(0) counts as +1).  All arithmetic is float32
with a pinned operation order -- padding split, im2col column layout,
2D matmuls, and the batch-norm formula are part of the weight-file
contract (see docs/formats.md) so that an exporter implementing the same
order reproduces sketches bit-for-bit.

Weight file ("DSKW"): magic, u32 LE version=1, u32 class_count,
u32 hash_bits, u32 tensor_count; per tensor: u8 name length + name,
u8 rank, u32 dims[rank], float32 LE values in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import BLOCK_SIZE
from .errors import WeightFormatError

WEIGHT_MAGIC = b"DSKW"
WEIGHT_VERSION = 1
SKETCH_BITS = 128

_EPS = np.float32(1e-5)
_BATCH_CHUNK = 128


@dataclass(frozen=True)
class ModelConfig:
    class_count: int
    input_len: int = BLOCK_SIZE
    conv_channels: tuple[int, int, int] = (16, 32, 64)
    conv_kernel: int = 8
    pool: int = 4
    dense_units: int = 1024
    hash_bits: int = SKETCH_BITS

    @property
    def flat_len(self) -> int:
        length = self.input_len
        for _ in self.conv_channels:
            length //= self.pool
        return length * self.conv_channels[-1]


def weight_tensor_specs(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """The fixed tensor enumeration of the DSKW format, in file order."""
    specs: list[tuple[str, tuple[int, ...]]] = []
    in_ch = 1
    for i, out_ch in enumerate(cfg.conv_channels, start=1):
        specs.append((f"conv{i}.weight", (out_ch, in_ch, cfg.conv_kernel)))
        specs.append((f"conv{i}.bias", (out_ch,)))
        for p in ("gamma", "beta", "mean", "var"):
            specs.append((f"bn{i}.{p}", (out_ch,)))
        in_ch = out_ch
    specs.append(("dense.weight", (cfg.dense_units, cfg.flat_len)))
    specs.append(("dense.bias", (cfg.dense_units,)))
    specs.append(("hash.weight", (cfg.hash_bits, cfg.dense_units)))
    specs.append(("hash.bias", (cfg.hash_bits,)))
    specs.append(("head.weight", (cfg.class_count, cfg.hash_bits)))
    specs.append(("head.bias", (cfg.class_count,)))
    return specs


def load_weights(path: str) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    """Parse and validate a DSKW weight file.

    Raises WeightFormatError on magic/version mismatch, truncation, an
    unexpected tensor name/order/shape, or non-finite values, naming the
    offending tensor.
    """
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise WeightFormatError(f"cannot read weights {path!r}: {e}") from e

    if len(data) < 20 or data[:4] != WEIGHT_MAGIC:
        raise WeightFormatError("bad magic: not a DSKW weight file")
    version, class_count, hash_bits, tensor_count = struct.unpack_from(
        "<IIII", data, 4)
    if version != WEIGHT_VERSION:
        raise WeightFormatError(f"unsupported DSKW version {version}")
    if hash_bits != SKETCH_BITS:
        raise WeightFormatError(
            f"hash_bits {hash_bits} unsupported; sketches are {SKETCH_BITS}-bit")
    if class_count < 1:
        raise WeightFormatError("class_count must be >= 1")

    cfg = ModelConfig(class_count=class_count)
    specs = weight_tensor_specs(cfg)
    if tensor_count != len(specs):
        raise WeightFormatError(
            f"tensor_count {tensor_count}, want {len(specs)}")

    weights: dict[str, np.ndarray] = {}
    pos = 20
    for want_name, want_shape in specs:
        if pos + 1 > len(data):
            raise WeightFormatError(f"truncated before tensor {want_name!r}")
        name_len = data[pos]
        pos += 1
        if pos + name_len + 1 > len(data):
            raise WeightFormatError(f"truncated in header of {want_name!r}")
        name = data[pos:pos + name_len].decode("ascii", errors="replace")
        pos += name_len
        if name != want_name:
            raise WeightFormatError(
                f"tensor {name!r} out of order, expected {want_name!r}")
        rank = data[pos]
        pos += 1
        if pos + 4 * rank > len(data):
            raise WeightFormatError(f"truncated dims of {name!r}")
        dims = struct.unpack_from(f"<{rank}I", data, pos) if rank else ()
        pos += 4 * rank
        if tuple(dims) != want_shape:
            raise WeightFormatError(
                f"tensor {name!r} has shape {tuple(dims)}, want {want_shape}")
        count = int(np.prod(want_shape, dtype=np.int64)) if want_shape else 1
        nbytes = 4 * count
        if pos + nbytes > len(data):
            raise WeightFormatError(f"truncated values of {name!r}")
        values = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += nbytes
        arr = values.reshape(want_shape).astype(np.float32)
        if not np.isfinite(arr).all():
            raise WeightFormatError(f"tensor {name!r} contains non-finite values")
        if want_name.endswith(".var") and bool((arr < 0).any()):
            raise WeightFormatError(f"tensor {name!r} has negative variances")
        weights[name] = arr
    if pos != len(data):
        raise WeightFormatError("trailing bytes after last tensor")
    return cfg, weights


def _conv_block(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                gamma: np.ndarray, beta: np.ndarray,
                mean: np.ndarray, var: np.ndarray, pool: int,
                kernel: int) -> np.ndarray:
    """conv1d (same padding, stride 1) -> batch-norm -> ReLU -> max-pool.

    x is channels-last (B, L, C_in).  Zero padding puts (kernel-1)//2
    rows left and the rest right.  The conv is one 2D float32 matmul
    over an im2col matrix whose columns are tap-major (t * C_in + ic);
    that column order fixes the accumulation order and is part of the
    weight-file arithmetic contract.
    """
    nb, length, c_in = x.shape
    k = kernel
    pad_l = (k - 1) // 2
    stride = length + k - 1
    c_out = w.shape[0]

    flat = np.zeros((nb * stride + k - 1, c_in), dtype=np.float32)
    flat[:nb * stride].reshape(nb, stride, c_in)[:, pad_l:pad_l + length, :] = x
    # im2col with tap-major columns (t * C_in + ic), then one 2D matmul;
    # rows that overrun a block's padded span are sliced off below.
    cols = np.empty((nb * stride, k * c_in), dtype=np.float32)
    for t in range(k):
        cols[:, t * c_in:(t + 1) * c_in] = flat[t:t + nb * stride]
    wmat = np.ascontiguousarray(w.transpose(2, 1, 0).reshape(k * c_in, c_out))
    y = np.matmul(cols, wmat)  # (B*stride, C_out); overrun rows dropped below

    # bias + inference batch-norm folded to one per-channel affine:
    # scale = gamma / sqrt(var + eps), shift = (bias - mean) * scale + beta
    scale = gamma / np.sqrt(var + _EPS)
    shift = (b - mean) * scale + beta
    np.multiply(y, scale, out=y)
    np.add(y, shift, out=y)
    np.maximum(y, np.float32(0), out=y)

    row = y.strides[0]
    pooled_view = np.lib.stride_tricks.as_strided(
        y, shape=(nb, length // pool, pool, c_out),
        strides=(stride * row, pool * row, row, y.strides[1]))
    return pooled_view.max(axis=2)


def _forward_hash(x: np.ndarray, cfg: ModelConfig,
                  w: dict[str, np.ndarray]) -> np.ndarray:
    """Hash-layer pre-activations for scaled input x: (B, input_len, 1)."""
    nb = x.shape[0]
    expect_len = cfg.input_len
    for i, out_ch in enumerate(cfg.conv_channels, start=1):
        x = _conv_block(x, w[f"conv{i}.weight"], w[f"conv{i}.bias"],
                        w[f"bn{i}.gamma"], w[f"bn{i}.beta"],
                        w[f"bn{i}.mean"], w[f"bn{i}.var"],
                        cfg.pool, cfg.conv_kernel)
        expect_len //= cfg.pool
        assert x.shape == (nb, expect_len, out_ch), x.shape
    # flatten channel-major (index = channel * positions + position)
    flat = np.ascontiguousarray(x.transpose(0, 2, 1)).reshape(nb, cfg.flat_len)
    d = np.matmul(flat, w["dense.weight"].T) + w["dense.bias"]
    d = np.maximum(d, np.float32(0))
    h = np.matmul(d, w["hash.weight"].T) + w["hash.bias"]
    assert h.shape == (nb, cfg.hash_bits)
    return h


def scale_input(blocks: np.ndarray) -> np.ndarray:
    """Map raw bytes to float32 in [-1, 1]: (b/255)*2 - 1, in that order."""
    x = blocks.astype(np.float32) / np.float32(255)
    x = x * np.float32(2)
    return x - np.float32(1)


def forward_sketch_batch(blocks: list[bytes] | np.ndarray,
                         cfg: ModelConfig,
                         weights: dict[str, np.ndarray]) -> np.ndarray:
    """Sketches for a batch of blocks; returns (B, 16) packed uint8.

    Bit i of a sketch is 1 iff hash pre-activation i >= 0; bits pack
    MSB-first (bit 0 is the top bit of byte 0).
    """
    if isinstance(blocks, np.ndarray):
        arr = blocks
    else:
        arr = np.frombuffer(b"".join(blocks), dtype=np.uint8).reshape(
            len(blocks), cfg.input_len)
    if arr.shape[0] == 0:
        return np.zeros((0, SKETCH_BITS // 8), dtype=np.uint8)
    outs = []
    # chunked for memory locality; per-block results are independent of
    # the chunking (asserted in tests)
    for i in range(0, arr.shape[0], _BATCH_CHUNK):
        chunk = arr[i:i + _BATCH_CHUNK]
        x = scale_input(chunk).reshape(chunk.shape[0], cfg.input_len, 1)
        h = _forward_hash(x, cfg, weights)
        outs.append(np.packbits((h >= 0).astype(np.uint8), axis=1))
    return np.concatenate(outs) if len(outs) > 1 else outs[0]


def forward_sketch(block: bytes, cfg: ModelConfig,
                   weights: dict[str, np.ndarray]) -> bytes:
    """128-bit sketch of one block, as 16 bytes."""
    if len(block) != cfg.input_len:
        raise ValueError(f"block must be {cfg.input_len} bytes")
    return forward_sketch_batch([block], cfg, weights)[0].tobytes()


def hamming(a: bytes, b: bytes) -> int:
    """Hamming distance between two packed sketches."""
    if len(a) != len(b):
        raise ValueError("sketch lengths differ")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).bit_count()
