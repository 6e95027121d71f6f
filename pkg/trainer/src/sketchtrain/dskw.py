"""DSKW weight-file writer and the numpy verification forward pass.

The writer emits the fixed 24-tensor enumeration of the DSKW format.
The forward pass here exists to verify exports: it follows the format's
documented arithmetic contract (channels-last layout, tap-major im2col
columns, one float32 matmul per conv, the folded batch-norm affine,
128-block chunking), so its sketches must agree bit-for-bit with any
conforming consumer of the same file on the same platform.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"DSKW"
VERSION = 1
INPUT_LEN = 4096
CONV_CHANNELS = (16, 32, 64)
CONV_KERNEL = 8
POOL = 4
DENSE_UNITS = 1024

_EPS = np.float32(1e-5)
_CHUNK = 128


class WeightFormatError(Exception):
    pass


def tensor_specs(class_count: int, hash_bits: int = 128):
    specs = []
    in_ch = 1
    for i, out_ch in enumerate(CONV_CHANNELS, start=1):
        specs.append((f"conv{i}.weight", (out_ch, in_ch, CONV_KERNEL)))
        specs.append((f"conv{i}.bias", (out_ch,)))
        for p in ("gamma", "beta", "mean", "var"):
            specs.append((f"bn{i}.{p}", (out_ch,)))
        in_ch = out_ch
    flat = (INPUT_LEN // POOL ** len(CONV_CHANNELS)) * CONV_CHANNELS[-1]
    specs.append(("dense.weight", (DENSE_UNITS, flat)))
    specs.append(("dense.bias", (DENSE_UNITS,)))
    specs.append(("hash.weight", (hash_bits, DENSE_UNITS)))
    specs.append(("hash.bias", (hash_bits,)))
    specs.append(("head.weight", (class_count, hash_bits)))
    specs.append(("head.bias", (class_count,)))
    return specs


def write_dskw(path: str, class_count: int, weights: dict[str, np.ndarray],
               hash_bits: int = 128) -> None:
    """Write tensors in the fixed enumeration order (shapes validated)."""
    specs = tensor_specs(class_count, hash_bits)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIII", VERSION, class_count, hash_bits,
                            len(specs)))
        for name, shape in specs:
            if name not in weights:
                raise WeightFormatError(f"missing tensor {name!r}")
            arr = np.ascontiguousarray(weights[name], dtype="<f4")
            if arr.shape != shape:
                raise WeightFormatError(
                    f"tensor {name!r} has shape {arr.shape}, want {shape}")
            if not np.isfinite(arr).all():
                raise WeightFormatError(f"tensor {name!r} is not finite")
            f.write(bytes([len(name)]))
            f.write(name.encode("ascii"))
            f.write(bytes([arr.ndim]))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_dskw(path: str) -> tuple[int, int, dict[str, np.ndarray]]:
    """Returns (class_count, hash_bits, tensors); validates the layout."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 20 or data[:4] != MAGIC:
        raise WeightFormatError("not a DSKW weight file")
    version, class_count, hash_bits, tensor_count = struct.unpack_from(
        "<IIII", data, 4)
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    specs = tensor_specs(class_count, hash_bits)
    if tensor_count != len(specs):
        raise WeightFormatError("unexpected tensor count")
    pos = 20
    out = {}
    for want_name, want_shape in specs:
        name_len = data[pos]
        pos += 1
        name = data[pos:pos + name_len].decode("ascii")
        pos += name_len
        if name != want_name:
            raise WeightFormatError(f"tensor {name!r}, expected {want_name!r}")
        rank = data[pos]
        pos += 1
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        if tuple(dims) != want_shape:
            raise WeightFormatError(f"tensor {name!r} shape mismatch")
        count = int(np.prod(want_shape))
        out[name] = np.frombuffer(data, dtype="<f4", count=count,
                                  offset=pos).reshape(want_shape)
        pos += 4 * count
    if pos != len(data):
        raise WeightFormatError("trailing bytes")
    return class_count, hash_bits, out


# -- verification forward pass ---------------------------------------------------

def _conv_block(x, w, bias, gamma, beta, mean, var):
    nb, length, c_in = x.shape
    k = CONV_KERNEL
    pad_l = (k - 1) // 2
    stride = length + k - 1
    c_out = w.shape[0]
    flat = np.zeros((nb * stride + k - 1, c_in), dtype=np.float32)
    flat[:nb * stride].reshape(nb, stride, c_in)[:, pad_l:pad_l + length, :] = x
    cols = np.empty((nb * stride, k * c_in), dtype=np.float32)
    for t in range(k):
        cols[:, t * c_in:(t + 1) * c_in] = flat[t:t + nb * stride]
    wmat = np.ascontiguousarray(w.transpose(2, 1, 0).reshape(k * c_in, c_out))
    y = np.matmul(cols, wmat)
    scale = gamma / np.sqrt(var + _EPS)
    shift = (bias - mean) * scale + beta
    np.multiply(y, scale, out=y)
    np.add(y, shift, out=y)
    np.maximum(y, np.float32(0), out=y)
    row = y.strides[0]
    pooled = np.lib.stride_tricks.as_strided(
        y, shape=(nb, length // POOL, POOL, c_out),
        strides=(stride * row, POOL * row, row, y.strides[1]))
    return pooled.max(axis=2)


def hash_preactivations(blocks: np.ndarray,
                        weights: dict[str, np.ndarray]) -> np.ndarray:
    """Float32 hash-layer pre-activations for uint8 blocks (N, 4096)."""
    outs = []
    for i in range(0, blocks.shape[0], _CHUNK):
        chunk = blocks[i:i + _CHUNK]
        x = chunk.astype(np.float32) / np.float32(255)
        x = x * np.float32(2)
        x = x - np.float32(1)
        x = x.reshape(chunk.shape[0], INPUT_LEN, 1)
        for j in range(1, len(CONV_CHANNELS) + 1):
            x = _conv_block(x, weights[f"conv{j}.weight"],
                            weights[f"conv{j}.bias"],
                            weights[f"bn{j}.gamma"], weights[f"bn{j}.beta"],
                            weights[f"bn{j}.mean"], weights[f"bn{j}.var"])
        flat = np.ascontiguousarray(x.transpose(0, 2, 1)).reshape(
            chunk.shape[0], -1)
        d = np.matmul(flat, weights["dense.weight"].T) + weights["dense.bias"]
        d = np.maximum(d, np.float32(0))
        h = np.matmul(d, weights["hash.weight"].T) + weights["hash.bias"]
        outs.append(h)
    return np.concatenate(outs) if len(outs) > 1 else outs[0]


def sketches(blocks: np.ndarray, weights: dict[str, np.ndarray]) -> np.ndarray:
    """Packed sketches (N, hash_bits/8) uint8, MSB-first bit order;
    a non-negative pre-activation sets the bit."""
    h = hash_preactivations(blocks, weights)
    return np.packbits((h >= 0).astype(np.uint8), axis=1)
