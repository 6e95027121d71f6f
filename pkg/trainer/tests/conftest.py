import random
import struct

BLOCK = 4096


def perturb_run(base: bytes, n_min: int, n_max: int,
                rng: random.Random) -> bytes:
    out = bytearray(base)
    n = rng.randint(n_min, n_max)
    start = rng.randrange(BLOCK - n)
    for p in range(start, start + n):
        out[p] = (out[p] + rng.randint(1, 255)) & 0xFF
    return bytes(out)


def write_dsds(path: str, blocks, labels, class_count: int) -> None:
    with open(path, "wb") as f:
        f.write(b"DSDS")
        f.write(struct.pack("<III", 1, len(blocks), class_count))
        for b, y in zip(blocks, labels):
            f.write(struct.pack("<I", y))
            f.write(b)


def family_dsds(path: str, families: int, per_family: int,
                perturb_min: int, perturb_max: int, seed: int) -> None:
    """A balanced family dataset: per_family perturbed variants of one
    random template per class."""
    rng = random.Random(seed)
    blocks, labels = [], []
    for fam in range(families):
        template = rng.randbytes(BLOCK)
        for _ in range(per_family):
            blocks.append(perturb_run(template, perturb_min, perturb_max, rng))
            labels.append(fam)
    write_dsds(path, blocks, labels, families)
