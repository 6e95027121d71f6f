"""Fixed-size block corpora: loading, synthetic generation, perturbation.

Every unit of storage I/O in this engine is a 4096-byte block.  Files are
ingested as raw concatenations of blocks, with a zero-padded tail.  The
synthetic generator produces "family" corpora (perturbed variants of a
small number of template blocks plus exact duplicates), which give the
clustering and sketching tests controllable ground truth.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .errors import CorpusLoadError

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic family corpus.

    The same spec always produces a byte-identical corpus: templates and
    variants are drawn from per-family sub-seeds derived from `seed`, so
    a family's template depends only on (seed, family index).
    """

    families: int
    blocks_per_family: int
    duplicate_rate: float = 0.0
    perturb_bytes_max: int = 64
    perturb_runs_max: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.families < 1 or self.blocks_per_family < 1:
            raise ValueError("families and blocks_per_family must be >= 1")
        if not 0.0 <= self.duplicate_rate <= 1.0:
            raise ValueError("duplicate_rate must be in [0, 1]")
        if self.perturb_bytes_max < 0 or self.perturb_bytes_max > BLOCK_SIZE:
            raise ValueError("perturb_bytes_max must be in [0, 4096]")


class BlockCorpus:
    """Ordered, immutable sequence of 4096-byte blocks.

    Blocks are addressed by zero-based index (the block id); ids are
    stable for the corpus lifetime.
    """

    def __init__(self, blocks: list[bytes], source_id: str = ""):
        for i, b in enumerate(blocks):
            if len(b) != BLOCK_SIZE:
                raise ValueError(f"block {i} has length {len(b)}, want {BLOCK_SIZE}")
        self._blocks = list(blocks)
        self.source_id = source_id

    @property
    def blocks(self) -> list[bytes]:
        return self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def __getitem__(self, idx: int) -> bytes:
        return self._blocks[idx]

    def __iter__(self):
        return iter(self._blocks)

    def content_hash(self) -> str:
        """MD5 over the concatenated block bytes; embedded in evaluation
        artifacts so mismatched corpus/oracle/log files are detectable."""
        h = hashlib.md5()
        for b in self._blocks:
            h.update(b)
        return h.hexdigest()


def load_corpus(path: str) -> BlockCorpus:
    """Read a raw corpus file, zero-padding a trailing partial block."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CorpusLoadError(f"cannot read corpus {path!r}: {e}") from e
    blocks = []
    for off in range(0, len(data), BLOCK_SIZE):
        chunk = data[off:off + BLOCK_SIZE]
        if len(chunk) < BLOCK_SIZE:
            chunk = chunk + bytes(BLOCK_SIZE - len(chunk))
        blocks.append(chunk)
    return BlockCorpus(blocks, source_id=path)


def save_corpus(corpus: BlockCorpus, path: str) -> None:
    """Write the raw concatenation consumed by load_corpus and the trainer."""
    with open(path, "wb") as f:
        for b in corpus:
            f.write(b)


def perturb_block(block: bytes, max_bytes: int, max_runs: int,
                  rng: random.Random) -> bytes:
    """Rewrite 1..max_bytes byte positions of `block`, arranged in at most
    max_runs contiguous runs at uniformly chosen offsets.

    Every touched byte is replaced by a uniformly random *different* value,
    so the output is guaranteed to differ from the input in at least one
    and at most max_bytes positions.
    """
    if not 1 <= max_bytes <= BLOCK_SIZE:
        raise ValueError("max_bytes must be in [1, 4096]")
    if max_runs < 1:
        raise ValueError("max_runs must be >= 1")

    n_bytes = rng.randint(1, max_bytes)
    n_runs = rng.randint(1, min(max_runs, n_bytes))

    # Split n_bytes into n_runs positive lengths.
    if n_runs > 1:
        cuts = sorted(rng.sample(range(1, n_bytes), n_runs - 1))
    else:
        cuts = []
    bounds = [0] + cuts + [n_bytes]
    lengths = [bounds[i + 1] - bounds[i] for i in range(n_runs)]

    # Non-overlapping placement: sorted anchor offsets in the free space,
    # shifted by the cumulative length of preceding runs.  Adjacent runs
    # may touch, which only merges them (still <= max_runs runs).
    free = BLOCK_SIZE - n_bytes
    anchors = sorted(rng.randint(0, free) for _ in range(n_runs))

    out = bytearray(block)
    placed = 0
    for anchor, length in zip(anchors, lengths):
        start = anchor + placed
        for p in range(start, start + length):
            out[p] = (out[p] + rng.randint(1, 255)) & 0xFF
        placed += length
    return bytes(out)


def _template_rng(seed: int, family: int) -> random.Random:
    return random.Random(f"{seed}:tmpl:{family}")


def family_template(spec: SynthSpec, family: int) -> bytes:
    """The template block a family's variants are perturbed from."""
    return _template_rng(spec.seed, family).randbytes(BLOCK_SIZE)


def generate_labeled_corpus(spec: SynthSpec) -> tuple[BlockCorpus, list[int]]:
    """generate_corpus plus the per-block family labels (ground truth for
    clustering and sketching tests; duplicates inherit their source's label)."""
    entries: list[tuple[bytes, int]] = []
    for f in range(spec.families):
        template = family_template(spec, f)
        for i in range(spec.blocks_per_family):
            if spec.perturb_bytes_max > 0:
                vrng = random.Random(f"{spec.seed}:var:{f}:{i}")
                blk = perturb_block(template, spec.perturb_bytes_max,
                                    spec.perturb_runs_max, vrng)
            else:
                blk = template
            entries.append((blk, f))

    srng = random.Random(f"{spec.seed}:order")
    srng.shuffle(entries)

    total = len(entries)
    n_dup = round(spec.duplicate_rate * total)
    if n_dup > 0 and total > 1:
        dup_positions = sorted(srng.sample(range(1, total), min(n_dup, total - 1)))
        for pos in dup_positions:
            src = srng.randrange(0, pos)
            entries[pos] = entries[src]

    blocks = [b for b, _ in entries]
    labels = [f for _, f in entries]
    corpus = BlockCorpus(blocks, source_id=f"synth:{spec.seed}")
    return corpus, labels


def generate_corpus(spec: SynthSpec) -> BlockCorpus:
    """Deterministic synthetic corpus: per-family perturbed variants of a
    random template, with a duplicate_rate fraction of emitted blocks
    replaced by exact copies of earlier blocks, in seeded-shuffled order."""
    return generate_labeled_corpus(spec)[0]


def byte_diff(a: bytes, b: bytes) -> int:
    """Number of differing byte positions (test oracle helper)."""
    return sum(1 for x, y in zip(a, b) if x != y)
