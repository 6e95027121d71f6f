"""The data-reduction module: dedup -> reference search -> delta ->
lossless write path, byte-exact read path, append-only container store,
and sketcher selection including the combined mode.

Write path per block: a fingerprint hit short-circuits to a dedup record.
Otherwise each configured sketcher proposes reference candidates; the
block is delta-encoded against them and the delta is kept only if it
actually saves stored bytes over the lossless frame (by default the
comparison includes the delta record's extra reference field, so a
stored delta is never larger on disk than the lossless alternative).
In combined mode both sketchers run and the smaller accepted delta wins;
each sketcher inserts the block's sketch into its own store exactly when
*it* found no accepted reference, so every store evolves identically to
the corresponding single-sketcher run.  That per-technique rule is what
makes the combined mode's physical size provably <= either standalone
mode on the same corpus; its cost is that a delta reference may itself
be a delta-stored block (single-sketcher runs keep depth-1 chains), so
the read path resolves reference chains iteratively.

Container file: magic "DDCS", u32 LE version=1, then append-only
records: u8 kind (0=lossless, 1=delta, 2=dedup), u64 LE logical id,
(kinds 1,2) u64 LE ref id, u32 LE payload length, payload bytes.
The index is rebuilt by a full scan on open.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field

from . import codec, nnmodel, sfsketch
from .corpus import BLOCK_SIZE, BlockCorpus
from .errors import BlockNotFoundError, StoreError
from .fingerprint import FpStore, fingerprint
from .skstore import SkStore, SkStoreConfig

KIND_LOSSLESS = 0
KIND_DELTA = 1
KIND_DEDUP = 2

_KIND_NAMES = {KIND_LOSSLESS: "lossless", KIND_DELTA: "delta", KIND_DEDUP: "dedup"}

CONTAINER_MAGIC = b"DDCS"
CONTAINER_VERSION = 1

# extra stored bytes a delta/dedup record carries over a lossless one
# (the u64 reference field); part of the delta-acceptance comparison
REF_FIELD_BYTES = 8

SKETCHER_MODES = ("none", "finesse", "deepsketch", "combined")

LATENCY_STEPS = ("sketch_generation", "sk_retrieval", "sk_update",
                 "dedup", "delta", "lossless")


@dataclass(frozen=True)
class RecordEntry:
    kind: int
    logical_id: int
    ref: int | None
    payload_offset: int
    payload_length: int
    record_size: int


class ContainerStore:
    """Append-only record container with a scan-rebuilt index."""

    def __init__(self, path: str, create: bool = True):
        self.path = path
        self._index: dict[int, RecordEntry] = {}
        if create:
            self._f = open(path, "w+b")
            self._f.write(CONTAINER_MAGIC + struct.pack("<I", CONTAINER_VERSION))
        else:
            try:
                self._f = open(path, "r+b")
            except OSError as e:
                raise StoreError(f"cannot open store {path!r}: {e}") from e
            self._scan()

    def _scan(self) -> None:
        f = self._f
        file_size = f.seek(0, 2)
        f.seek(0)
        head = f.read(8)
        if len(head) < 8 or head[:4] != CONTAINER_MAGIC:
            raise StoreError("bad container magic")
        version = struct.unpack("<I", head[4:])[0]
        if version != CONTAINER_VERSION:
            raise StoreError(f"unsupported container version {version}")
        while True:
            start = f.tell()
            hdr = f.read(9)
            if not hdr:
                break
            if len(hdr) < 9:
                raise StoreError(f"truncated record header at {start}")
            kind = hdr[0]
            logical_id = struct.unpack("<Q", hdr[1:9])[0]
            ref = None
            if kind in (KIND_DELTA, KIND_DEDUP):
                raw = f.read(8)
                if len(raw) < 8:
                    raise StoreError(f"truncated ref field at {start}")
                ref = struct.unpack("<Q", raw)[0]
            elif kind != KIND_LOSSLESS:
                raise StoreError(f"unknown record kind {kind} at {start}")
            raw = f.read(4)
            if len(raw) < 4:
                raise StoreError(f"truncated length field at {start}")
            length = struct.unpack("<I", raw)[0]
            payload_offset = f.tell()
            if payload_offset + length > file_size:
                raise StoreError(f"truncated payload at {start}")
            f.seek(length, 1)
            if logical_id in self._index:
                raise StoreError(f"duplicate logical id {logical_id}")
            self._index[logical_id] = RecordEntry(
                kind, logical_id, ref, payload_offset, length,
                payload_offset + length - start)
        f.seek(0, 2)

    def append(self, kind: int, logical_id: int, ref: int | None,
               payload: bytes) -> RecordEntry:
        if logical_id in self._index:
            raise StoreError(f"logical id {logical_id} already written")
        parts = [bytes([kind]), struct.pack("<Q", logical_id)]
        if kind in (KIND_DELTA, KIND_DEDUP):
            parts.append(struct.pack("<Q", ref))
        parts.append(struct.pack("<I", len(payload)))
        header = b"".join(parts)
        f = self._f
        start = f.seek(0, 2)
        f.write(header + payload)  # single write: all-or-nothing append
        entry = RecordEntry(kind, logical_id, ref,
                            start + len(header), len(payload),
                            len(header) + len(payload))
        self._index[logical_id] = entry
        return entry

    def entry(self, logical_id: int) -> RecordEntry:
        try:
            return self._index[logical_id]
        except KeyError:
            raise BlockNotFoundError(f"block id {logical_id} not in store") from None

    def payload(self, entry: RecordEntry) -> bytes:
        self._f.seek(entry.payload_offset)
        data = self._f.read(entry.payload_length)
        if len(data) != entry.payload_length:
            raise StoreError("short payload read")
        return data

    def ids(self) -> list[int]:
        return sorted(self._index)

    def __contains__(self, logical_id: int) -> bool:
        return logical_id in self._index

    def __len__(self) -> int:
        return len(self._index)

    def flush(self) -> None:
        self._f.flush()

    def close(self) -> None:
        self._f.close()


@dataclass(frozen=True)
class PipelineConfig:
    sketcher: str = "none"
    weights_path: str | None = None
    candidates: int = 1          # reference candidates fetched per sketcher
    delta_accept: str = "record"  # "record" (incl. ref field) | "frame"
    verify_read_back: bool = True

    def __post_init__(self):
        if self.sketcher not in SKETCHER_MODES:
            raise ValueError(f"unknown sketcher {self.sketcher!r}")
        if self.sketcher in ("deepsketch", "combined") and not self.weights_path:
            raise ValueError(f"sketcher {self.sketcher!r} requires weights_path")
        if self.candidates < 1:
            raise ValueError("candidates must be >= 1")
        if self.delta_accept not in ("record", "frame"):
            raise ValueError(f"unknown delta_accept rule {self.delta_accept!r}")


def delta_accepted(delta_size: int, lossless_size: int, rule: str = "record") -> bool:
    """Whether a delta frame is worth storing over the lossless frame."""
    if rule == "record":
        return delta_size + REF_FIELD_BYTES < lossless_size
    return delta_size < lossless_size


@dataclass
class Outcome:
    index: int
    kind: str                    # "dedup" | "delta" | "lossless"
    ref: int | None = None
    payload_size: int = 0
    record_size: int = 0
    technique: str | None = None   # which sketcher found the stored reference
    distance: int | None = None    # deepsketch Hamming distance
    buffer_hit: bool | None = None
    match_count: int | None = None  # finesse matching-SF count

    def log_record(self) -> dict:
        rec = {"type": "block", "i": self.index, "outcome": self.kind,
               "size": self.payload_size, "rsize": self.record_size}
        if self.ref is not None:
            rec["ref"] = self.ref
        if self.technique is not None:
            rec["tech"] = self.technique
        if self.distance is not None:
            rec["dist"] = self.distance
        if self.buffer_hit is not None:
            rec["buf"] = self.buffer_hit
        if self.match_count is not None:
            rec["mc"] = self.match_count
        return rec


@dataclass
class PipelineStats:
    sketcher: str
    blocks: int = 0
    dedup_count: int = 0
    delta_count: int = 0
    lossless_count: int = 0
    logical_bytes: int = 0
    physical_bytes: int = 0       # records incl. headers (file header excluded)
    payload_bytes: int = 0
    deepsketch_refs: int = 0
    buffer_hits: int = 0
    latency_ns: dict = field(default_factory=lambda: {
        step: 0 for step in LATENCY_STEPS})
    latency_ops: dict = field(default_factory=lambda: {
        step: 0 for step in LATENCY_STEPS})

    @property
    def drr(self) -> float:
        return self.logical_bytes / self.physical_bytes if self.physical_bytes else 0.0

    @property
    def buffer_hit_fraction(self) -> float | None:
        if self.deepsketch_refs == 0:
            return None
        return self.buffer_hits / self.deepsketch_refs

    def to_dict(self) -> dict:
        lat = {}
        for step in LATENCY_STEPS:
            ops = self.latency_ops[step]
            lat[step] = {
                "total_us": self.latency_ns[step] / 1e3,
                "ops": ops,
                "mean_us": (self.latency_ns[step] / ops / 1e3) if ops else None,
            }
        return {
            "sketcher": self.sketcher,
            "blocks": self.blocks,
            "dedup_count": self.dedup_count,
            "delta_count": self.delta_count,
            "lossless_count": self.lossless_count,
            "logical_bytes": self.logical_bytes,
            "physical_bytes": self.physical_bytes,
            "payload_bytes": self.payload_bytes,
            "drr": self.drr,
            "buffer_hit_fraction": self.buffer_hit_fraction,
            "latency": lat,
        }


class FinesseSketcher:
    name = "finesse"

    def __init__(self, cfg: sfsketch.SfConfig | None = None):
        self.cfg = cfg or sfsketch.SfConfig()
        self.store = sfsketch.SfStore(self.cfg)

    def sketch(self, block: bytes) -> tuple[int, ...]:
        return sfsketch.sketch_block(block, self.cfg)

    def query(self, sketch: tuple[int, ...], k: int) -> list[dict]:
        return [{"id": bid, "match_count": count}
                for bid, count in self.store.match_topk(sketch, k)]

    def insert(self, sketch: tuple[int, ...], block_id: int) -> None:
        self.store.insert(sketch, block_id)

    def flush(self) -> None:
        pass


class DeepSketcher:
    name = "deepsketch"

    def __init__(self, weights_path: str,
                 store_cfg: SkStoreConfig | None = None):
        self.model_cfg, self.weights = nnmodel.load_weights(weights_path)
        self.store = SkStore(store_cfg or SkStoreConfig())

    def sketch(self, block: bytes) -> bytes:
        return nnmodel.forward_sketch(block, self.model_cfg, self.weights)

    def sketch_batch(self, blocks: list[bytes]) -> list[bytes]:
        packed = nnmodel.forward_sketch_batch(blocks, self.model_cfg, self.weights)
        return [row.tobytes() for row in packed]

    def query(self, sketch: bytes, k: int) -> list[dict]:
        return [{"id": c.block_id, "distance": c.distance,
                 "source": c.source}
                for c in self.store.query(sketch, k)]

    def insert(self, sketch: bytes, block_id: int) -> None:
        self.store.insert(sketch, block_id)

    def flush(self) -> None:
        self.store.flush()


class Pipeline:
    """One open data-reduction store plus its in-memory search state.

    Writing is strictly sequential (reference availability depends on
    prior writes); reads may interleave freely between writes.
    """

    def __init__(self, store_path: str, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.store = ContainerStore(store_path, create=True)
        self.fp_store = FpStore()
        self.stats = PipelineStats(sketcher=self.config.sketcher)
        self._next_id = 0
        self.sketchers: list = []
        if self.config.sketcher in ("finesse", "combined"):
            self.sketchers.append(FinesseSketcher())
        if self.config.sketcher in ("deepsketch", "combined"):
            self.sketchers.append(DeepSketcher(self.config.weights_path))

    # -- timing ------------------------------------------------------------

    def _lap(self, step: str, t0: int, ops: int = 1) -> int:
        t1 = time.perf_counter_ns()
        self.stats.latency_ns[step] += t1 - t0
        self.stats.latency_ops[step] += ops
        return t1

    # -- write path --------------------------------------------------------

    def write_block(self, block: bytes,
                    precomputed_sketches: dict | None = None) -> Outcome:
        if len(block) != BLOCK_SIZE:
            raise ValueError(f"block must be {BLOCK_SIZE} bytes")
        idx = self._next_id
        self._next_id += 1
        st = self.stats
        st.blocks += 1
        st.logical_bytes += BLOCK_SIZE

        t0 = time.perf_counter_ns()
        fp = fingerprint(block)
        hit = self.fp_store.lookup(fp)
        if hit is not None:
            entry = self.store.append(KIND_DEDUP, idx, hit, b"")
            self._lap("dedup", t0)
            st.dedup_count += 1
            st.physical_bytes += entry.record_size
            return Outcome(idx, "dedup", ref=hit,
                           record_size=entry.record_size)
        self.fp_store.insert(fp, idx)
        t0 = self._lap("dedup", t0)

        # sketch generation (skipped for deduplicated blocks above)
        sketches = {}
        computed = 0
        for sk in self.sketchers:
            if precomputed_sketches and sk.name in precomputed_sketches:
                sketches[sk.name] = precomputed_sketches[sk.name]
            else:
                sketches[sk.name] = sk.sketch(block)
                computed += 1
        if computed:
            t0 = self._lap("sketch_generation", t0, ops=computed)
        else:
            t0 = time.perf_counter_ns()

        # reference candidates per sketcher
        candidates = {}
        for sk in self.sketchers:
            candidates[sk.name] = sk.query(sketches[sk.name],
                                           self.config.candidates)
        if self.sketchers:
            t0 = self._lap("sk_retrieval", t0, ops=len(self.sketchers))

        lossless_frame = codec.lossless_compress(block)
        t0 = self._lap("lossless", t0)

        # per-technique best delta
        best: dict[str, tuple[int, bytes, dict]] = {}
        n_encodes = 0
        for sk in self.sketchers:
            tech_best = None
            for cand in candidates[sk.name]:
                ref_bytes = self.read_block(cand["id"])
                frame = codec.delta_encode(block, ref_bytes)
                n_encodes += 1
                if tech_best is None or len(frame) < len(tech_best[1]):
                    tech_best = (cand["id"], frame, cand)
            if tech_best is not None and delta_accepted(
                    len(tech_best[1]), len(lossless_frame),
                    self.config.delta_accept):
                best[sk.name] = tech_best
        if n_encodes:
            t0 = self._lap("delta", t0, ops=n_encodes)

        chosen_tech = None
        for sk in self.sketchers:  # combined tie at equal size: first wins
            if sk.name in best:
                if chosen_tech is None or \
                        len(best[sk.name][1]) < len(best[chosen_tech][1]):
                    chosen_tech = sk.name

        if chosen_tech is not None:
            ref_id, frame, cand = best[chosen_tech]
            entry = self.store.append(KIND_DELTA, idx, ref_id, frame)
            st.delta_count += 1
            outcome = Outcome(idx, "delta", ref=ref_id,
                              payload_size=len(frame),
                              record_size=entry.record_size,
                              technique=chosen_tech,
                              distance=cand.get("distance"),
                              buffer_hit=(cand.get("source") == "buffer"
                                          if "source" in cand else None),
                              match_count=cand.get("match_count"))
            if chosen_tech == "deepsketch":
                st.deepsketch_refs += 1
                if outcome.buffer_hit:
                    st.buffer_hits += 1
        else:
            entry = self.store.append(KIND_LOSSLESS, idx, None, lossless_frame)
            st.lossless_count += 1
            outcome = Outcome(idx, "lossless",
                              payload_size=len(lossless_frame),
                              record_size=entry.record_size)
        st.physical_bytes += entry.record_size
        st.payload_bytes += entry.payload_length

        # a sketcher keeps this block as a future reference exactly when
        # it found no accepted reference itself (its store then evolves
        # as in the corresponding single-sketcher run)
        t0 = time.perf_counter_ns()
        updated = 0
        for sk in self.sketchers:
            if sk.name not in best:
                sk.insert(sketches[sk.name], idx)
                updated += 1
        if updated:
            self._lap("sk_update", t0, ops=updated)
        return outcome

    # -- read path ---------------------------------------------------------

    def read_block(self, logical_id: int) -> bytes:
        return resolve_block(self.store, logical_id)

    # -- batch driver --------------------------------------------------------

    def run_corpus(self, corpus: BlockCorpus,
                   log_sink=None) -> PipelineStats:
        """Write every block in corpus order, flush the sketch stores,
        verify read-back (unless disabled), and return the stats."""
        if log_sink is not None:
            log_sink.write(json.dumps({
                "type": "header",
                "corpus_md5": corpus.content_hash(),
                "sketcher": self.config.sketcher,
                "blocks": len(corpus),
                "candidates": self.config.candidates,
                "delta_accept": self.config.delta_accept,
            }) + "\n")

        pre: list[dict] = [{} for _ in range(len(corpus))]
        deep = next((s for s in self.sketchers if s.name == "deepsketch"), None)
        if deep is not None and len(corpus) > 0:
            t0 = time.perf_counter_ns()
            for sk_bytes, slot in zip(deep.sketch_batch(corpus.blocks), pre):
                slot["deepsketch"] = sk_bytes
            # batched inference; amortized into the per-block step time
            self._lap("sketch_generation", t0, ops=len(corpus))

        for i, block in enumerate(corpus):
            outcome = self.write_block(block, precomputed_sketches=pre[i])
            if log_sink is not None:
                log_sink.write(json.dumps(outcome.log_record()) + "\n")

        t0 = time.perf_counter_ns()
        for sk in self.sketchers:
            sk.flush()
        if self.sketchers:
            self._lap("sk_update", t0, ops=len(self.sketchers))
        self.store.flush()

        if self.config.verify_read_back:
            mismatches = self.verify_corpus(corpus)
            if mismatches:
                raise StoreError(f"read-back verification failed for "
                                 f"{len(mismatches)} blocks: {mismatches[:8]}")
        return self.stats

    def verify_corpus(self, corpus: BlockCorpus) -> list[int]:
        """Block ids whose read-back differs from the corpus (empty == good)."""
        return [i for i in range(len(corpus))
                if self.read_block(i) != corpus[i]]

    def close(self) -> None:
        self.store.close()


def resolve_block(store: ContainerStore, logical_id: int) -> bytes:
    """Decode the original bytes of a written block: dedup records alias
    their reference, delta chains are applied over the lossless base."""
    entry = store.entry(logical_id)
    if entry.kind == KIND_DEDUP:
        entry = store.entry(entry.ref)
        if entry.kind == KIND_DEDUP:
            raise StoreError("dedup record references a dedup record")
    chain = []
    while entry.kind == KIND_DELTA:
        chain.append(entry)
        entry = store.entry(entry.ref)
        if entry.kind == KIND_DEDUP:
            raise StoreError("delta record references a dedup record")
    data = codec.lossless_decompress(store.payload(entry))
    for e in reversed(chain):
        data = codec.delta_decode(store.payload(e), data)
    return data


def check_reference_kinds(store: ContainerStore) -> dict:
    """Store-wide reference audit: counts of delta/dedup records whose
    reference resolves to each kind.  Single-sketcher stores must show
    delta references landing only on lossless records."""
    counts = {"delta_to_lossless": 0, "delta_to_delta": 0,
              "dedup_to_lossless": 0, "dedup_to_delta": 0, "dedup_to_dedup": 0}
    for lid in store.ids():
        e = store.entry(lid)
        if e.kind == KIND_LOSSLESS:
            continue
        ref_kind = store.entry(e.ref).kind
        prefix = _KIND_NAMES[e.kind]
        counts[f"{prefix}_to_{_KIND_NAMES[ref_kind]}"] = counts.get(
            f"{prefix}_to_{_KIND_NAMES[ref_kind]}", 0) + 1
    return counts
