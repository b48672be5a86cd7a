"""Dataset ingestion, statistics, and bit-exact checkpoint persistence.

Triple files are UTF-8, one fact per line, exactly two TAB separators, no
header. Checkpoints use a fixed binary layout (see ``save_checkpoint``)
with 32-bit little-endian floats and a trailing CRC-32, so a round trip
reproduces every stored value bit for bit.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ChecksumError, EmptyDatasetError, FormatError, IoError, ParseError, ShapeError
from .graph import KnowledgeGraph, Triple, Vocab, assemble_graph, code_triples

MAGIC = b"GCATCKPT"
FORMAT_VERSION = 1

# Stage tags as stored in the checkpoint's single tag byte.
STAGE_TAGS = {"transe": 1, "encoder": 2, "decoder": 3}
_TAG_STAGES = {v: k for k, v in STAGE_TAGS.items()}


@dataclass(frozen=True)
class DatasetBundle:
    """Train/valid/test splits integer-coded against one union vocabulary.

    ``graph`` indexes the training triples only; validation and test ids
    resolve in the same vocabulary so evaluation can rank them.
    """

    graph: KnowledgeGraph
    train: tuple[Triple, ...]
    valid: tuple[Triple, ...]
    test: tuple[Triple, ...]

    @property
    def num_entities(self) -> int:
        return self.graph.num_entities

    @property
    def num_relations(self) -> int:
        return self.graph.num_relations


@dataclass(frozen=True)
class DatasetStats:
    num_entities: int
    num_relations: int
    num_train: int
    num_valid: int
    num_test: int


def read_triple_file(path) -> list[tuple[str, str, str]]:
    """Parse one TSV triple file; fails loud on any malformed line."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline
    out = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"expected head<TAB>relation<TAB>tail, got {len(fields)} field(s)",
                path=str(path),
                line=lineno,
            )
        if any(not f for f in fields):
            raise ParseError("empty field", path=str(path), line=lineno)
        out.append((fields[0], fields[1], fields[2]))
    return out


def bundle_from_raw(
    train_raw: list[tuple[str, str, str]],
    valid_raw: list[tuple[str, str, str]],
    test_raw: list[tuple[str, str, str]],
) -> DatasetBundle:
    """Build a bundle over the union vocabulary of all three splits."""
    if not train_raw:
        raise EmptyDatasetError("training split is empty")
    entities = Vocab()
    relations = Vocab()
    train = tuple(code_triples(train_raw, entities, relations))
    valid = tuple(code_triples(valid_raw, entities, relations))
    test = tuple(code_triples(test_raw, entities, relations))
    for name_a, a, name_b, b in (
        ("train", train, "valid", valid),
        ("train", train, "test", test),
        ("valid", valid, "test", test),
    ):
        overlap = set(a) & set(b)
        if overlap:
            raise ParseError(f"{name_a} and {name_b} splits share {len(overlap)} triple(s)")
    graph = assemble_graph(entities, relations, train)
    return DatasetBundle(graph, train, valid, test)


def load_split(train_path, valid_path, test_path) -> DatasetBundle:
    return bundle_from_raw(
        read_triple_file(train_path),
        read_triple_file(valid_path),
        read_triple_file(test_path),
    )


def dataset_stats(bundle: DatasetBundle) -> DatasetStats:
    return DatasetStats(
        num_entities=bundle.num_entities,
        num_relations=bundle.num_relations,
        num_train=len(bundle.train),
        num_valid=len(bundle.valid),
        num_test=len(bundle.test),
    )


@dataclass
class Checkpoint:
    """Named float32 parameter blocks plus the producing stage's tag."""

    stage: str
    blocks: dict[str, np.ndarray] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.stage not in STAGE_TAGS:
            raise ValueError(f"unknown stage {self.stage!r}")
        self.blocks = {name: np.asarray(arr, dtype="<f4") for name, arr in self.blocks.items()}

    def block64(self, name: str) -> np.ndarray:
        """A block widened to float64 (the in-memory working precision)."""
        return self.blocks[name].astype(np.float64)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Write the checkpoint and fsync before returning.

    Layout: magic "GCATCKPT"; format_version u32; stage tag byte
    (transe=1, encoder=2, decoder=3); block count u32; then per block:
    name length u32, UTF-8 name, rank u32, each dimension u32, payload as
    float32 little-endian row-major. The file ends with a CRC-32 (u32 LE)
    over every preceding byte.
    """
    parts = [MAGIC, struct.pack("<I", ckpt.format_version), bytes([STAGE_TAGS[ckpt.stage]])]
    parts.append(struct.pack("<I", len(ckpt.blocks)))
    for name, arr in ckpt.blocks.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<I", dim))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    payload = b"".join(parts)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
            fh.write(struct.pack("<I", crc))
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ShapeError("checkpoint body shorter than its headers declare")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint back; every block is restored bit-exactly.

    The CRC is verified before any parsing, so corruption anywhere in the
    file surfaces as ChecksumError rather than a confusing parse failure.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 4:
        raise FormatError(f"{path}: too short to be a checkpoint")
    payload, stored = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise ChecksumError(f"{path}: CRC-32 mismatch")

    cur = _Cursor(payload)
    if cur.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{path}: bad magic")
    version = cur.u32()
    tag = cur.take(1)[0]
    if tag not in _TAG_STAGES:
        raise FormatError(f"{path}: unknown stage tag {tag}")
    count = cur.u32()
    blocks: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = cur.take(cur.u32()).decode("utf-8")
        rank = cur.u32()
        shape = tuple(cur.u32() for _ in range(rank))
        n_elems = 1
        for dim in shape:
            n_elems *= dim
        raw = cur.take(4 * n_elems)
        blocks[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    if cur.pos != len(payload):
        raise FormatError(f"{path}: {len(payload) - cur.pos} trailing byte(s) after last block")
    return Checkpoint(stage=_TAG_STAGES[tag], blocks=blocks, format_version=version)


class LossLog:
    """Per-epoch loss CSV, appended as training progresses."""

    def __init__(self, path):
        self.path = path
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,mean_loss\n")

    def append(self, epoch: int, mean_loss: float) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(f"{epoch},{mean_loss!r}\n")
