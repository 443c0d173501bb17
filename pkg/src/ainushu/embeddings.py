"""Chinese character embedding table: the agents' knowledge of Chinese.

One vector per character, fixed dimensionality, file order preserved as the
canonical iteration order. Two on-disk formats (text TSV and binary), a
seeded synthetic generator so the whole system runs without real model
embeddings, and the cosine-similarity queries everything else builds on.
"""
from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CJK_BLOCK_START = 0x4E00
CJK_BLOCK_SIZE = 20992

TSV_HEADER = "#AIN-EMB v1"
_TSV_HEADER_RE = re.compile(r"^#AIN-EMB v1 dim=(\d+) count=(\d+)\s*$")
BINARY_MAGIC = b"AINE"
BINARY_VERSION = 1


class TableError(ValueError):
    """Malformed embedding file or invalid table contents."""


class UnknownCharError(KeyError):
    """A character is not present in the table."""

    def __init__(self, char: str):
        super().__init__(char)
        self.char = char

    def __str__(self) -> str:
        return f"character {self.char!r} not in table"


class SimilarityError(ValueError):
    """Cosine similarity is undefined for a zero vector."""


class EmbeddingTable:
    """Immutable char -> vector mapping with precomputed L2 norms.

    Vectors are stored as float32 (the binary file word size); all
    similarity arithmetic is done in float64.
    """

    def __init__(self, chars: Sequence[str], vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise TableError("vectors must be a 2-D array")
        n, dim = vectors.shape
        if len(chars) != n:
            raise TableError(f"{len(chars)} characters but {n} vector rows")
        if n < 1:
            raise TableError("table must hold at least one entry")
        if dim < 1:
            raise TableError("dimensionality must be positive")
        if not np.all(np.isfinite(vectors)):
            bad = int(np.flatnonzero(~np.isfinite(vectors).all(axis=1))[0])
            raise TableError(f"non-finite value in entry {bad} ({chars[bad]!r})")
        index: dict[str, int] = {}
        for i, c in enumerate(chars):
            if len(c) != 1:
                raise TableError(f"entry {i}: key {c!r} is not a single codepoint")
            if c in index:
                raise TableError(f"duplicate character {c!r} (entries {index[c]} and {i})")
            index[c] = i
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise TableError(f"zero vector for {chars[bad]!r} (cosine undefined)")
        vectors.setflags(write=False)
        self.chars: tuple[str, ...] = tuple(chars)
        self.vectors = vectors
        self.dim = dim
        self.norms = norms
        self._index = index

    def __len__(self) -> int:
        return len(self.chars)

    def __contains__(self, char: str) -> bool:
        return char in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return self.chars == other.chars and np.array_equal(self.vectors, other.vectors)

    def row(self, char: str) -> int:
        try:
            return self._index[char]
        except KeyError:
            raise UnknownCharError(char) from None

    def vector(self, char: str) -> np.ndarray:
        return self.vectors[self.row(char)]

    def entries(self) -> Iterable[tuple[str, np.ndarray]]:
        for i, c in enumerate(self.chars):
            yield c, self.vectors[i]

    def nearest(
        self,
        query: Sequence[float] | np.ndarray,
        k: int,
        exclude: set[str] | frozenset[str] | None = None,
    ) -> list[tuple[str, float]]:
        """k most cosine-similar entries, descending score.

        Ties are broken by ascending codepoint so results are identical
        on every platform.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise ValueError(f"query has shape {q.shape}, expected ({self.dim},)")
        qn = np.linalg.norm(q)
        if qn == 0.0:
            raise SimilarityError("zero query vector")
        scores = (self.vectors.astype(np.float64) @ q) / (self.norms * qn)
        np.clip(scores, -1.0, 1.0, out=scores)
        exclude = exclude or set()
        ranked = sorted(
            ((c, float(scores[i])) for i, c in enumerate(self.chars) if c not in exclude),
            key=lambda cs: (-cs[1], ord(cs[0])),
        )
        return ranked[:k]

    def centroid(self, chars: Sequence[str]) -> np.ndarray:
        """Component-wise mean of the given characters' vectors (float64)."""
        if not chars:
            raise ValueError("centroid of no characters")
        rows = [self.row(c) for c in chars]
        return self.vectors[rows].astype(np.float64).mean(axis=0)


def cosine(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; rejects zero vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise ValueError(f"incompatible shapes {va.shape} and {vb.shape}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise SimilarityError("cosine undefined for zero vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def generate_synthetic(n: int, dim: int, seed: int) -> EmbeddingTable:
    """Seeded synthetic table keyed by the first n CJK Unified Ideographs.

    Pure function of (n, dim, seed): rows are unit-normalized draws from a
    PCG64 stream, so identical arguments give identical tables everywhere.
    """
    if n > CJK_BLOCK_SIZE:
        raise ValueError(f"n={n} exceeds the CJK block size {CJK_BLOCK_SIZE}")
    if n < 2:
        raise ValueError("n must be >= 2")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    chars = [chr(CJK_BLOCK_START + i) for i in range(n)]
    return EmbeddingTable(chars, vecs.astype(np.float32))


def save_table(table: EmbeddingTable, path: str | Path, format: str = "binary") -> None:
    path = Path(path)
    if format == "tsv":
        lines = [f"{TSV_HEADER} dim={table.dim} count={len(table)}"]
        for char, vec in table.entries():
            lines.append(char + "\t" + ",".join(repr(float(x)) for x in vec))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif format == "binary":
        buf = bytearray()
        buf += BINARY_MAGIC
        buf += struct.pack("<III", BINARY_VERSION, table.dim, len(table))
        for char, vec in table.entries():
            buf += struct.pack("<I", ord(char))
            buf += vec.astype("<f4").tobytes()
        path.write_bytes(bytes(buf))
    else:
        raise ValueError(f"unknown format {format!r}")


def load_table(path: str | Path, format: str | None = None) -> EmbeddingTable:
    """Load a table; format inferred from the suffix when not given."""
    path = Path(path)
    if format is None:
        format = "tsv" if path.suffix in (".tsv", ".txt") else "binary"
    if format == "tsv":
        return _load_tsv(path)
    if format == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown format {format!r}")


def _load_tsv(path: Path) -> EmbeddingTable:
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise TableError(f"{path}: empty file")
    m = _TSV_HEADER_RE.match(lines[0])
    if m is None:
        raise TableError(f"{path}:1: malformed header {lines[0]!r}")
    dim, count = int(m.group(1)), int(m.group(2))
    chars: list[str] = []
    rows: list[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        char, sep, rest = line.partition("\t")
        if not sep:
            raise TableError(f"{path}:{lineno}: missing tab separator")
        if len(char) != 1:
            raise TableError(f"{path}:{lineno}: key {char!r} is not a single codepoint")
        try:
            values = np.array([float(v) for v in rest.split(",")], dtype=np.float64)
        except ValueError as exc:
            raise TableError(f"{path}:{lineno}: bad float ({exc})") from None
        if values.shape[0] != dim:
            raise TableError(
                f"{path}:{lineno}: dimension mismatch, {values.shape[0]} values under dim={dim}"
            )
        if not np.all(np.isfinite(values)):
            raise TableError(f"{path}:{lineno}: non-finite value")
        chars.append(char)
        rows.append(values.astype(np.float32))
    if len(chars) != count:
        raise TableError(f"{path}: header declares count={count} but {len(chars)} rows present")
    try:
        return EmbeddingTable(chars, np.array(rows, dtype=np.float32))
    except TableError as exc:
        raise TableError(f"{path}: {exc}") from None


def _load_binary(path: Path) -> EmbeddingTable:
    data = path.read_bytes()
    if len(data) < 16:
        raise TableError(f"{path}: truncated header ({len(data)} bytes)")
    if data[:4] != BINARY_MAGIC:
        raise TableError(f"{path}: bad magic {data[:4]!r} at offset 0")
    version, dim, count = struct.unpack_from("<III", data, 4)
    if version != BINARY_VERSION:
        raise TableError(f"{path}: unsupported version {version} at offset 4")
    record = 4 + 4 * dim
    expected = 16 + count * record
    if len(data) != expected:
        raise TableError(f"{path}: expected {expected} bytes, found {len(data)}")
    chars: list[str] = []
    vecs = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        off = 16 + i * record
        (cp,) = struct.unpack_from("<I", data, off)
        try:
            chars.append(chr(cp))
        except ValueError:
            raise TableError(f"{path}: invalid codepoint {cp:#x} at offset {off}") from None
        vecs[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=off + 4)
        if not np.all(np.isfinite(vecs[i])):
            raise TableError(f"{path}: non-finite value in record {i} at offset {off}")
    try:
        return EmbeddingTable(chars, vecs)
    except TableError as exc:
        raise TableError(f"{path}: {exc}") from None


def binary_size(dim: int, count: int) -> int:
    """Exact byte size of the binary format for a dim x count table."""
    return 16 + count * (4 + 4 * dim)
