"""The shared AIN dictionary: coined vectors, glyph bijection, persistence.

Coinage keeps a new symbol's vector near its Chinese source (seeded
spherical perturbation, normalized) while guaranteeing it differs, and the
lexicon maintains a strict char <-> glyph bijection capped at the glyph
space size. Both agents hold one lexicon each; equality after every round
is the game engine's consensus contract, checked via content hashes.
"""
from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable
from .glyphs import CODE_SPACE, GlyphCode


class LexiconError(ValueError):
    pass


class CapacityError(LexiconError):
    """The lexicon has reached the 24^3 glyph space size."""


@dataclass(frozen=True, eq=False)
class AinEntry:
    char: str
    ain_vec: np.ndarray  # float32, L2-normalized, != the Chinese vector
    glyph: GlyphCode
    epsilon: float
    coined_at: int
    coined_by: str

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AinEntry):
            return NotImplemented
        return (
            self.char == other.char
            and np.array_equal(self.ain_vec, other.ain_vec)
            and self.glyph == other.glyph
            and self.epsilon == other.epsilon
            and self.coined_at == other.coined_at
            and self.coined_by == other.coined_by
        )


def coin(char: str, table: EmbeddingTable, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """A fresh AIN vector for `char`: normalize(v + eps*|v|*u), u a seeded
    unit direction.

    The geometry guarantees cosine(ain, chinese) >= sqrt(1 - eps^2)
    >= 1 - eps^2, so the coined vector stays in the source's semantic
    neighborhood while never equaling it.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    v = table.vector(char).astype(np.float64)
    vn = np.linalg.norm(v)
    u = rng.standard_normal(table.dim)
    un = np.linalg.norm(u)
    while un == 0.0:
        u = rng.standard_normal(table.dim)
        un = np.linalg.norm(u)
    w = v + epsilon * vn * (u / un)
    w = (w / np.linalg.norm(w)).astype(np.float32)
    if np.array_equal(w, table.vector(char)):
        # epsilon below float32 resolution: a redraw cannot separate the
        # vectors, so force distinctness by one ulp (cosine cost < 1e-15)
        w = w.copy()
        w[0] = np.nextafter(w[0], np.float32(np.inf))
    return w


class AinLexicon:
    """char -> AinEntry map with a glyph reverse index (strict bijection)."""

    def __init__(self, dim: int):
        if dim < 1:
            raise LexiconError("dim must be positive")
        self.dim = dim
        self._entries: dict[str, AinEntry] = {}
        self._by_glyph: dict[GlyphCode, str] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, char: str) -> bool:
        return char in self._entries

    def insert(self, entry: AinEntry) -> None:
        if len(self._entries) >= CODE_SPACE:
            raise CapacityError(f"lexicon is at glyph-space capacity ({CODE_SPACE})")
        if entry.char in self._entries:
            raise LexiconError(f"duplicate character {entry.char!r}")
        if entry.glyph in self._by_glyph:
            raise LexiconError(
                f"glyph {entry.glyph.key()} already bound to {self._by_glyph[entry.glyph]!r}"
            )
        if entry.ain_vec.shape != (self.dim,):
            raise LexiconError(f"vector shape {entry.ain_vec.shape}, lexicon dim {self.dim}")
        self._entries[entry.char] = entry
        self._by_glyph[entry.glyph] = entry.char

    def lookup(self, char: str) -> AinEntry | None:
        return self._entries.get(char)

    def reverse_lookup(self, glyph: GlyphCode) -> str | None:
        return self._by_glyph.get(glyph)

    def known_chars(self) -> set[str]:
        return set(self._entries)

    def occupied_glyphs(self) -> set[GlyphCode]:
        return set(self._by_glyph)

    def entries_in_coinage_order(self) -> list[AinEntry]:
        return sorted(self._entries.values(), key=lambda e: (e.coined_at, e.char))

    def nearest_ain(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """k nearest entries by cosine in AIN space; ties by codepoint."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._entries:
            return []
        q = np.asarray(query, dtype=np.float64)
        qn = np.linalg.norm(q)
        if qn == 0.0:
            raise LexiconError("zero query vector")
        scored = []
        for char, entry in self._entries.items():
            v = entry.ain_vec.astype(np.float64)
            s = float(np.clip(np.dot(v, q) / (np.linalg.norm(v) * qn), -1.0, 1.0))
            scored.append((char, s))
        scored.sort(key=lambda cs: (-cs[1], ord(cs[0])))
        return scored[:k]

    def content_hash(self) -> str:
        """SHA-256 over a canonical serialization; equal hashes mean equal
        lexicons (used for the per-round consensus check)."""
        h = hashlib.sha256()
        for char in sorted(self._entries):
            e = self._entries[char]
            h.update(char.encode("utf-8"))
            h.update(e.ain_vec.astype("<f4").tobytes())
            h.update(e.glyph.key().encode("ascii"))
            h.update(f"{e.epsilon!r}|{e.coined_at}|{e.coined_by}".encode("utf-8"))
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AinLexicon):
            return NotImplemented
        return self.dim == other.dim and self._entries == other._entries


LEXICON_HEADER = "#AIN-LEX v1"


def save_lexicon(lexicon: AinLexicon, path: str | Path) -> None:
    lines = [f"{LEXICON_HEADER} dim={lexicon.dim} count={len(lexicon)}"]
    for e in lexicon.entries_in_coinage_order():
        vec_b64 = base64.b64encode(e.ain_vec.astype("<f4").tobytes()).decode("ascii")
        lines.append(
            "\t".join(
                (e.char, repr(float(e.epsilon)), vec_b64, e.glyph.key(), str(e.coined_at), e.coined_by)
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_lexicon(path: str | Path) -> AinLexicon:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(LEXICON_HEADER):
        raise LexiconError(f"{path}: missing {LEXICON_HEADER} header")
    try:
        fields = dict(kv.split("=") for kv in lines[0][len(LEXICON_HEADER):].split())
        dim, count = int(fields["dim"]), int(fields["count"])
    except (ValueError, KeyError):
        raise LexiconError(f"{path}:1: malformed header {lines[0]!r}") from None
    lex = AinLexicon(dim)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise LexiconError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        char, eps_s, vec_b64, glyph_s, at_s, by = parts
        try:
            vec = np.frombuffer(base64.b64decode(vec_b64, validate=True), dtype="<f4").copy()
            entry = AinEntry(
                char=char,
                ain_vec=vec,
                glyph=GlyphCode.parse(glyph_s),
                epsilon=float(eps_s),
                coined_at=int(at_s),
                coined_by=by,
            )
        except (ValueError, LexiconError) as exc:
            raise LexiconError(f"{path}:{lineno}: {exc}") from None
        if entry.ain_vec.shape != (dim,):
            raise LexiconError(f"{path}:{lineno}: vector length {entry.ain_vec.shape[0]}, dim {dim}")
        if not np.all(np.isfinite(entry.ain_vec)):
            raise LexiconError(f"{path}:{lineno}: non-finite vector component")
        try:
            lex.insert(entry)
        except LexiconError as exc:
            raise LexiconError(f"{path}:{lineno}: {exc}") from None
    if len(lex) != count:
        raise LexiconError(f"{path}: header declares count={count} but {len(lex)} records")
    return lex


def neighborhood_divergence(
    lexicon: AinLexicon, table: EmbeddingTable, k: int = 5
) -> tuple[float | None, int]:
    """Mean overlap between each entry's k nearest lexicon neighbors in
    Chinese space and in AIN space; 1.0 would mean the two spaces agree
    perfectly on local structure.

    Neighborhoods are computed among lexicon members only, so both sides
    rank the same candidate set. Returns (mean overlap or None when fewer
    than 2 entries, effective k).
    """
    chars = sorted(lexicon.known_chars())
    if len(chars) < 2:
        return None, 0
    k_eff = min(k, len(chars) - 1)
    member_set = set(chars)
    non_members = set(table.chars) - member_set
    overlaps = []
    for c in chars:
        zh = table.nearest(table.vector(c), k_eff, exclude=non_members | {c})
        entry = lexicon.lookup(c)
        assert entry is not None
        ain = [
            (ch, s)
            for ch, s in lexicon.nearest_ain(entry.ain_vec, k_eff + 1)
            if ch != c
        ][:k_eff]
        overlaps.append(len({ch for ch, _ in zh} & {ch for ch, _ in ain}) / k_eff)
    return float(np.mean(overlaps)), k_eff
