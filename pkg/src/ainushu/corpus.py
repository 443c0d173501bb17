"""Verse sourcing: sentence corpus, retrieval, observation providers.

Keeps the corpus of source sentences with precomputed centroid vectors,
retrieves the sentences most similar to an observation, and composes the
round's working verse. Camera/captioning/translation stages are replaced by
providers: a deterministic scripted provider for offline runs, and an HTTP
provider for live integration (exercised only via test doubles here).
"""
from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable

DEFAULT_MAX_VERSE_LEN = 14
DEFAULT_TIMEOUT = 10.0


class CorpusError(ValueError):
    pass


class ProviderError(RuntimeError):
    """External observation/composition endpoint failed."""


@dataclass(frozen=True)
class Observation:
    text: str  # in-vocabulary characters only, nonempty
    source: str  # "scripted" | "external"


def filter_sentence(sentence: str, table: EmbeddingTable) -> tuple[str, int]:
    """Drop out-of-vocabulary characters; returns (kept, dropped count)."""
    kept = [c for c in sentence if c in table]
    return "".join(kept), len(sentence) - len(kept)


def read_sentence_file(path: str | Path) -> list[str]:
    """One sentence per line, UTF-8, '#' comments and blank lines ignored."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


class Corpus:
    """Immutable OOV-filtered sentence list with precomputed sentence vectors.

    A sentence vector is the unweighted centroid of its characters'
    embeddings. Character frequency ranks (most frequent rank 0, ties by
    ascending codepoint, zero-count table characters last) drive target
    selection in the game.
    """

    def __init__(self, sentences: list[str], table: EmbeddingTable, dropped_chars: int = 0):
        if not sentences:
            raise CorpusError("corpus is empty after filtering")
        for s in sentences:
            if not s or any(c not in table for c in s):
                raise CorpusError(f"sentence {s!r} is not fully in-vocabulary")
        self.sentences = list(sentences)
        self.dropped_chars = dropped_chars
        self.vectors = np.stack([table.centroid(list(s)) for s in sentences])
        counts: dict[str, int] = {c: 0 for c in table.chars}
        for s in sentences:
            for c in s:
                counts[c] += 1
        by_freq = sorted(table.chars, key=lambda c: (-counts[c], ord(c)))
        self.frequency_rank = {c: i for i, c in enumerate(by_freq)}

    def __len__(self) -> int:
        return len(self.sentences)


def load_corpus(path: str | Path, table: EmbeddingTable) -> Corpus:
    raw = read_sentence_file(path)
    kept: list[str] = []
    dropped = 0
    for s in raw:
        f, d = filter_sentence(s, table)
        dropped += d
        if f:
            kept.append(f)
    if not kept:
        raise CorpusError(f"{path}: no in-vocabulary sentences")
    return Corpus(kept, table, dropped_chars=dropped)


def top_k_similar(
    corpus: Corpus, query: Observation, table: EmbeddingTable, k: int = 3
) -> list[tuple[int, float]]:
    """Indices of the k sentences most similar to the observation.

    Similarity is cosine between centroid vectors; descending score, ties
    by ascending sentence index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = table.centroid(list(query.text))
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise CorpusError("zero query centroid")
    norms = np.linalg.norm(corpus.vectors, axis=1)
    scores = (corpus.vectors @ q) / (norms * qn)
    np.clip(scores, -1.0, 1.0, out=scores)
    order = sorted(range(len(corpus)), key=lambda i: (-scores[i], i))
    return [(i, float(scores[i])) for i in order[:k]]


def pick_matched(top: list[tuple[int, float]], rng: np.random.Generator) -> int:
    """Uniform pick among the retrieved sentences (keeps expression varied)."""
    if not top:
        raise ValueError("empty retrieval result")
    return top[int(rng.integers(len(top)))][0]


class ScriptedProvider:
    """Cycles a sentence list with a fresh seeded shuffle each epoch.

    The emitted sequence is a pure function of (sentences, seed): every
    sentence appears exactly once per epoch.
    """

    def __init__(self, sentences: list[str], seed):
        if not sentences:
            raise CorpusError("scripted provider needs at least one sentence")
        self._sentences = list(sentences)
        self._rng = np.random.default_rng(seed)
        self._order: list[int] = []
        self._pos = 0

    @classmethod
    def from_file(cls, path: str | Path, table: EmbeddingTable, seed) -> "ScriptedProvider":
        kept = []
        for s in read_sentence_file(path):
            f, _ = filter_sentence(s, table)
            if f:
                kept.append(f)
        if not kept:
            raise CorpusError(f"{path}: no in-vocabulary sentences")
        return cls(kept, seed)

    def observe(self) -> Observation:
        if self._pos >= len(self._order):
            self._order = list(self._rng.permutation(len(self._sentences)))
            self._pos = 0
        s = self._sentences[self._order[self._pos]]
        self._pos += 1
        return Observation(text=s, source="scripted")


class ExternalProvider:
    """HTTP provider: POSTs {"role": ..., "payload": ...} and reads a sentence back.

    Replies are OOV-filtered against the table. On timeout, protocol error,
    or an empty filtered reply, falls back to the scripted provider when one
    is configured, else raises ProviderError.
    """

    def __init__(
        self,
        url: str,
        table: EmbeddingTable,
        timeout: float = DEFAULT_TIMEOUT,
        fallback: ScriptedProvider | None = None,
    ):
        self.url = url
        self.table = table
        self.timeout = timeout
        self.fallback = fallback

    def _post(self, role: str, payload: str) -> str:
        body = json.dumps({"role": role, "payload": payload}, ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8").strip()
        except (urllib.error.URLError, OSError, UnicodeDecodeError) as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc

    def observe(self) -> Observation:
        try:
            reply = self._post("observe", "")
            text, _ = filter_sentence(reply, self.table)
            if not text:
                raise ProviderError("provider reply entirely out of vocabulary")
            return Observation(text=text, source="external")
        except ProviderError:
            if self.fallback is not None:
                return self.fallback.observe()
            raise

    def compose(self, observation: str, matched: str) -> str | None:
        """Delegated verse composition; None signals the template fallback."""
        try:
            reply = self._post("compose", observation + "\n" + matched)
            text, _ = filter_sentence(reply, self.table)
            return text or None
        except ProviderError:
            return None


def compose_verse(
    observation: Observation,
    matched: str,
    max_len: int = DEFAULT_MAX_VERSE_LEN,
    external: ExternalProvider | None = None,
) -> str:
    """The round's working verse.

    Template mode concatenates observation and matched sentence, truncated
    to max_len characters. External mode delegates and falls back to the
    template when the endpoint fails or replies out-of-vocabulary.
    """
    if not observation.text or not matched:
        raise ValueError("observation and matched sentence must be nonempty")
    if external is not None:
        reply = external.compose(observation.text, matched)
        if reply:
            return reply[:max_len]
    return (observation.text + matched)[:max_len]


def make_demo_sentences(
    table: EmbeddingTable,
    count: int,
    rng: np.random.Generator,
    min_len: int = 3,
    max_len: int = 8,
    chars: list[str] | None = None,
) -> list[str]:
    """Random in-vocabulary sentences, for synthetic corpora and scripts."""
    pool = chars if chars is not None else list(table.chars)
    out = []
    for _ in range(count):
        length = int(rng.integers(min_len, max_len + 1))
        idx = rng.integers(0, len(pool), size=length)
        out.append("".join(pool[int(i)] for i in idx))
    return out
