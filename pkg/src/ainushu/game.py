"""The language-game protocol engine.

One round: the speaker observes, composes a verse, picks a target
character, encodes the verse (coining a new symbol when the target is
unknown), the listener guesses under quantized proximity feedback, and
both agents commit the identical entry: consensus by construction,
verified by content hash after every round. Roles alternate each round.

Determinism contract: each agent draws from its own generator derived from
(session seed, agent index); the scripted observer has a third stream. The
per-round draw order is fixed (retrieval pick, then coinage, then optional
hint tie randomization), so a (config, seed) pair fully determines the run.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .cluster import ClusterTree, build_tree
from .config import SimulationConfig
from .corpus import (
    Corpus,
    ExternalProvider,
    ScriptedProvider,
    compose_verse,
    load_corpus,
    pick_matched,
    top_k_similar,
)
from .embeddings import EmbeddingTable, generate_synthetic, load_table
from .glyphs import GlyphCode, Projection, fit_pca, project, quantize, resolve_collision
from .lexicon import AinEntry, AinLexicon, coin, neighborhood_divergence

MAX_GUESSES = 5  # the listener's fixed attempt budget

TRANSCRIPT_VERSION = 1


class GameError(RuntimeError):
    pass


class ConsensusError(GameError):
    """The two lexicons differ after a round."""


@dataclass(frozen=True)
class AinToken:
    glyph: GlyphCode


@dataclass(frozen=True)
class PlainToken:
    char: str


@dataclass(frozen=True)
class EncodedMessage:
    tokens: tuple  # AinToken | PlainToken per verse character
    target_pos: int
    new_symbol: tuple[GlyphCode, str] | None  # (glyph, hint char) when coining


@dataclass
class AgentState:
    agent_id: str
    lexicon: AinLexicon
    rng: np.random.Generator


@dataclass
class RoundOutcome:
    iteration: int
    speaker: str
    verse: str
    target: str
    was_known: bool
    guesses: list[tuple[str, int]]
    solved_in: int | None
    revealed: bool
    lexicon_size: int
    message: EncodedMessage


def derived_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent deterministic stream `stream` of a session seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def select_target(
    verse: str, lexicon: AinLexicon, frequency_rank: dict[str, int]
) -> tuple[str, bool]:
    """The round's target character.

    The most frequent verse character missing from the lexicon (ties by
    ascending codepoint); when every character is known, the verse's first
    character with was_known=True.
    """
    absent = {c for c in verse if c not in lexicon}
    if absent:
        return min(absent, key=lambda c: (frequency_rank[c], ord(c))), False
    return verse[0], True


def encode(
    verse: str,
    target: str,
    was_known: bool,
    speaker: AgentState,
    tree: ClusterTree,
    table: EmbeddingTable,
    projection: Projection,
    epsilon: float,
    iteration: int,
    hint_rng: np.random.Generator | None = None,
) -> tuple[EncodedMessage, AinEntry | None]:
    """Encode the verse; coin a new symbol when the target is unknown.

    Known characters always ride along as AIN tokens; unknown non-target
    characters stay plaintext; the unknown target appears only as its new
    glyph (its plaintext is the round's secret), accompanied by a related
    plaintext hint character.
    """
    lex = speaker.lexicon
    new_entry: AinEntry | None = None
    new_symbol: tuple[GlyphCode, str] | None = None
    if not was_known:
        vec = coin(target, table, epsilon, speaker.rng)
        raw = quantize(projection, project(projection, vec))
        glyph = resolve_collision(raw, lex.occupied_glyphs())
        hint = tree.hint_for(target, lex.known_chars(), rng=hint_rng)
        new_entry = AinEntry(
            char=target,
            ain_vec=vec,
            glyph=glyph,
            epsilon=epsilon,
            coined_at=iteration,
            coined_by=speaker.agent_id,
        )
        new_symbol = (glyph, hint)
    tokens: list[AinToken | PlainToken] = []
    for ch in verse:
        entry = lex.lookup(ch)
        if entry is not None:
            tokens.append(AinToken(entry.glyph))
        elif new_entry is not None and ch == target:
            tokens.append(AinToken(new_entry.glyph))
        else:
            tokens.append(PlainToken(ch))
    message = EncodedMessage(
        tokens=tuple(tokens),
        target_pos=verse.index(target),
        new_symbol=new_symbol,
    )
    return message, new_entry


def listener_guess(
    tree: ClusterTree,
    message: EncodedMessage,
    history: list[tuple[str, int]],
    known_chars: set[str],
    levels: int,
) -> str:
    """The listener's next guess for the coined symbol's character.

    The guess is the feedback-consistent candidate cophenetically nearest
    to the hint (ties by ascending codepoint). The hint itself and already
    shared characters are never guessed: the hint accompanies a *new*
    symbol, so neither can be the answer. With no history yet the
    consistent set is every character.
    """
    if message.new_symbol is None:
        raise GameError("message carries no new symbol to decode")
    if len(history) >= MAX_GUESSES:
        raise GameError(f"guess budget of {MAX_GUESSES} exhausted")
    hint = message.new_symbol[1]
    chars = tree.characters
    mask = np.ones(len(chars), dtype=bool)
    for g, f in history:
        mask &= tree.feedback_levels_all(g, levels) == f
    for c in (hint, *known_chars, *(g for g, _ in history)):
        idx = tree.leaf_id(c)
        mask[idx] = False
    if not mask.any():
        # Feedback is internally consistent, so this only guards a corrupt
        # history: fall back to anything unguessed.
        mask = np.ones(len(chars), dtype=bool)
        for c in (hint, *(g for g, _ in history)):
            mask[tree.leaf_id(c)] = False
        if not mask.any():
            raise GameError("no characters left to guess")
    cand = np.flatnonzero(mask)
    order = np.lexsort((tree.codepoints[cand], tree.coph_row(hint)[cand]))
    return chars[int(cand[order[0]])]


def run_round(
    speaker: AgentState,
    listener: AgentState,
    observer,
    corpus: Corpus,
    tree: ClusterTree,
    table: EmbeddingTable,
    projection: Projection,
    config: SimulationConfig,
    iteration: int,
    composer: ExternalProvider | None = None,
) -> RoundOutcome:
    obs = observer.observe()
    top = top_k_similar(corpus, obs, table, config.k_retrieval)
    matched = corpus.sentences[pick_matched(top, speaker.rng)]
    verse = compose_verse(obs, matched, config.max_verse_len, external=composer)
    target, was_known = select_target(verse, speaker.lexicon, corpus.frequency_rank)
    hint_rng = speaker.rng if config.randomize_hint_ties else None
    message, new_entry = encode(
        verse, target, was_known, speaker, tree, table, projection,
        config.epsilon, iteration, hint_rng=hint_rng,
    )
    guesses: list[tuple[str, int]] = []
    solved_in: int | None = None
    revealed = False
    if not was_known:
        assert new_entry is not None
        for attempt in range(1, MAX_GUESSES + 1):
            g = listener_guess(tree, message, guesses, listener.lexicon.known_chars(), config.feedback_levels)
            f = tree.feedback_level(g, target, config.feedback_levels)
            guesses.append((g, f))
            if f == 0:
                solved_in = attempt
                break
        revealed = solved_in is None  # speaker reveals after five misses
        # consensus: both agents commit the identical entry either way
        speaker.lexicon.insert(new_entry)
        listener.lexicon.insert(new_entry)
    if speaker.lexicon.content_hash() != listener.lexicon.content_hash():
        raise ConsensusError(f"lexicons diverged at iteration {iteration}")
    return RoundOutcome(
        iteration=iteration,
        speaker=speaker.agent_id,
        verse=verse,
        target=target,
        was_known=was_known,
        guesses=guesses,
        solved_in=solved_in,
        revealed=revealed,
        lexicon_size=len(speaker.lexicon),
        message=message,
    )


@dataclass
class SessionReport:
    rounds: int
    coinages: int
    lexicon_size: int
    solve_rate: float
    mean_guesses_per_coinage: float
    first_guess_accuracy_windows: list[float]
    phase_transition_iteration: int | None
    saturated: bool
    divergence_overlap: float | None
    divergence_k: int
    duration_seconds: float = field(compare=False, default=0.0)

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "coinages": self.coinages,
            "lexicon_size": self.lexicon_size,
            "solve_rate": self.solve_rate,
            "mean_guesses_per_coinage": self.mean_guesses_per_coinage,
            "first_guess_accuracy_windows": self.first_guess_accuracy_windows,
            "phase_transition_iteration": self.phase_transition_iteration,
            "saturated": self.saturated,
            "divergence_overlap": self.divergence_overlap,
            "divergence_k": self.divergence_k,
        }


@dataclass
class SessionResult:
    report: SessionReport
    outcomes: list[RoundOutcome]
    lexicon: AinLexicon
    table: EmbeddingTable
    corpus: Corpus
    tree: ClusterTree
    projection: Projection
    agents: tuple[AgentState, AgentState]


def build_session_inputs(config: SimulationConfig):
    if config.table == "synthetic":
        table = generate_synthetic(config.table_n, config.table_dim, config.seed)
    else:
        table = load_table(config.table)
    corpus = load_corpus(config.corpus, table)
    scripted = ScriptedProvider.from_file(config.script, table, derived_rng(config.seed, 2))
    if config.provider_url:
        observer = ExternalProvider(
            config.provider_url, table, timeout=config.provider_timeout, fallback=scripted
        )
        composer = observer
    else:
        observer, composer = scripted, None
    tree = build_tree(table, config.linkage)
    projection = fit_pca(table)
    return table, corpus, observer, composer, tree, projection


def run_session(config: SimulationConfig, on_round=None) -> SessionResult:
    """Run rounds until max_iterations or saturation (a full window of
    rounds with no coinage), alternating the speaker role each round."""
    start = time.monotonic()
    table, corpus, observer, composer, tree, projection = build_session_inputs(config)
    agent_a = AgentState("A", AinLexicon(table.dim), derived_rng(config.seed, 0))
    agent_b = AgentState("B", AinLexicon(table.dim), derived_rng(config.seed, 1))

    outcomes: list[RoundOutcome] = []
    last_coinage: int | None = None
    dry_rounds = 0
    for i in range(config.max_iterations):
        speaker, listener = (agent_a, agent_b) if i % 2 == 0 else (agent_b, agent_a)
        outcome = run_round(
            speaker, listener, observer, corpus, tree, table, projection, config, i,
            composer=composer,
        )
        outcomes.append(outcome)
        if on_round is not None:
            on_round(outcome, agent_a, agent_b)
        if outcome.was_known:
            dry_rounds += 1
        else:
            last_coinage = i
            dry_rounds = 0
        if dry_rounds >= config.saturation_window:
            break

    coinage_rounds = [o for o in outcomes if not o.was_known]
    coinages = len(coinage_rounds)
    solved = sum(1 for o in coinage_rounds if o.solved_in is not None)
    total_guesses = sum(len(o.guesses) for o in coinage_rounds)
    windows = []
    w = config.metrics_window
    for s in range(0, coinages, w):
        chunk = coinage_rounds[s : s + w]
        windows.append(sum(1 for o in chunk if o.solved_in == 1) / len(chunk))
    saturated = dry_rounds >= config.saturation_window
    overlap, k_eff = neighborhood_divergence(agent_a.lexicon, table, k=5)
    report = SessionReport(
        rounds=len(outcomes),
        coinages=coinages,
        lexicon_size=len(agent_a.lexicon),
        solve_rate=(solved / coinages) if coinages else 0.0,
        mean_guesses_per_coinage=(total_guesses / coinages) if coinages else 0.0,
        first_guess_accuracy_windows=windows,
        phase_transition_iteration=(last_coinage + 1) if (saturated and last_coinage is not None) else None,
        saturated=saturated,
        divergence_overlap=overlap,
        divergence_k=k_eff,
        duration_seconds=time.monotonic() - start,
    )
    return SessionResult(
        report=report,
        outcomes=outcomes,
        lexicon=agent_a.lexicon,
        table=table,
        corpus=corpus,
        tree=tree,
        projection=projection,
        agents=(agent_a, agent_b),
    )


def trailing_first_guess_accuracy(outcomes: list[RoundOutcome], window: int) -> list[float | None]:
    """Per-iteration first-guess accuracy over the trailing `window`
    coinage rounds; None until the first coinage."""
    values: list[float | None] = []
    recent: list[bool] = []
    for o in outcomes:
        if not o.was_known:
            recent.append(o.solved_in == 1)
            if len(recent) > window:
                recent.pop(0)
        values.append(sum(recent) / len(recent) if recent else None)
    return values


# -- transcript serialization -------------------------------------------------


def outcome_to_json(outcome: RoundOutcome) -> str:
    """One transcript line (schema v:1); key order is fixed for byte-stable
    output."""
    tokens = [
        ["ain", t.glyph.key()] if isinstance(t, AinToken) else ["plain", t.char]
        for t in outcome.message.tokens
    ]
    ns = outcome.message.new_symbol
    record = {
        "v": TRANSCRIPT_VERSION,
        "iteration": outcome.iteration,
        "speaker": outcome.speaker,
        "verse": outcome.verse,
        "target": outcome.target,
        "target_pos": outcome.message.target_pos,
        "was_known": outcome.was_known,
        "tokens": tokens,
        "new_symbol": None if ns is None else [ns[0].key(), ns[1]],
        "guesses": [[g, f] for g, f in outcome.guesses],
        "solved_in": outcome.solved_in,
        "revealed": outcome.revealed,
        "lexicon_size": outcome.lexicon_size,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def outcome_from_json(line: str) -> RoundOutcome:
    rec = json.loads(line)
    if rec.get("v") != TRANSCRIPT_VERSION:
        raise GameError(f"unsupported transcript version {rec.get('v')!r}")
    tokens = tuple(
        AinToken(GlyphCode.parse(v)) if kind == "ain" else PlainToken(v)
        for kind, v in rec["tokens"]
    )
    ns = rec["new_symbol"]
    message = EncodedMessage(
        tokens=tokens,
        target_pos=rec["target_pos"],
        new_symbol=None if ns is None else (GlyphCode.parse(ns[0]), ns[1]),
    )
    return RoundOutcome(
        iteration=rec["iteration"],
        speaker=rec["speaker"],
        verse=rec["verse"],
        target=rec["target"],
        was_known=rec["was_known"],
        guesses=[(g, f) for g, f in rec["guesses"]],
        solved_in=rec["solved_in"],
        revealed=rec["revealed"],
        lexicon_size=rec["lexicon_size"],
        message=message,
    )
