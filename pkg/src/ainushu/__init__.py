"""Two-agent emergent-logogram simulator.

Two agents sharing a Chinese character embedding space play a cooperative
speaker/listener guessing game, coin a consensus symbol dictionary, and
render every coined symbol as a unique stacked-component pixel glyph.
"""

from .cluster import ClusterNode, ClusterTree, build_tree
from .config import SimulationConfig, load_config
from .corpus import (
    Corpus,
    ExternalProvider,
    Observation,
    ScriptedProvider,
    compose_verse,
    load_corpus,
    pick_matched,
    top_k_similar,
)
from .embeddings import (
    EmbeddingTable,
    cosine,
    generate_synthetic,
    load_table,
    save_table,
)
from .game import (
    MAX_GUESSES,
    AgentState,
    EncodedMessage,
    RoundOutcome,
    SessionReport,
    encode,
    listener_guess,
    run_round,
    run_session,
    select_target,
)
from .glyphs import (
    CODE_SPACE,
    COMPONENT_COUNT,
    ComponentAtlas,
    GlyphCode,
    Projection,
    default_atlas,
    fit_pca,
    project,
    quantize,
    render,
    resolve_collision,
)
from .lexicon import AinEntry, AinLexicon, coin, load_lexicon, neighborhood_divergence, save_lexicon

__version__ = "0.1.0"
