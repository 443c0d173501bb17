import numpy as np
import pytest

from ainushu import EmbeddingTable, generate_synthetic, run_session
from ainushu.config import SimulationConfig
from ainushu.corpus import make_demo_sentences

# Canonical acceptance configuration: synthetic 500x32 table, seed 0,
# 1000 iterations, saturation disabled so the full iteration budget runs.
CANON_N = 500
CANON_DIM = 32
CANON_SEED = 0
CANON_ITERATIONS = 1000


def two_pairs_table() -> EmbeddingTable:
    """Four characters forming two tight pairs: {A,B} near e0, {C,D} near e1."""
    chars = [chr(0x4E00 + i) for i in range(4)]
    vecs = np.array(
        [
            [1.0, 0.02, 0.0],
            [1.0, -0.02, 0.0],
            [0.02, 1.0, 0.0],
            [-0.02, 1.0, 0.0],
        ],
        dtype=np.float32,
    )
    return EmbeddingTable(chars, vecs)


@pytest.fixture(scope="session")
def canonical_files(tmp_path_factory):
    """Corpus, script, and config files for the canonical run."""
    d = tmp_path_factory.mktemp("canonical")
    table = generate_synthetic(CANON_N, CANON_DIM, CANON_SEED)
    corpus = make_demo_sentences(table, 80, np.random.default_rng(1001))
    script = make_demo_sentences(table, 40, np.random.default_rng(2002))
    (d / "corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")
    (d / "script.txt").write_text("\n".join(script) + "\n", encoding="utf-8")
    return d


def canonical_config(files_dir, out_dir) -> SimulationConfig:
    return SimulationConfig(
        seed=CANON_SEED,
        table="synthetic",
        table_n=CANON_N,
        table_dim=CANON_DIM,
        corpus=str(files_dir / "corpus.txt"),
        script=str(files_dir / "script.txt"),
        max_iterations=CANON_ITERATIONS,
        saturation_window=CANON_ITERATIONS,
        out_dir=str(out_dir),
    )


@pytest.fixture(scope="session")
def canonical_run(canonical_files, tmp_path_factory):
    """One canonical session, with per-round consensus hashes recorded."""
    out = tmp_path_factory.mktemp("canonical_out")
    cfg = canonical_config(canonical_files, out)
    hash_mismatches = []

    def on_round(outcome, agent_a, agent_b):
        ha = agent_a.lexicon.content_hash()
        hb = agent_b.lexicon.content_hash()
        if ha != hb:
            hash_mismatches.append(outcome.iteration)

    result = run_session(cfg, on_round=on_round)
    return {"config": cfg, "result": result, "hash_mismatches": hash_mismatches}
