"""Acceptance suite: one test per criterion, each printing a pass line.

Criteria 1-10 cover the simulator; the exporter package carries its own
conformance test (criterion 11) and nothing here depends on it.
"""
import itertools
import time

import numpy as np
import pytest

from ainushu.cli import main, verify_outcomes
from ainushu.cluster import build_tree
from ainushu.config import SimulationConfig
from ainushu.corpus import Observation, top_k_similar
from ainushu.embeddings import EmbeddingTable, cosine, generate_synthetic
from ainushu.game import MAX_GUESSES, EncodedMessage, listener_guess, run_session
from ainushu.glyphs import (
    CODE_SPACE,
    COMPONENT_COUNT,
    GlyphCode,
    default_atlas,
    fit_pca,
    project,
    quantize,
    resolve_collision,
)
from ainushu.lexicon import AinEntry, AinLexicon, CapacityError, coin
from conftest import CANON_ITERATIONS
from test_cluster import assert_same_merges, oracle_merges
from test_glyphs import jacobi_eigh, naive_covariance, resolve_oracle

# Regression pins for criterion 10, established by the first canonical run
# (synthetic 500x32, seed 0, 1000 iterations). The run is fully
# deterministic, so later runs must reproduce them exactly; a different
# BLAS build could legitimately shift them, in which case re-pin on purpose.
PIN_SOLVE_RATE = 1.0
PIN_MEAN_GUESSES = 1.1354466858789625
PIN_DIVERGENCE_OVERLAP = 0.5896253602305476


def test_c01_structural_constants(canonical_run):
    # five-attempt budget, visible end to end
    assert MAX_GUESSES == 5
    outcomes = canonical_run["result"].outcomes
    assert max(len(o.guesses) for o in outcomes) <= 5

    # glyph space capacity: 24^3 entries fit, one more errors out
    assert CODE_SPACE == 13824
    lex = AinLexicon(2)
    vec = np.array([1.0, 0.0], dtype=np.float32)
    for i, (a, b, c) in enumerate(itertools.product(range(24), repeat=3)):
        lex.insert(AinEntry(chr(0x20000 + i), vec, GlyphCode(a, b, c), 0.3, i, "A"))
    assert len(lex) == 13824
    with pytest.raises(CapacityError):
        lex.insert(AinEntry("猫", vec, GlyphCode(0, 0, 0), 0.3, 13824, "A"))

    # component atlas: exactly 24 distinct elements
    atlas = default_atlas()
    assert COMPONENT_COUNT == 24
    assert len({atlas.bitmaps[i].tobytes() for i in range(24)}) == 24
    print("PASS criterion 1: guess budget 5, glyph capacity 13824, atlas of 24")


def test_c02_full_run_determinism(canonical_files, tmp_path):
    cfg_file = tmp_path / "canonical.toml"
    cfg_file.write_text(
        f'''seed = 0
table = "synthetic"
table_n = 500
table_dim = 32
corpus = "{canonical_files / 'corpus.txt'}"
script = "{canonical_files / 'script.txt'}"
max_iterations = 1000
saturation_window = 1000
out_dir = "{tmp_path / 'r1'}"
''',
        encoding="utf-8",
    )
    t0 = time.monotonic()
    assert main(["run", str(cfg_file)]) == 0
    assert main(["run", str(cfg_file), f"--out_dir={tmp_path / 'r2'}"]) == 0
    elapsed = time.monotonic() - t0
    for name in ("transcript.jsonl", "metrics.csv", "lexicon.txt", "glyph_index.txt"):
        b1 = (tmp_path / "r1" / name).read_bytes()
        b2 = (tmp_path / "r2" / name).read_bytes()
        assert b1 == b2, f"{name} differs between identical runs"
    assert elapsed < 60.0
    assert main(["verify", str(tmp_path / "r1")]) == 0
    print(f"PASS criterion 2: byte-identical outputs over two 1000-iteration runs ({elapsed:.1f} s)")


def test_c03_consensus_every_round(canonical_run):
    assert canonical_run["result"].report.rounds == CANON_ITERATIONS
    assert canonical_run["hash_mismatches"] == []
    a, b = canonical_run["result"].agents
    assert a.lexicon.content_hash() == b.lexicon.content_hash()
    print("PASS criterion 3: 0 consensus violations over 1000 rounds")


def test_c04_saturation_with_known_reachable_set(tmp_path):
    table = generate_synthetic(250, 16, 0)
    pool = table.chars[:200]
    sentences = ["".join(pool[i * 5 : (i + 1) * 5]) for i in range(40)]
    f = tmp_path / "pool.txt"
    f.write_text("\n".join(sentences) + "\n", encoding="utf-8")
    # worst-case gap between visits of one sentence is 2 * 40 - 1 rounds
    # (late in one epoch shuffle, early in the next), so a window of 100
    # can only fire once every reachable character is coined
    cfg = SimulationConfig(
        seed=0, table="synthetic", table_n=250, table_dim=16,
        corpus=str(f), script=str(f),
        max_iterations=2000, saturation_window=100,
    )
    res = run_session(cfg)

    # offline oracle: replay the verse-construction rule over every
    # (observation, retrieved-match) pair the run can produce
    reachable: set[str] = set()
    for s in res.corpus.sentences:
        top = top_k_similar(res.corpus, Observation(s, "scripted"), res.table, k=3)
        for idx, _ in top:
            reachable |= set((s + res.corpus.sentences[idx])[: cfg.max_verse_len])
    assert len(reachable) == 200

    assert res.lexicon.known_chars() == reachable
    assert res.report.lexicon_size == 200 == res.report.coinages
    assert res.report.saturated
    pt = res.report.phase_transition_iteration
    assert pt is not None
    assert all(o.was_known for o in res.outcomes[pt:])
    print(f"PASS criterion 4: lexicon == 200-char reachable set, saturated at {pt}")


def test_c05_clustering_matches_naive_oracle():
    rng = np.random.default_rng(2024)
    sizes = list(rng.integers(5, 41, size=27)) + [60, 80, 100]
    assert len(sizes) == 30 and max(sizes) <= 100
    for i, n in enumerate(sizes):
        table = generate_synthetic(int(n), int(rng.integers(3, 10)), int(rng.integers(0, 10_000)))
        for linkage in ("average", "complete", "single"):
            got = build_tree(table, linkage)
            want = oracle_merges(table, linkage)
            assert_same_merges(got, want, tol=1e-9)
    print("PASS criterion 5: 30 tables x 3 linkages, exact merge order, heights within 1e-9")


def test_c06_pca_matches_bruteforce_eigendecomposition():
    for seed in range(20):
        table = generate_synthetic(50, 8, seed + 100)
        p = fit_pca(table)
        cov = naive_covariance(table.vectors.astype(np.float64))
        evals, evecs = jacobi_eigh(cov)
        assert np.allclose(p.variances, evals[:3], rtol=1e-6)
        for i in range(3):
            want = evecs[:, i]
            nz = np.flatnonzero(np.abs(want) > 1e-12)
            if nz.size and want[nz[0]] < 0:
                want = -want
            assert np.allclose(p.axes[i], want, atol=1e-6)
    print("PASS criterion 6: 20 tables, eigenpairs within 1e-6 of the naive oracle")


def test_c07_glyph_injectivity_under_forced_collisions():
    rng = np.random.default_rng(0)
    base = rng.standard_normal(8)
    base /= np.linalg.norm(base)
    vecs = base + 0.01 * rng.standard_normal((2000, 8))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    table = EmbeddingTable([chr(0x4E00 + i) for i in range(2000)], vecs.astype(np.float32))
    proj = fit_pca(table)

    coin_rng = np.random.default_rng(1)
    spot = set(int(i) for i in rng.choice(2000, size=500, replace=False))
    occupied: set[GlyphCode] = set()
    raw_collisions = 0
    for i, char in enumerate(table.chars):
        vec = coin(char, table, 0.3, coin_rng)
        raw = quantize(proj, project(proj, vec))
        if raw in occupied:
            raw_collisions += 1
        resolved = resolve_collision(raw, occupied)
        if i in spot:
            assert resolved == resolve_oracle(raw, occupied)
        assert resolved not in occupied
        occupied.add(resolved)
    assert len(occupied) == 2000
    assert raw_collisions > 0
    print(f"PASS criterion 7: 2000 distinct codes, {raw_collisions} raw collisions resolved; "
          f"500 spot checks equal the full-scan oracle")


def test_c08_listener_protocol_soundness():
    table = generate_synthetic(5, 6, 21)
    tree = build_tree(table)
    levels = 4
    for hint, target in itertools.permutations(table.chars, 2):
        message = EncodedMessage(tokens=(), target_pos=0,
                                 new_symbol=(GlyphCode(0, 0, 0), hint))
        history = []
        solved = False
        for _ in range(MAX_GUESSES):
            g = listener_guess(tree, message, history, set(), levels)
            consistent = set(table.chars)
            for pg, pf in history:
                consistent &= tree.candidates_at_level(pg, pf, levels)
            assert g in consistent, "guess left the feedback-consistent set"
            f = tree.feedback_level(g, target, levels)
            history.append((g, f))
            if f == 0:
                solved = True
                break
        assert solved or len(history) == MAX_GUESSES
        assert solved, f"target {target!r} not found within {MAX_GUESSES} (hint {hint!r})"
    print("PASS criterion 8: all 20 (hint, target) pairs solved within 5 consistent guesses")


def test_c09_coinage_geometry():
    table = generate_synthetic(1000, 16, 3)
    rng = np.random.default_rng(5)
    for char in table.chars:
        vec = coin(char, table, 0.3, rng)
        assert cosine(vec, table.vector(char)) >= 1.0 - 0.09
        assert not np.array_equal(vec, table.vector(char))
    print("PASS criterion 9: 1000 coined vectors satisfy the 1 - eps^2 bound and differ")


def test_c10_regression_pinned_statistics(canonical_run):
    report = canonical_run["result"].report
    assert report.solve_rate == PIN_SOLVE_RATE
    assert report.mean_guesses_per_coinage == PIN_MEAN_GUESSES
    assert report.divergence_overlap is not None
    assert report.divergence_overlap < 1.0  # AIN neighborhoods differ from Chinese ones
    assert report.divergence_overlap == PIN_DIVERGENCE_OVERLAP
    print(f"PASS criterion 10: solve rate {report.solve_rate}, "
          f"mean guesses {report.mean_guesses_per_coinage}, "
          f"divergence overlap {report.divergence_overlap} < 1.0")


def test_transcript_verifier_accepts_canonical_run(canonical_run):
    # every engine-produced transcript must pass the standalone verifier
    result = canonical_run["result"]
    errors = verify_outcomes(result.outcomes, result.tree, 4)
    assert errors == []
