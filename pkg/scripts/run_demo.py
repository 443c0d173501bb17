#!/usr/bin/env python3
"""End-to-end demo: build a synthetic world, run a session, export glyphs.

Writes everything under ./demo_out and drives the actual CLI, so the output
matches what `ain run` / `ain glyph` / `ain inspect` produce.
"""
import sys
from pathlib import Path

import numpy as np

from ainushu.cli import main as ain
from ainushu.corpus import make_demo_sentences
from ainushu.embeddings import generate_synthetic, save_table
from ainushu.lexicon import load_lexicon

OUT = Path("demo_out")
N, DIM, SEED = 400, 32, 0


def build_world() -> Path:
    OUT.mkdir(exist_ok=True)
    table = generate_synthetic(N, DIM, SEED)
    save_table(table, OUT / "table.bin", format="binary")
    rng_corpus = np.random.default_rng(1001)
    rng_script = np.random.default_rng(2002)
    (OUT / "corpus.txt").write_text(
        "\n".join(make_demo_sentences(table, 60, rng_corpus)) + "\n", encoding="utf-8"
    )
    (OUT / "script.txt").write_text(
        "\n".join(make_demo_sentences(table, 30, rng_script)) + "\n", encoding="utf-8"
    )
    cfg = OUT / "demo.toml"
    cfg.write_text(
        f'''seed = {SEED}
table = "{OUT / 'table.bin'}"
corpus = "{OUT / 'corpus.txt'}"
script = "{OUT / 'script.txt'}"
max_iterations = 600
saturation_window = 100
out_dir = "{OUT / 'run'}"
''',
        encoding="utf-8",
    )
    return cfg


def main() -> int:
    cfg = build_world()
    print(f"== ain run {cfg}")
    if ain(["run", str(cfg)]) != 0:
        return 1
    lexicon_file = OUT / "run" / "lexicon.txt"
    print("\n== glyph contact sheet")
    if ain(["glyph", str(lexicon_file), "--all", "--out", str(OUT / "glyphs")]) != 0:
        return 1
    lex = load_lexicon(lexicon_file)
    char = sorted(lex.known_chars())[0]
    print(f"\n== glyph for {char}")
    ain(["glyph", str(lexicon_file), char])
    print(f"\n== inspect {char}")
    ain(["inspect", str(lexicon_file), char, "--table", str(OUT / "table.bin"), "-k", "3"])
    print("\n== verify")
    return ain(["verify", str(OUT / "run")])


if __name__ == "__main__":
    sys.exit(main())
