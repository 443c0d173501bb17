"""Command-line front end: run sessions, export glyphs, inspect, verify.

Subcommands: run, glyph, inspect, verify, gen-table. A run writes four
deterministic artifacts (transcript.jsonl, metrics.csv, lexicon.txt,
glyph_index.txt) plus a resolved-config snapshot that lets `verify` replay
the invariant checks over an archived transcript.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import config as cfgmod
from .cluster import ClusterError, ClusterTree, build_tree
from .config import ConfigError, SimulationConfig
from .corpus import CorpusError, ProviderError
from .embeddings import (
    SimilarityError,
    TableError,
    UnknownCharError,
    generate_synthetic,
    load_table,
    save_table,
)
from .game import (
    MAX_GUESSES,
    AinToken,
    GameError,
    PlainToken,
    RoundOutcome,
    outcome_from_json,
    outcome_to_json,
    run_session,
    trailing_first_guess_accuracy,
)
from .glyphs import (
    GlyphError,
    contact_sheet,
    default_atlas,
    export_glyph,
    grid_to_text,
    load_atlas,
    render,
)
from .lexicon import LexiconError, load_lexicon, save_lexicon

_ERRORS = (
    ConfigError, TableError, ClusterError, CorpusError, LexiconError,
    GlyphError, GameError, ProviderError, SimilarityError, UnknownCharError,
    OSError, ValueError,
)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ain",
        description="Two-agent emergent-logogram simulator: coins a shared "
        "symbol dictionary over a Chinese character embedding space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a session from a config file")
    p.add_argument("config", help="TOML config file")
    for f in fields(SimulationConfig):
        p.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", default=None,
                       metavar="V", help=f"override config field {f.name}")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("glyph", help="render glyphs from a lexicon file")
    p.add_argument("lexicon", help="lexicon file")
    p.add_argument("char", nargs="?", help="single character to render")
    p.add_argument("--all", action="store_true", help="contact sheet + index of every glyph")
    p.add_argument("--format", choices=("text", "pgm", "svg"), default="text")
    p.add_argument("--out", default=None, help="output file (single) or directory (--all)")
    p.add_argument("--atlas", default=None, help="component atlas file (default: bundled)")
    p.set_defaults(func=cmd_glyph)

    p = sub.add_parser("inspect", help="compare a character's Chinese and AIN neighborhoods")
    p.add_argument("lexicon", help="lexicon file")
    p.add_argument("char", help="character to inspect")
    p.add_argument("--table", required=True, help="embedding table file")
    p.add_argument("-k", type=int, default=5, help="neighbors per side (default 5)")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("verify", help="replay invariant checks over an archived run")
    p.add_argument("run_dir", help="directory written by `ain run`")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-table", help="write a synthetic embedding table")
    p.add_argument("out", help="output path")
    p.add_argument("--n", type=int, default=3768)
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("tsv", "binary"), default="binary")
    p.set_defaults(func=cmd_gen_table)
    return parser


# -- run -----------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = cfgmod.load_config(args.config)
    overrides = {
        f.name: getattr(args, f"cfg_{f.name}")
        for f in fields(SimulationConfig)
        if getattr(args, f"cfg_{f.name}") is not None
    }
    cfgmod.apply_overrides(cfg, overrides)
    cfgmod.resolve_provider_url(cfg)
    cfgmod.validate(cfg)

    result = run_session(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    transcript = out_dir / "transcript.jsonl"
    transcript.write_text(
        "".join(outcome_to_json(o) + "\n" for o in result.outcomes), encoding="utf-8"
    )
    _write_metrics(out_dir / "metrics.csv", result.outcomes, cfg.metrics_window)
    save_lexicon(result.lexicon, out_dir / "lexicon.txt")
    _write_glyph_index(out_dir / "glyph_index.txt", result.lexicon)
    (out_dir / "run_config.json").write_text(
        json.dumps(cfg.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )

    r = result.report
    print(f"rounds: {r.rounds}")
    print(f"coinages: {r.coinages}")
    print(f"lexicon size: {r.lexicon_size}")
    print(f"solve rate (within {MAX_GUESSES}): {r.solve_rate:.6f}")
    print(f"mean guesses per coinage: {r.mean_guesses_per_coinage:.6f}")
    if r.saturated:
        print(f"saturated: yes (phase transition at iteration {r.phase_transition_iteration})")
    else:
        print("saturated: no")
    if r.divergence_overlap is None:
        print("neighborhood divergence: n/a (lexicon too small)")
    else:
        print(f"neighborhood overlap (k={r.divergence_k}): {r.divergence_overlap:.6f}")
    print(f"duration: {r.duration_seconds:.2f} s")
    print(f"outputs: {out_dir}")
    return 0


def _write_metrics(path: Path, outcomes: list[RoundOutcome], window: int) -> None:
    acc = trailing_first_guess_accuracy(outcomes, window)
    lines = ["iteration,lexicon_size,was_known,solved_in,window_accuracy"]
    for o, a in zip(outcomes, acc):
        solved = "" if o.solved_in is None else str(o.solved_in)
        accs = "" if a is None else f"{a:.6f}"
        lines.append(f"{o.iteration},{o.lexicon_size},{int(o.was_known)},{solved},{accs}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_glyph_index(path: Path, lexicon) -> None:
    lines = [f"{e.char} {e.glyph.key()}" for e in lexicon.entries_in_coinage_order()]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# -- glyph ----------------------------------------------------------------------


def cmd_glyph(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    atlas = load_atlas(args.atlas) if args.atlas else default_atlas()
    if args.all:
        out_dir = Path(args.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        entries = lexicon.entries_in_coinage_order()
        if not entries:
            print("error: lexicon is empty", file=sys.stderr)
            return 1
        (out_dir / "contact_sheet.pgm").write_bytes(
            contact_sheet([e.glyph for e in entries], atlas)
        )
        _write_glyph_index(out_dir / "glyph_index.txt", lexicon)
        print(f"wrote {out_dir / 'contact_sheet.pgm'} and {out_dir / 'glyph_index.txt'} "
              f"({len(entries)} glyphs)")
        return 0
    if not args.char:
        print("error: give a character or --all", file=sys.stderr)
        return 1
    entry = lexicon.lookup(args.char)
    if entry is None:
        print(f"error: character {args.char!r} not in lexicon", file=sys.stderr)
        return 1
    if args.out is None and args.format == "text":
        sys.stdout.write(grid_to_text(render(entry.glyph, atlas)))
        return 0
    ext = {"text": "txt", "pgm": "pgm", "svg": "svg"}[args.format]
    out = Path(args.out) if args.out else Path(f"glyph_{ord(args.char):04x}.{ext}")
    export_glyph(entry.glyph, atlas, args.format, out)
    print(f"wrote {out}")
    return 0


# -- inspect --------------------------------------------------------------------


def cmd_inspect(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    table = load_table(args.table)
    entry = lexicon.lookup(args.char)
    if entry is None:
        print(f"error: character {args.char!r} not in lexicon", file=sys.stderr)
        return 1
    if args.k < 0:
        print("error: k must be >= 0", file=sys.stderr)
        return 1
    print(f"{args.char}  glyph {entry.glyph.key()}  coined at {entry.coined_at} by {entry.coined_by}")
    print(f"{'chinese space':<24}  {'ain space':<24}")
    if args.k == 0:
        return 0
    zh = table.nearest(table.vector(args.char), args.k, exclude={args.char})
    ain = [cs for cs in lexicon.nearest_ain(entry.ain_vec, args.k + 1) if cs[0] != args.char]
    ain = ain[: args.k]
    for i in range(max(len(zh), len(ain))):
        left = f"{zh[i][0]} {zh[i][1]:+.6f}" if i < len(zh) else ""
        right = f"{ain[i][0]} {ain[i][1]:+.6f}" if i < len(ain) else ""
        print(f"{left:<24}  {right:<24}")
    return 0


# -- verify ---------------------------------------------------------------------


def cmd_verify(args) -> int:
    run_dir = Path(args.run_dir)
    cfg_path = run_dir / "run_config.json"
    transcript = run_dir / "transcript.jsonl"
    if not cfg_path.is_file() or not transcript.is_file():
        print(f"error: {run_dir} lacks run_config.json / transcript.jsonl", file=sys.stderr)
        return 1
    cfg = cfgmod.config_from_dict(json.loads(cfg_path.read_text(encoding="utf-8")),
                                  origin=str(cfg_path))
    outcomes = [
        outcome_from_json(line)
        for line in transcript.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if cfg.table == "synthetic":
        table = generate_synthetic(cfg.table_n, cfg.table_dim, cfg.seed)
    else:
        table = load_table(cfg.table)
    tree = build_tree(table, cfg.linkage)
    errors = verify_outcomes(outcomes, tree, cfg.feedback_levels)
    if errors:
        for e in errors[:20]:
            print(f"violation: {e}", file=sys.stderr)
        print(f"FAIL: {len(errors)} violation(s) over {len(outcomes)} rounds", file=sys.stderr)
        return 1
    print(f"OK: {len(outcomes)} rounds verified")
    return 0


def verify_outcomes(
    outcomes: list[RoundOutcome], tree: ClusterTree | None, levels: int
) -> list[str]:
    """Replay every language-game invariant a transcript can witness.

    Structural checks need the transcript alone; feedback correctness and
    listener consistency additionally need the rebuilt cluster tree.
    """
    errors: list[str] = []
    glyph_owner: dict[str, str] = {}
    known: set[str] = set()
    size = 0
    for i, o in enumerate(outcomes):
        where = f"iteration {i}"

        def err(msg: str) -> None:
            errors.append(f"{where}: {msg}")

        if o.iteration != i:
            err(f"iteration field {o.iteration} out of sequence")
        if o.speaker != ("A" if i % 2 == 0 else "B"):
            err(f"speaker {o.speaker} breaks strict alternation")
        if len(o.guesses) > MAX_GUESSES:
            err(f"{len(o.guesses)} guesses exceed the budget of {MAX_GUESSES}")
        if len(o.message.tokens) != len(o.verse):
            err("token count differs from verse length")
        if not 0 <= o.message.target_pos < len(o.verse):
            err(f"target_pos {o.message.target_pos} out of range")
        elif o.verse[o.message.target_pos] != o.target:
            err("verse character at target_pos is not the target")

        if o.was_known:
            if o.guesses or o.solved_in is not None or o.revealed:
                err("known-target round must have no guesses, no solve, no reveal")
            if o.message.new_symbol is not None:
                err("known-target round carries a new symbol")
            if o.target not in known:
                err("was_known round but target never coined")
            if o.lexicon_size != size:
                err(f"lexicon_size {o.lexicon_size} != expected {size}")
        else:
            if o.message.new_symbol is None:
                err("coinage round lacks a new symbol")
            if o.target in known:
                err("target coined twice")
            feedbacks = [f for _, f in o.guesses]
            if o.solved_in is not None:
                if o.solved_in != len(o.guesses) or not o.guesses or feedbacks[-1] != 0 \
                        or any(f == 0 for f in feedbacks[:-1]):
                    err("solved_in inconsistent with feedback sequence")
                if o.revealed:
                    err("solved round marked revealed")
            else:
                if len(o.guesses) != MAX_GUESSES or any(f == 0 for f in feedbacks):
                    err("unsolved round must show five nonzero feedbacks")
                if not o.revealed:
                    err("unsolved round not marked revealed")
            if o.lexicon_size != size + 1:
                err(f"lexicon_size {o.lexicon_size} != expected {size + 1}")

        new_glyph_key = None
        if o.message.new_symbol is not None:
            gcode, hint = o.message.new_symbol
            new_glyph_key = gcode.key()
            if hint == o.target:
                err("hint equals the target (secret leaked)")
            if new_glyph_key in glyph_owner:
                err(f"glyph {new_glyph_key} reused")
            tok = o.message.tokens[o.message.target_pos] if o.message.tokens else None
            if not (isinstance(tok, AinToken) and tok.glyph.key() == new_glyph_key):
                err("new glyph does not appear at target_pos")

        for pos, tok in enumerate(o.message.tokens):
            ch = o.verse[pos] if pos < len(o.verse) else None
            if isinstance(tok, PlainToken):
                if tok.char != ch:
                    err(f"plain token {tok.char!r} disagrees with verse at {pos}")
                if ch in known:
                    err(f"known character {ch!r} regressed to plaintext")
                if not o.was_known and ch == o.target:
                    err("unknown target appears in plaintext")
            else:
                k = tok.glyph.key()
                if k == new_glyph_key:
                    if ch != o.target:
                        err(f"new glyph used for non-target {ch!r}")
                elif glyph_owner.get(k) != ch:
                    err(f"glyph {k} does not decode to {ch!r}")

        if tree is not None and not o.was_known:
            try:
                for j, (g, f) in enumerate(o.guesses):
                    if tree.feedback_level(g, o.target, levels) != f:
                        err(f"feedback for guess {g!r} is not {f}")
                    for pg, pf in o.guesses[:j]:
                        if g not in tree.candidates_at_level(pg, pf, levels):
                            err(f"guess {g!r} inconsistent with earlier feedback ({pg!r}, {pf})")
            except ClusterError as exc:
                err(str(exc))

        if not o.was_known:
            known.add(o.target)
            if new_glyph_key is not None:
                glyph_owner[new_glyph_key] = o.target
            size += 1
    return errors


# -- gen-table ------------------------------------------------------------------


def cmd_gen_table(args) -> int:
    table = generate_synthetic(args.n, args.dim, args.seed)
    save_table(table, args.out, format=args.format)
    print(f"wrote {args.out}: {args.n} x {args.dim}, seed {args.seed}, {args.format}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
