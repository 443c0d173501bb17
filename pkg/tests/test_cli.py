import json

import numpy as np
import pytest

from ainushu.cli import main, verify_outcomes
from ainushu.corpus import make_demo_sentences
from ainushu.embeddings import generate_synthetic, load_table
from ainushu.game import outcome_from_json
from ainushu.lexicon import load_lexicon


@pytest.fixture(scope="module")
def run_env(tmp_path_factory):
    """Config + data files for a small CLI run."""
    d = tmp_path_factory.mktemp("cli")
    table = generate_synthetic(40, 8, 2)
    corpus = make_demo_sentences(table, 12, np.random.default_rng(31))
    script = make_demo_sentences(table, 8, np.random.default_rng(32))
    (d / "corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")
    (d / "script.txt").write_text("\n".join(script) + "\n", encoding="utf-8")
    (d / "cfg.toml").write_text(
        f'''seed = 5
table = "synthetic"
table_n = 40
table_dim = 8
corpus = "{d / 'corpus.txt'}"
script = "{d / 'script.txt'}"
max_iterations = 80
saturation_window = 40
out_dir = "{d / 'out'}"
''',
        encoding="utf-8",
    )
    return d


@pytest.fixture(scope="module")
def completed_run(run_env):
    assert main(["run", str(run_env / "cfg.toml")]) == 0
    return run_env / "out"


class TestRun:
    def test_missing_corpus_fails_without_outputs(self, run_env, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            (run_env / "cfg.toml").read_text(encoding="utf-8").replace(
                "corpus.txt", "nowhere.txt"
            ).replace(str(run_env / "out"), str(tmp_path / "never")),
            encoding="utf-8",
        )
        assert main(["run", str(bad)]) == 1
        assert "corpus" in capsys.readouterr().err
        assert not (tmp_path / "never").exists()

    def test_outputs_present_and_consistent(self, completed_run):
        for name in ("transcript.jsonl", "metrics.csv", "lexicon.txt", "glyph_index.txt"):
            assert (completed_run / name).is_file()
        transcript = (completed_run / "transcript.jsonl").read_text(encoding="utf-8")
        metrics = (completed_run / "metrics.csv").read_text(encoding="utf-8").splitlines()
        rounds = len(transcript.splitlines())
        assert len(metrics) == rounds + 1  # header
        lex = load_lexicon(completed_run / "lexicon.txt")
        index_lines = (completed_run / "glyph_index.txt").read_text(encoding="utf-8").splitlines()
        assert len(index_lines) == len(lex)

    def test_metrics_lexicon_size_non_decreasing(self, completed_run):
        rows = (completed_run / "metrics.csv").read_text(encoding="utf-8").splitlines()[1:]
        sizes = [int(r.split(",")[1]) for r in rows]
        assert sizes == sorted(sizes)

    def test_run_is_byte_deterministic(self, run_env, tmp_path):
        out2 = tmp_path / "out2"
        assert main(["run", str(run_env / "cfg.toml"), f"--out_dir={out2}"]) == 0
        for name in ("transcript.jsonl", "metrics.csv", "lexicon.txt", "glyph_index.txt"):
            assert (out2 / name).read_bytes() == (run_env / "out" / name).read_bytes()

    def test_override_flag_changes_run(self, run_env, tmp_path):
        out3 = tmp_path / "out3"
        assert main(["run", str(run_env / "cfg.toml"), f"--out_dir={out3}", "--seed=6"]) == 0
        assert (out3 / "transcript.jsonl").read_bytes() != \
            (run_env / "out" / "transcript.jsonl").read_bytes()

    def test_unknown_override_rejected(self, run_env, capsys):
        # argparse exits with its own code for unknown flags
        with pytest.raises(SystemExit):
            main(["run", str(run_env / "cfg.toml"), "--not_a_field=1"])

    def test_invalid_epsilon_rejected(self, run_env, capsys):
        assert main(["run", str(run_env / "cfg.toml"), "--epsilon=1.5"]) == 1
        assert "epsilon" in capsys.readouterr().err


class TestGlyph:
    def test_absent_char_names_it(self, completed_run, capsys):
        assert main(["glyph", str(completed_run / "lexicon.txt"), "猫"]) == 1
        assert "猫" in capsys.readouterr().err

    def test_single_char_text_grid(self, completed_run, capsys):
        lex = load_lexicon(completed_run / "lexicon.txt")
        char = sorted(lex.known_chars())[0]
        assert main(["glyph", str(completed_run / "lexicon.txt"), char]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 24
        assert all(len(l) == 8 for l in lines)

    def test_all_writes_sheet_and_index(self, completed_run, tmp_path):
        out = tmp_path / "glyphs"
        assert main(["glyph", str(completed_run / "lexicon.txt"), "--all", "--out", str(out)]) == 0
        lex = load_lexicon(completed_run / "lexicon.txt")
        index = (out / "glyph_index.txt").read_text(encoding="utf-8").splitlines()
        assert len(index) == len(lex)
        for line in index:
            char, code = line.split(" ")
            assert lex.lookup(char).glyph.key() == code
        assert (out / "contact_sheet.pgm").read_bytes().startswith(b"P5\n")

    def test_svg_export(self, completed_run, tmp_path):
        lex = load_lexicon(completed_run / "lexicon.txt")
        char = sorted(lex.known_chars())[0]
        out = tmp_path / "g.svg"
        assert main(["glyph", str(completed_run / "lexicon.txt"), char,
                     "--format", "svg", "--out", str(out)]) == 0
        assert out.read_text(encoding="utf-8").startswith("<svg")


class TestInspect:
    def _table_file(self, completed_run, tmp_path):
        from ainushu.embeddings import save_table

        t = generate_synthetic(40, 8, 2)
        p = tmp_path / "table.bin"
        save_table(t, p)
        return p

    def test_k_zero_is_ok(self, completed_run, tmp_path, capsys):
        table_file = self._table_file(completed_run, tmp_path)
        lex = load_lexicon(completed_run / "lexicon.txt")
        char = sorted(lex.known_chars())[0]
        assert main(["inspect", str(completed_run / "lexicon.txt"), char,
                     "--table", str(table_file), "-k", "0"]) == 0

    def test_unknown_char_fails(self, completed_run, tmp_path, capsys):
        table_file = self._table_file(completed_run, tmp_path)
        assert main(["inspect", str(completed_run / "lexicon.txt"), "猫",
                     "--table", str(table_file)]) == 1
        assert "猫" in capsys.readouterr().err

    def test_neighbor_lists_match_oracles(self, completed_run, tmp_path, capsys):
        table_file = self._table_file(completed_run, tmp_path)
        table = load_table(table_file)
        lex = load_lexicon(completed_run / "lexicon.txt")
        char = sorted(lex.known_chars())[0]
        assert main(["inspect", str(completed_run / "lexicon.txt"), char,
                     "--table", str(table_file), "-k", "2"]) == 0
        out = capsys.readouterr().out.splitlines()
        rows = out[2:]
        assert len(rows) == 2
        zh = table.nearest(table.vector(char), 2, exclude={char})
        ain = [cs for cs in lex.nearest_ain(lex.lookup(char).ain_vec, 3) if cs[0] != char][:2]
        for row, (zc, _), (ac, _) in zip(rows, zh, ain):
            assert row.split()[0] == zc
            assert ac in row


class TestVerify:
    def test_accepts_engine_output(self, completed_run, capsys):
        assert main(["verify", str(completed_run)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_rejects_tampered_guess_budget(self, completed_run, tmp_path, capsys):
        bad = tmp_path / "bad_run"
        bad.mkdir()
        (bad / "run_config.json").write_bytes((completed_run / "run_config.json").read_bytes())
        lines = (completed_run / "transcript.jsonl").read_text(encoding="utf-8").splitlines()
        rec = json.loads(lines[0])
        assert not rec["was_known"]
        rec["guesses"] = rec["guesses"] + [[rec["guesses"][0][0], 1]] * 6
        lines[0] = json.dumps(rec, ensure_ascii=False, separators=(",", ":"))
        (bad / "transcript.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert main(["verify", str(bad)]) == 1
        assert "budget" in capsys.readouterr().err

    def test_rejects_broken_alternation(self, completed_run, tmp_path, capsys):
        bad = tmp_path / "bad_run2"
        bad.mkdir()
        (bad / "run_config.json").write_bytes((completed_run / "run_config.json").read_bytes())
        lines = (completed_run / "transcript.jsonl").read_text(encoding="utf-8").splitlines()
        lines[1] = lines[1].replace('"speaker":"B"', '"speaker":"A"')
        (bad / "transcript.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert main(["verify", str(bad)]) == 1
        assert "alternation" in capsys.readouterr().err

    def test_rejects_plaintext_regression(self, completed_run):
        outcomes = [
            outcome_from_json(l)
            for l in (completed_run / "transcript.jsonl").read_text(encoding="utf-8").splitlines()
        ]
        # flip one later AIN token back to plaintext for an already-known char
        import dataclasses

        from ainushu.game import AinToken, PlainToken

        target0 = outcomes[0].target
        for o in outcomes[1:]:
            hit = next((i for i, t in enumerate(o.message.tokens)
                        if isinstance(t, AinToken) and o.verse[i] == target0), None)
            if hit is not None:
                tokens = list(o.message.tokens)
                tokens[hit] = PlainToken(target0)
                o.message = dataclasses.replace(o.message, tokens=tuple(tokens))
                break
        else:
            pytest.skip("coined char never reused in this run")
        errors = verify_outcomes(outcomes, None, 4)
        assert any("plaintext" in e or "decode" in e for e in errors)


class TestConfig:
    def test_unknown_key_in_file_rejected(self, tmp_path):
        from ainushu.config import ConfigError, load_config

        p = tmp_path / "bad.toml"
        p.write_text("seed = 1\nnot_a_key = 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="not_a_key"):
            load_config(p)

    def test_coercion_of_override_strings(self):
        from ainushu.config import SimulationConfig, apply_overrides

        cfg = SimulationConfig()
        apply_overrides(cfg, {"seed": "9", "epsilon": "0.25", "randomize_hint_ties": "true"})
        assert cfg.seed == 9
        assert cfg.epsilon == 0.25
        assert cfg.randomize_hint_ties is True

    def test_provider_url_env_fills_when_unset(self, monkeypatch):
        from ainushu.config import PROVIDER_URL_ENV, SimulationConfig, resolve_provider_url

        cfg = SimulationConfig()
        monkeypatch.setenv(PROVIDER_URL_ENV, "http://example.invalid/hook")
        resolve_provider_url(cfg)
        assert cfg.provider_url == "http://example.invalid/hook"

    def test_provider_url_config_wins_over_env(self, monkeypatch):
        from ainushu.config import PROVIDER_URL_ENV, SimulationConfig, resolve_provider_url

        cfg = SimulationConfig(provider_url="http://cfg.invalid/")
        monkeypatch.setenv(PROVIDER_URL_ENV, "http://env.invalid/")
        resolve_provider_url(cfg)
        assert cfg.provider_url == "http://cfg.invalid/"

    def test_env_absent_means_offline(self, monkeypatch):
        from ainushu.config import PROVIDER_URL_ENV, SimulationConfig, resolve_provider_url

        monkeypatch.delenv(PROVIDER_URL_ENV, raising=False)
        cfg = SimulationConfig()
        resolve_provider_url(cfg)
        assert cfg.provider_url == ""


class TestGenTable:
    def test_writes_loadable_table(self, tmp_path):
        out = tmp_path / "t.bin"
        assert main(["gen-table", str(out), "--n", "10", "--dim", "6", "--seed", "3"]) == 0
        t = load_table(out)
        assert len(t) == 10 and t.dim == 6
        assert t == generate_synthetic(10, 6, 3)

    def test_tsv_format(self, tmp_path):
        out = tmp_path / "t.tsv"
        assert main(["gen-table", str(out), "--n", "5", "--dim", "4", "--format", "tsv"]) == 0
        assert load_table(out).dim == 4
