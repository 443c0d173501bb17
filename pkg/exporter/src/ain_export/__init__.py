"""One-shot exporter: pretrained masked-LM token embeddings -> table file.

Reads a character list, looks each character up as a single token in the
model's vocabulary, and writes the static input-embedding rows (not
contextual outputs: the dictionary is context-free, one vector per
character) in the simulator's TSV or binary table format. Characters that
are missing from the vocabulary or split into multiple tokens are skipped
and reported.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

TSV_HEADER = "#AIN-EMB v1"
BINARY_MAGIC = b"AINE"
BINARY_VERSION = 1


class ExportError(ValueError):
    pass


def read_char_list(path: str | Path) -> list[str]:
    """One character per line, UTF-8, '#' comments; duplicates rejected."""
    chars: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if len(line) != 1:
            raise ExportError(f"{path}:{lineno}: expected exactly one codepoint, got {line!r}")
        if line in seen:
            raise ExportError(f"{path}:{lineno}: duplicate character {line!r}")
        seen.add(line)
        chars.append(line)
    if not chars:
        raise ExportError(f"{path}: empty character list")
    return chars


def write_tsv(chars: list[str], matrix: np.ndarray, path: str | Path) -> None:
    dim = matrix.shape[1]
    lines = [f"{TSV_HEADER} dim={dim} count={len(chars)}"]
    for char, row in zip(chars, matrix):
        lines.append(char + "\t" + ",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_binary(chars: list[str], matrix: np.ndarray, path: str | Path) -> None:
    dim = matrix.shape[1]
    buf = bytearray()
    buf += BINARY_MAGIC
    buf += struct.pack("<III", BINARY_VERSION, dim, len(chars))
    for char, row in zip(chars, matrix):
        buf += struct.pack("<I", ord(char))
        buf += np.asarray(row, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def extract_rows(model_id: str, chars: list[str]) -> tuple[list[str], np.ndarray, list[str]]:
    """Embedding rows for every exportable character, in list order.

    Returns (kept characters, float32 matrix, skipped characters). A
    character is exportable when the tokenizer maps it to exactly one
    non-UNK token.
    """
    try:
        from transformers import AutoModel, AutoTokenizer
    except ImportError as exc:  # pragma: no cover
        raise ExportError(f"transformers is required: {exc}") from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ExportError(f"cannot load model {model_id!r}: {exc}") from exc
    weights = model.get_input_embeddings().weight.detach().cpu().numpy()
    unk = tokenizer.unk_token_id
    kept: list[str] = []
    rows: list[np.ndarray] = []
    skipped: list[str] = []
    for char in chars:
        ids = tokenizer(char, add_special_tokens=False)["input_ids"]
        if len(ids) != 1 or ids[0] == unk:
            skipped.append(char)
            continue
        kept.append(char)
        rows.append(weights[ids[0]].astype(np.float32))
    if not kept:
        raise ExportError("no exportable characters (all missing from the vocabulary)")
    return kept, np.stack(rows), skipped


def export(model_id: str, list_path: str | Path, out_path: str | Path,
           format: str = "binary") -> tuple[int, list[str]]:
    """Run the full export; returns (exported count, skipped characters)."""
    if format not in ("tsv", "binary"):
        raise ExportError(f"unknown format {format!r}")
    chars = read_char_list(list_path)
    kept, matrix, skipped = extract_rows(model_id, chars)
    if format == "tsv":
        write_tsv(kept, matrix, out_path)
    else:
        write_binary(kept, matrix, out_path)
    return len(kept), skipped
