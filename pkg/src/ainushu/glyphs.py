"""Glyph codec: PCA projection, 24-level quantization, pixel rendering.

Every coined vector is projected onto three principal axes fitted once on
the full Chinese table, quantized into a 24^3 = 13824 cell grid, nudged to
a free cell on collision, and rendered as a tall 8x24 pixel glyph by
stacking three components from a 24-element atlas (simple strokes first).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable

COMPONENT_COUNT = 24
CODE_SPACE = COMPONENT_COUNT**3  # 13824
CELL_W = 8
CELL_H = 8
GLYPH_W = CELL_W
GLYPH_H = 3 * CELL_H


class GlyphError(ValueError):
    pass


class GridFullError(GlyphError):
    """All 13824 glyph cells are occupied."""


@dataclass(frozen=True)
class GlyphCode:
    c0: int
    c1: int
    c2: int

    def __post_init__(self):
        for v in (self.c0, self.c1, self.c2):
            if not 0 <= v < COMPONENT_COUNT:
                raise GlyphError(f"component index {v} outside [0, {COMPONENT_COUNT})")

    def key(self) -> str:
        return f"{self.c0}.{self.c1}.{self.c2}"

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.c0, self.c1, self.c2)

    @classmethod
    def parse(cls, text: str) -> "GlyphCode":
        parts = text.split(".")
        if len(parts) != 3:
            raise GlyphError(f"bad glyph code {text!r}")
        try:
            a, b, c = (int(p) for p in parts)
        except ValueError:
            raise GlyphError(f"bad glyph code {text!r}") from None
        return cls(a, b, c)


@dataclass(frozen=True)
class Projection:
    mean: np.ndarray  # (dim,)
    axes: np.ndarray  # (3, dim), orthonormal rows
    mins: np.ndarray  # (3,) quantization bounds over the fit set
    maxs: np.ndarray  # (3,)
    variances: np.ndarray  # (3,) explained variance, non-increasing


def fit_pca(table: EmbeddingTable) -> Projection:
    """Top-3 principal axes of the mean-centered table.

    Sign convention: the first coefficient of each axis whose magnitude
    exceeds 1e-12 is made positive, so the fit is deterministic. Rejects
    tables whose spread has rank < 3.
    """
    n = len(table)
    if n < 4:
        raise GlyphError("PCA fit needs at least 4 entries")
    if table.dim < 3:
        raise GlyphError("PCA fit needs dimensionality >= 3")
    x = table.vectors.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (n - 1)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    top = evals[::-1][:3].copy()
    axes = evecs[:, ::-1][:, :3].T.copy()
    if top[2] <= max(top[0], 0.0) * 1e-12 or top[2] <= 0.0:
        raise GlyphError("degenerate table: projected rank < 3")
    for i in range(3):
        nz = np.flatnonzero(np.abs(axes[i]) > 1e-12)
        if nz.size and axes[i, nz[0]] < 0:
            axes[i] = -axes[i]
    proj = xc @ axes.T
    return Projection(
        mean=mean,
        axes=axes,
        mins=proj.min(axis=0),
        maxs=proj.max(axis=0),
        variances=top,
    )


def project(projection: Projection, vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != projection.mean.shape:
        raise GlyphError(f"vector shape {v.shape} does not match projection")
    return (v - projection.mean) @ projection.axes.T


def quantize(projection: Projection, point: np.ndarray) -> GlyphCode:
    """Equal-width 24-bin quantization per axis; out-of-range values clamp."""
    p = np.asarray(point, dtype=np.float64)
    bins = []
    for i in range(3):
        span = projection.maxs[i] - projection.mins[i]
        b = int(np.floor(COMPONENT_COUNT * (p[i] - projection.mins[i]) / span))
        bins.append(min(max(b, 0), COMPONENT_COUNT - 1))
    return GlyphCode(*bins)


_GRID = np.stack(
    np.meshgrid(
        np.arange(COMPONENT_COUNT), np.arange(COMPONENT_COUNT), np.arange(COMPONENT_COUNT),
        indexing="ij",
    ),
    axis=-1,
).reshape(-1, 3)  # lexicographic (c0, c1, c2) order


def resolve_collision(code: GlyphCode, occupied: set[GlyphCode]) -> GlyphCode:
    """The code itself when free, else the nearest free cell.

    Nearest by L1 distance in the 24^3 grid, ties by lexicographic
    (c0, c1, c2); the grid scan order makes the first minimum the
    lexicographic winner.
    """
    if code not in occupied:
        return code
    if len(occupied) >= CODE_SPACE:
        raise GridFullError("glyph grid is full (13824 cells)")
    l1 = np.abs(_GRID - np.array(code.as_tuple())).sum(axis=1)
    for g in occupied:
        t = g.as_tuple()
        l1[t[0] * 576 + t[1] * 24 + t[2]] = 4 * COMPONENT_COUNT  # beyond any real L1
    best = int(np.argmin(l1))
    return GlyphCode(*(int(v) for v in _GRID[best]))


# -- component atlas ---------------------------------------------------------


class ComponentAtlas:
    """24 distinct 8x8 binary stroke bitmaps, simple to complex.

    Ordering invariant: set-pixel counts are non-decreasing with the
    component index, so component 0 is the simplest.
    """

    def __init__(self, bitmaps: np.ndarray):
        bitmaps = np.asarray(bitmaps, dtype=np.uint8)
        if bitmaps.shape != (COMPONENT_COUNT, CELL_H, CELL_W):
            raise GlyphError(f"atlas shape {bitmaps.shape}, expected (24, 8, 8)")
        if not np.isin(bitmaps, (0, 1)).all():
            raise GlyphError("atlas bitmaps must be binary")
        seen = set()
        for i in range(COMPONENT_COUNT):
            key = bitmaps[i].tobytes()
            if key in seen:
                raise GlyphError(f"component {i} duplicates an earlier bitmap")
            seen.add(key)
        counts = bitmaps.sum(axis=(1, 2), dtype=np.int64)  # uint8 diff would wrap
        if np.any(np.diff(counts) < 0):
            bad = int(np.flatnonzero(np.diff(counts) < 0)[0]) + 1
            raise GlyphError(f"component {bad} is simpler than its predecessor")
        bitmaps.setflags(write=False)
        self.bitmaps = bitmaps

    def __len__(self) -> int:
        return COMPONENT_COUNT


def _paint(cells: list[tuple[int, int]]) -> np.ndarray:
    g = np.zeros((CELL_H, CELL_W), dtype=np.uint8)
    for r, c in cells:
        g[r, c] = 1
    return g


def _hline(r: int, c0: int, c1: int) -> list[tuple[int, int]]:
    return [(r, c) for c in range(c0, c1 + 1)]


def _vline(c: int, r0: int, r1: int) -> list[tuple[int, int]]:
    return [(r, c) for r in range(r0, r1 + 1)]


def _diag(r0: int, c0: int, steps: int, dc: int = 1) -> list[tuple[int, int]]:
    return [(r0 + i, c0 + i * dc) for i in range(steps)]


def default_atlas() -> ComponentAtlas:
    """The bundled synthetic atlas: dots and strokes of growing complexity."""
    shapes = [
        [(3, 3)],                                      # dot
        [(2, 2), (5, 5)],                              # two dots, falling
        [(2, 5), (5, 2)],                              # two dots, rising
        [(1, 3), (3, 3), (5, 3)],                      # dotted column
        _hline(3, 2, 5),                               # short bar
        _vline(4, 2, 5),                               # short post
        _diag(1, 1, 5),                                # falling stroke
        _diag(1, 6, 5, -1),                            # rising stroke
        _hline(5, 1, 6),                               # low bar
        _vline(2, 1, 6),                               # tall post
        _vline(1, 1, 4) + _hline(4, 2, 4),             # foot hook
        _hline(1, 3, 5) + _vline(6, 1, 4),             # head hook
        _hline(2, 0, 7),                               # full bar
        _vline(5, 0, 7),                               # full post
        _diag(0, 0, 8),                                # full falling
        _diag(0, 7, 8, -1),                            # full rising
        _hline(4, 0, 7) + [(1, 1)],                    # bar with dot
        _vline(3, 0, 7) + [(1, 6), (6, 6)],            # post with dots
        _hline(1, 1, 5) + _hline(6, 2, 6),             # double bar
        _vline(1, 1, 5) + _vline(6, 1, 6),             # double post
        _diag(0, 0, 7) + _diag(0, 6, 7, -1),           # cross of strokes
        _hline(0, 0, 7) + _vline(3, 1, 7),             # hanging tee
        _vline(1, 1, 6) + _vline(6, 1, 5) + _hline(6, 2, 6),  # open basin
        _hline(1, 1, 6) + _hline(6, 1, 6) + _vline(1, 2, 5) + _vline(6, 2, 5),  # frame
    ]
    return ComponentAtlas(np.stack([_paint(s) for s in shapes]))


def save_atlas(atlas: ComponentAtlas, path: str | Path) -> None:
    blocks = []
    for i in range(COMPONENT_COUNT):
        rows = ["".join(str(int(v)) for v in row) for row in atlas.bitmaps[i]]
        blocks.append("\n".join(rows))
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def load_atlas(path: str | Path) -> ComponentAtlas:
    rows: list[list[int]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if len(s) != CELL_W or any(ch not in "01" for ch in s):
            raise GlyphError(f"{path}:{lineno}: expected 8 binary digits, got {s!r}")
        rows.append([int(ch) for ch in s])
    if len(rows) != COMPONENT_COUNT * CELL_H:
        raise GlyphError(f"{path}: expected {COMPONENT_COUNT * CELL_H} bitmap rows, got {len(rows)}")
    bitmaps = np.array(rows, dtype=np.uint8).reshape(COMPONENT_COUNT, CELL_H, CELL_W)
    return ComponentAtlas(bitmaps)


# -- rendering and export ----------------------------------------------------


def render(code: GlyphCode, atlas: ComponentAtlas) -> np.ndarray:
    """8 wide x 24 tall binary pixel grid: c0 on top, c1 middle, c2 bottom."""
    return np.vstack([atlas.bitmaps[code.c0], atlas.bitmaps[code.c1], atlas.bitmaps[code.c2]])


def grid_to_text(grid: np.ndarray) -> str:
    return "\n".join("".join("#" if v else "." for v in row) for row in grid) + "\n"


def grid_to_pgm(grid: np.ndarray) -> bytes:
    h, w = grid.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + np.where(grid > 0, 0, 255).astype(np.uint8).tobytes()  # ink black


def grid_to_svg(grid: np.ndarray) -> str:
    h, w = grid.shape
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
        f'width="{w * 10}" height="{h * 10}" shape-rendering="crispEdges">'
    ]
    for r in range(h):
        for c in range(w):
            if grid[r, c]:
                parts.append(f'<rect x="{c}" y="{r}" width="1" height="1"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_glyph(code: GlyphCode, atlas: ComponentAtlas, format: str, path: str | Path) -> None:
    grid = render(code, atlas)
    path = Path(path)
    if format == "text":
        path.write_text(grid_to_text(grid), encoding="utf-8")
    elif format == "pgm":
        path.write_bytes(grid_to_pgm(grid))
    elif format == "svg":
        path.write_text(grid_to_svg(grid), encoding="utf-8")
    else:
        raise ValueError(f"unknown glyph format {format!r}")


def contact_sheet(codes: list[GlyphCode], atlas: ComponentAtlas, per_row: int = 16) -> bytes:
    """PGM contact sheet of glyphs in the given order, row-major."""
    if not codes:
        raise GlyphError("no glyphs to sheet")
    pad = 2
    cols = min(per_row, len(codes))
    nrows = (len(codes) + cols - 1) // cols
    width = cols * (GLYPH_W + pad) + pad
    height = nrows * (GLYPH_H + pad) + pad
    canvas = np.zeros((height, width), dtype=np.uint8)
    for i, code in enumerate(codes):
        r, c = divmod(i, cols)
        y = pad + r * (GLYPH_H + pad)
        x = pad + c * (GLYPH_W + pad)
        canvas[y : y + GLYPH_H, x : x + GLYPH_W] = render(code, atlas)
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + np.where(canvas > 0, 0, 255).astype(np.uint8).tobytes()
