"""Agglomerative dendrogram over the character table.

Built once per session with cosine distance (1 - cosine). The tree answers
the structural queries the guessing game needs: hint selection, quantized
proximity feedback, and the candidate sets consistent with past feedback.

Merge order is fully deterministic: the closest active pair merges first,
and exact ties go to the pair whose (smallest, second-smallest) member
codepoints compare lowest. The cophenetic distance of every leaf pair is
materialized during the build, so all game-time queries are O(n) row scans.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable

LINKAGES = ("average", "complete", "single")


class ClusterError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterNode:
    id: int
    members: frozenset[str]
    children: tuple[int, int] | None  # None for leaves; (left, right) by min codepoint
    height: float

    @property
    def is_leaf(self) -> bool:
        return self.children is None


class ClusterTree:
    def __init__(
        self,
        nodes: list[ClusterNode],
        parents: np.ndarray,
        chars: tuple[str, ...],
        coph: np.ndarray,
        linkage: str,
        merges: list[tuple[int, int, int, float]],
    ):
        self.nodes = nodes
        self.linkage = linkage
        self._parents = parents
        self._chars = chars
        self._row = {c: i for i, c in enumerate(chars)}
        self._coph = coph
        self._codepoints = np.array([ord(c) for c in chars], dtype=np.int64)
        self.merges = merges  # (step, left_id, right_id, height)

    @property
    def n_leaves(self) -> int:
        return len(self._chars)

    @property
    def characters(self) -> tuple[str, ...]:
        return self._chars

    @property
    def codepoints(self) -> np.ndarray:
        return self._codepoints

    def coph_row(self, char: str) -> np.ndarray:
        """Cophenetic distances from `char` to every leaf, in leaf order."""
        return self._coph[self.leaf_id(char)]

    @property
    def root_id(self) -> int:
        return len(self.nodes) - 1

    @property
    def root_height(self) -> float:
        return self.nodes[self.root_id].height

    def leaf_id(self, char: str) -> int:
        try:
            return self._row[char]
        except KeyError:
            raise ClusterError(f"{char!r} is not a leaf") from None

    def parent(self, node_id: int) -> int:
        if not 0 <= node_id < len(self.nodes):
            raise ClusterError(f"no node {node_id}")
        if node_id == self.root_id:
            raise ClusterError("root has no parent")
        return int(self._parents[node_id])

    def cophenetic(self, a: str, b: str) -> float:
        """Height of the lowest common ancestor of two leaves."""
        return float(self._coph[self.leaf_id(a), self.leaf_id(b)])

    def feedback_levels_all(self, reference: str, levels: int) -> np.ndarray:
        """Feedback level of every character against `reference` (self gets 0)."""
        row = self._coph[self.leaf_id(reference)]
        h = self.root_height
        if h <= 0.0:
            lv = np.ones(len(row), dtype=np.int64)
        else:
            lv = 1 + np.floor((levels - 1) * row / h).astype(np.int64)
            np.clip(lv, 1, levels, out=lv)
        lv[self.leaf_id(reference)] = 0
        return lv

    def feedback_level(self, guess: str, target: str, levels: int) -> int:
        """Quantized proximity feedback: 0 for a correct guess, else 1..levels.

        Monotone in cophenetic distance; a maximally distant guess maps
        to `levels`.
        """
        if levels < 2:
            raise ClusterError("levels must be >= 2")
        if guess == target:
            self.leaf_id(guess)
            return 0
        d = self.cophenetic(guess, target)
        h = self.root_height
        if h <= 0.0:
            return 1
        return int(min(max(1 + int(np.floor((levels - 1) * d / h)), 1), levels))

    def candidates_at_level(self, reference: str, level: int, levels: int) -> set[str]:
        """All characters (never `reference` itself) whose feedback against
        `reference` would be exactly `level`."""
        if levels < 2:
            raise ClusterError("levels must be >= 2")
        if not 1 <= level <= levels:
            raise ClusterError(f"level {level} outside [1, {levels}]")
        lv = self.feedback_levels_all(reference, levels)
        return {self._chars[i] for i in np.flatnonzero(lv == level)}

    def hint_for(self, target: str, lexicon_known: set[str] | frozenset[str], rng=None) -> str:
        """Pick the plaintext hint for a freshly coined symbol.

        Candidates come from the smallest ancestor cluster of the target that
        contains another character (the target leaf's parent). Preference:
        already-known characters first, then smallest cophenetic distance,
        then ascending codepoint. An rng, when given, randomizes only among
        candidates whose (known, distance) keys tie exactly.
        """
        node = self.nodes[self.leaf_id(target)]
        while len(node.members) == 1:
            node = self.nodes[self.parent(node.id)]
        candidates = sorted(node.members - {target})
        if not candidates:
            raise ClusterError(f"no hint candidate for {target!r}")
        keys = [
            (0 if c in lexicon_known else 1, self.cophenetic(target, c), ord(c))
            for c in candidates
        ]
        best = min(keys)
        if rng is not None:
            tied = [c for c, k in zip(candidates, keys) if k[:2] == best[:2]]
            if len(tied) > 1:
                return tied[int(rng.integers(len(tied)))]
        return candidates[keys.index(best)]

    def merge_lines(self) -> list[str]:
        """Dendrogram dump, one merge per line: step, left id, right id, height."""
        return [f"{s} {l} {r} {h!r}" for s, l, r, h in self.merges]

    def check_shape(self) -> None:
        """Assert structural invariants; raises ClusterError on violation."""
        n = self.n_leaves
        if len(self.nodes) != 2 * n - 1:
            raise ClusterError("node count is not 2n-1")
        if self.nodes[self.root_id].members != frozenset(self._chars):
            raise ClusterError("root members != all characters")
        for node in self.nodes:
            if node.is_leaf:
                if len(node.members) != 1 or node.height != 0.0:
                    raise ClusterError(f"bad leaf {node.id}")
            else:
                left, right = node.children
                if self.nodes[left].members | self.nodes[right].members != node.members:
                    raise ClusterError(f"member union broken at {node.id}")
                if node.height < max(self.nodes[left].height, self.nodes[right].height):
                    raise ClusterError(f"height inversion at {node.id}")


def cosine_distance_matrix(table: EmbeddingTable) -> np.ndarray:
    """Pairwise 1 - cosine over the table, clamped to [0, 2], zero diagonal."""
    v = table.vectors.astype(np.float64) / table.norms[:, None]
    s = v @ v.T
    np.clip(s, -1.0, 1.0, out=s)
    d = 1.0 - s
    np.fill_diagonal(d, 0.0)
    return d


def _tie_break_pair(slots_a, slots_b, mincp) -> tuple[int, int]:
    """Among tied candidate pairs, pick the one whose sorted pair of
    smallest member codepoints is lexicographically lowest."""
    best_key = None
    best = (int(slots_a[0]), int(slots_b[0]))
    for a, b in zip(slots_a, slots_b):
        key = tuple(sorted((int(mincp[a]), int(mincp[b]))))
        if best_key is None or key < best_key:
            best_key = key
            best = (int(a), int(b))
    return best


def build_tree(table: EmbeddingTable, linkage: str = "average") -> ClusterTree:
    """Agglomerative clustering of the full table under cosine distance.

    O(n^2) memory, O(n^3) time in the worst case; fine at dictionary scale
    (a few thousand characters). Same table and linkage always produce the
    identical tree, node numbering included.
    """
    if linkage not in LINKAGES:
        raise ClusterError(f"unknown linkage {linkage!r}")
    n = len(table)
    if n < 2:
        raise ClusterError("clustering needs at least 2 entries")

    d = cosine_distance_matrix(table)
    # work matrix: pairwise-distance sums for average linkage (divided by the
    # size product on comparison), plain min/max distances otherwise
    work = d.copy()
    coph = np.zeros((n, n), dtype=np.float64)
    size = np.ones(n, dtype=np.int64)
    mincp = np.array([ord(c) for c in table.chars], dtype=np.int64)
    active = np.ones(n, dtype=bool)
    node_of = np.arange(n)
    rows_of: list[list[int] | None] = [[i] for i in range(n)]

    nodes = [ClusterNode(i, frozenset({c}), None, 0.0) for i, c in enumerate(table.chars)]
    parents = np.full(2 * n - 1, -1, dtype=np.int64)
    merges: list[tuple[int, int, int, float]] = []

    for step in range(n - 1):
        act = np.flatnonzero(active)
        sub = work[np.ix_(act, act)]
        if linkage == "average":
            sz = size[act].astype(np.float64)
            sub = sub / (sz[:, None] * sz[None, :])
        iu, ju = np.triu_indices(len(act), k=1)
        vals = sub[iu, ju]
        m = vals.min()
        tied = np.flatnonzero(vals == m)
        sa, sb = _tie_break_pair(act[iu[tied]], act[ju[tied]], mincp)

        ia, ib = int(node_of[sa]), int(node_of[sb])
        left, right = (ib, ia) if mincp[sb] < mincp[sa] else (ia, ib)
        height = max(float(m), nodes[ia].height, nodes[ib].height)
        new_id = n + step
        nodes.append(ClusterNode(new_id, nodes[ia].members | nodes[ib].members, (left, right), height))
        parents[ia] = new_id
        parents[ib] = new_id
        merges.append((step, left, right, height))

        ra, rb = rows_of[sa], rows_of[sb]
        coph[np.ix_(ra, rb)] = height
        coph[np.ix_(rb, ra)] = height

        others = active.copy()
        others[sa] = False
        others[sb] = False
        if linkage == "average":
            work[sa, others] = work[sa, others] + work[sb, others]
        elif linkage == "single":
            work[sa, others] = np.minimum(work[sa, others], work[sb, others])
        else:
            work[sa, others] = np.maximum(work[sa, others], work[sb, others])
        work[others, sa] = work[sa, others]
        size[sa] += size[sb]
        mincp[sa] = min(mincp[sa], mincp[sb])
        rows_of[sa] = ra + rb
        rows_of[sb] = None
        node_of[sa] = new_id
        active[sb] = False

    tree = ClusterTree(nodes, parents, table.chars, coph, linkage, merges)
    tree.check_shape()
    return tree
