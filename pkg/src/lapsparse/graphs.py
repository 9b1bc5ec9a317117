"""Undirected CSR graphs, edge-list I/O, and basic graph statistics.

Input edge lists are plain text, one whitespace-separated integer pair per
line.  Node ids need not be contiguous: they are compacted to ``0..n-1`` in
order of first appearance, and the raw-to-compact map is returned alongside
the graph so callers can emit it next to any derived output.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Graph",
    "ParseError",
    "from_edge_pairs",
    "load_graph",
    "write_id_map",
    "load_labels",
    "edge_homophily",
    "degree_sqrt_inv",
    "path_graph",
    "complete_graph",
    "star_graph",
    "erdos_renyi_graph",
]


class ParseError(ValueError):
    """Malformed edge-list or label input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(eq=False)
class Graph:
    """Unweighted undirected graph in CSR form.

    Each undirected edge {u, v} with u != v is stored as the two arcs
    (u, v) and (v, u).  A self-loop is stored as a single arc, contributes
    exactly 1 to its node's degree, and counts as one edge in ``m``.
    Neighbor lists are sorted and duplicate-free, so a uniform draw over
    ``neighbors[row_offsets[u]:row_offsets[u+1]]`` is a uniform neighbor
    step.  Instances are treated as immutable after construction and may be
    shared across worker threads.

    Attributes
    ----------
    n : int
        Number of nodes.
    m : int
        Number of undirected edges after symmetrization and dedup
        (self-loops counted once).
    row_offsets : ndarray of int64, shape (n + 1,)
        CSR row pointers into ``neighbors``.
    neighbors : ndarray of int64, shape (arc_total,)
        Concatenated sorted neighbor lists.
    degrees : ndarray of int64, shape (n,)
        Arc counts per node; every entry is positive (no isolated nodes).
    self_loop_count : int
        Number of nodes carrying a self-loop.
    """

    n: int
    m: int
    row_offsets: np.ndarray
    neighbors: np.ndarray
    degrees: np.ndarray
    self_loop_count: int = 0

    @property
    def arc_total(self) -> int:
        """Total stored arcs, equal to ``degrees.sum()``."""
        return int(self.neighbors.shape[0])

    @cached_property
    def inv_sqrt_degrees(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.degrees.astype(np.float64))

    @cached_property
    def arc_sources(self) -> np.ndarray:
        """Source node of each CSR arc (row index repeated by degree)."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)

    @cached_property
    def arc_norm_weights(self) -> np.ndarray:
        """Per-arc weights of D^{-1/2} A D^{-1/2} in CSR order."""
        inv = self.inv_sqrt_degrees
        return inv[self.arc_sources] * inv[self.neighbors]

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.row_offsets[u] : self.row_offsets[u + 1]]

    def check(self) -> None:
        """Assert structural invariants; used by tests."""
        assert self.row_offsets.shape == (self.n + 1,)
        assert self.row_offsets[0] == 0 and self.row_offsets[-1] == self.arc_total
        assert np.array_equal(np.diff(self.row_offsets), self.degrees)
        assert int(self.degrees.sum()) == self.arc_total
        assert self.degrees.min() > 0, "isolated node"
        # symmetry: arc (u, v) implies arc (v, u); loops appear once
        keys = set(zip(self.arc_sources.tolist(), self.neighbors.tolist()))
        assert len(keys) == self.arc_total, "duplicate arc"
        assert all((v, u) in keys for (u, v) in keys)
        loops = sum(1 for (u, v) in keys if u == v)
        assert loops == self.self_loop_count
        assert 2 * self.m == self.arc_total + self.self_loop_count


def from_edge_pairs(
    pairs: np.ndarray, n: int | None = None, add_self_loops: bool = False
) -> Graph:
    """Build a Graph from an integer pair array.

    Pairs are interpreted as undirected edges: both orientations are
    deduplicated into one sorted CSR structure.  ``u u`` pairs are kept as
    self-loops.  With ``add_self_loops`` every node gains exactly one
    self-loop (existing ones are not doubled).

    Args:
        pairs: array-like of shape (E, 2) with non-negative node ids.
        n: node count; defaults to ``max(id) + 1``.  When given, all ids
            must be below it and every node must end up with an arc.
        add_self_loops: ensure one self-loop per node.

    Returns:
        Graph with compacted ids assumed; no id remapping happens here.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0 and n is None:
        raise ValueError("empty graph: no edges given")
    if pairs.size and pairs.min() < 0:
        raise ValueError("negative node id")
    if n is None:
        n = int(pairs.max()) + 1
    if n <= 0:
        raise ValueError("node count must be positive")
    if pairs.size and pairs.max() >= n:
        raise ValueError(f"node id {int(pairs.max())} out of range for n={n}")

    u, v = pairs[:, 0], pairs[:, 1]
    loop = u == v
    src = np.concatenate([u[~loop], v[~loop], u[loop]])
    dst = np.concatenate([v[~loop], u[~loop], v[loop]])
    if add_self_loops:
        diag = np.arange(n, dtype=np.int64)
        src = np.concatenate([src, diag])
        dst = np.concatenate([dst, diag])
    if src.size == 0:
        raise ValueError("empty graph: no edges given")

    keys = np.unique(src * np.int64(n) + dst)
    arc_src = keys // n
    arc_dst = keys % n
    degrees = np.bincount(arc_src, minlength=n).astype(np.int64)
    if degrees.min() == 0:
        missing = np.flatnonzero(degrees == 0)
        raise ValueError(f"isolated node(s) {missing[:5].tolist()} after symmetrization")
    row_offsets = np.concatenate([[0], np.cumsum(degrees)]).astype(np.int64)
    loops = int(np.count_nonzero(arc_src == arc_dst))
    m = (keys.size - loops) // 2 + loops
    return Graph(
        n=n,
        m=m,
        row_offsets=row_offsets,
        neighbors=arc_dst,
        degrees=degrees,
        self_loop_count=loops,
    )


def load_graph(path, add_self_loops: bool = False) -> tuple[Graph, dict[int, int]]:
    """Load an edge-list file.

    Each non-blank line must hold exactly two integer ids; anything else
    (including weight columns, which are not supported) raises ParseError
    with the offending line number.  Ids are compacted to ``0..n-1`` in
    first-appearance order.

    Returns:
        (graph, id_map) where id_map maps raw id -> compact id.
    """
    id_map: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise ParseError(
                    line_no,
                    f"expected two integer ids, got {len(tokens)} fields "
                    "(weighted edge lists are not supported)",
                )
            try:
                a, b = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(line_no, f"non-integer id in {tokens!r}") from None
            if a < 0 or b < 0:
                raise ParseError(line_no, "negative node id")
            for raw in (a, b):
                if raw not in id_map:
                    id_map[raw] = len(id_map)
            edges.append((id_map[a], id_map[b]))
    if not edges:
        raise ValueError(f"empty graph: no edges in {path}")
    graph = from_edge_pairs(np.asarray(edges), n=len(id_map), add_self_loops=add_self_loops)
    return graph, id_map


def write_id_map(path, id_map: dict[int, int]) -> None:
    """Write the raw-to-compact id map as a two-column TSV 'raw_id compact_id'."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for raw, compact in sorted(id_map.items(), key=lambda kv: kv[1]):
            fh.write(f"{raw}\t{compact}\n")


def load_labels(path, id_map: dict[int, int] | None = None, n: int | None = None) -> np.ndarray:
    """Load node labels from a two-column file 'node_id label'.

    With ``id_map`` given, node ids are raw ids and are remapped; otherwise
    they must already be compact.  Every node must receive exactly one
    label.
    """
    if id_map is not None:
        n = len(id_map)
    if n is None:
        raise ValueError("need id_map or n to size the label array")
    labels = np.full(n, -1, dtype=np.int64)
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise ParseError(line_no, f"expected 'node label', got {len(tokens)} fields")
            try:
                node, label = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(line_no, f"non-integer field in {tokens!r}") from None
            if label < 0:
                raise ParseError(line_no, "labels must be non-negative")
            if id_map is not None:
                if node not in id_map:
                    raise ParseError(line_no, f"unknown node id {node}")
                node = id_map[node]
            if not 0 <= node < n:
                raise ParseError(line_no, f"node id {node} out of range")
            if labels[node] >= 0:
                raise ParseError(line_no, f"duplicate label for node {node}")
            labels[node] = label
    if (labels < 0).any():
        missing = np.flatnonzero(labels < 0)
        raise ValueError(f"missing label for node(s) {missing[:5].tolist()}")
    return labels


def edge_homophily(graph: Graph, labels) -> float:
    """Fraction of undirected non-self-loop edges joining equal labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (graph.n,):
        raise ValueError(f"labels must have shape ({graph.n},), got {labels.shape}")
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be non-negative")
    denom = graph.m - graph.self_loop_count
    if denom == 0:
        raise ValueError("homophily undefined: graph has no non-self-loop edges")
    src = graph.arc_sources
    dst = graph.neighbors
    once = src < dst  # each undirected edge counted once, loops excluded
    same = int(np.count_nonzero(labels[src[once]] == labels[dst[once]]))
    return same / denom


def degree_sqrt_inv(graph: Graph, u: int) -> float:
    """Return d_u^{-1/2}; degrees are positive so this is always finite."""
    if not 0 <= u < graph.n:
        raise IndexError(f"node {u} out of range for n={graph.n}")
    return float(graph.inv_sqrt_degrees[u])


# ---------------------------------------------------------------------------
# deterministic toy-graph constructors used by tests, benches, and scripts
# ---------------------------------------------------------------------------


def path_graph(n: int, add_self_loops: bool = False) -> Graph:
    if n < 2:
        raise ValueError("path graph needs at least 2 nodes")
    idx = np.arange(n - 1, dtype=np.int64)
    return from_edge_pairs(np.stack([idx, idx + 1], axis=1), n=n, add_self_loops=add_self_loops)


def complete_graph(n: int, add_self_loops: bool = False) -> Graph:
    if n < 2:
        raise ValueError("complete graph needs at least 2 nodes")
    iu = np.triu_indices(n, k=1)
    return from_edge_pairs(np.stack(iu, axis=1), n=n, add_self_loops=add_self_loops)


def star_graph(leaves: int, add_self_loops: bool = False) -> Graph:
    """Hub node 0 joined to ``leaves`` leaf nodes 1..leaves."""
    if leaves < 1:
        raise ValueError("star graph needs at least 1 leaf")
    hub = np.zeros(leaves, dtype=np.int64)
    leaf = np.arange(1, leaves + 1, dtype=np.int64)
    return from_edge_pairs(np.stack([hub, leaf], axis=1), n=leaves + 1, add_self_loops=add_self_loops)


def erdos_renyi_graph(
    n: int,
    mean_degree: float,
    seed: int,
    add_self_loops: bool = False,
) -> Graph:
    """Seeded G(n, p) sample with p = mean_degree / (n - 1).

    Nodes left isolated by the draw are attached to their successor
    (u, (u + 1) % n) so the no-isolated-node invariant always holds without
    consuming extra randomness.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    p = mean_degree / (n - 1)
    if not 0 < p <= 1:
        raise ValueError(f"mean degree {mean_degree} out of range for n={n}")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    mask = rng.random(iu[0].shape[0]) < p
    src = iu[0][mask].astype(np.int64)
    dst = iu[1][mask].astype(np.int64)
    present = np.zeros(n, dtype=bool)
    present[src] = True
    present[dst] = True
    lonely = np.flatnonzero(~present).astype(np.int64)
    if lonely.size:
        src = np.concatenate([src, lonely])
        dst = np.concatenate([dst, (lonely + 1) % n])
    return from_edge_pairs(np.stack([src, dst], axis=1), n=n, add_self_loops=add_self_loops)
