"""Random-walk sampling of weighted path endpoints.

The primitive behind every sparsifier here draws one directed path of
length k and returns its endpoints.  It picks a CSR arc uniformly at
random, places it uniformly at one of the k positions along the path, and
walks outward from both arc endpoints with uniform neighbor steps.  The
endpoint pair (u, v) then lands with probability

    Pr[(u, v)] = (D (D^-1 A)^k)_{uv} / sum(degrees),

i.e. proportionally to the total degree-normalized weight of length-k
paths from u to v.  Rescaling a draw by ``sum(degrees) / M`` therefore
gives an unbiased one-sample estimate of D (D^-1 A)^k, which is all the
sparsifiers need.

Randomness comes from numpy Generator streams over the counter-based
Philox bit generator.  Parallel workers use disjoint streams derived from
the run seed and the worker index through ``SeedSequence`` spawn keys, so
a fixed (seed, worker count) pair always reproduces the same draws.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .graphs import Graph

__all__ = [
    "SampledPathEndpoints",
    "philox_stream",
    "walk_from_batch",
    "sample_walk_from",
    "sample_edge_batch",
    "sample_edge_k",
]


class SampledPathEndpoints(NamedTuple):
    u: int
    v: int
    k: int


def philox_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for one coordinate of a seeded stream tree.

    ``path`` is a tuple of small non-negative integers (worker index, hop,
    trial, ...).  Distinct paths give statistically independent Philox
    streams for the same seed; the same (seed, path) always reproduces the
    same stream.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def walk_from_batch(
    graph: Graph, starts: np.ndarray, lengths: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Endpoints of uniform random walks with per-walk lengths.

    Walks advance in lockstep: at step t only walks with length > t move.
    Length 0 returns the start node unchanged.
    """
    cur = np.array(starts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if cur.shape != lengths.shape:
        raise ValueError("starts and lengths must have matching shapes")
    if cur.size == 0:
        return cur
    if lengths.min() < 0:
        raise ValueError("negative walk length")
    if cur.min() < 0 or cur.max() >= graph.n:
        raise ValueError("walk start out of range")
    for step in range(int(lengths.max())):
        active = np.flatnonzero(lengths > step)
        nodes = cur[active]
        hops = rng.integers(graph.degrees[nodes])  # uniform in [0, d)
        cur[active] = graph.neighbors[graph.row_offsets[nodes] + hops]
    return cur


def sample_walk_from(graph: Graph, start: int, k: int, rng: np.random.Generator) -> int:
    """End node of one uniform k-step walk from ``start``."""
    if k < 0:
        raise ValueError("walk length must be >= 0")
    end = walk_from_batch(graph, np.array([start]), np.array([k]), rng)
    return int(end[0])


def sample_edge_batch(
    graph: Graph, k: int, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` independent length-k path endpoint pairs.

    Each draw picks an arc uniformly among all stored arcs (equivalent to a
    uniform undirected edge plus uniform orientation on loop-free graphs),
    a split position i uniform in [0, k), then walks i steps from the arc
    source and k - 1 - i steps from the arc target.
    """
    if k < 1:
        raise ValueError("path length must be >= 1; hop 0 is handled exactly upstream")
    if count < 0:
        raise ValueError("count must be >= 0")
    arcs = rng.integers(graph.arc_total, size=count)
    split = rng.integers(k, size=count)
    u = walk_from_batch(graph, graph.arc_sources[arcs], split, rng)
    v = walk_from_batch(graph, graph.neighbors[arcs], k - 1 - split, rng)
    return u, v


def sample_edge_k(graph: Graph, k: int, rng: np.random.Generator) -> SampledPathEndpoints:
    """Single draw of :func:`sample_edge_batch`."""
    u, v = sample_edge_batch(graph, k, 1, rng)
    return SampledPathEndpoints(int(u[0]), int(v[0]), k)
