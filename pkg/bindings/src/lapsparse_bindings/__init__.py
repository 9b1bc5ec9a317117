"""Array hand-off for sampled sparse filter operators.

GNN stacks consume edge sets as index and weight arrays, not as files.
This package wraps the lapsparse samplers behind a single call returning
the sampled operator's arrays directly, with the TSV round trip skipped.
It adds no sampling logic and no locking of its own; budgets, modes, and
parallel workers behave exactly as in the core, and core validation
errors surface unchanged.
"""

from dataclasses import dataclass

import numpy as np

import lapsparse as _core

__version__ = "0.1.0"

__all__ = ["EdgeArrays", "sparsify", "__version__"]


@dataclass(frozen=True)
class EdgeArrays:
    """COO view of a sampled operator.

    `src`, `dst`, and `weight` align entry for entry.  In the learnable
    regime `hop` labels the hop part each entry belongs to; otherwise it
    is None.  For collapsed operators the arrays are the sampler's own
    buffers (no copy); the flattened learnable regime concatenates the
    per-hop parts, which is the one copy made at this boundary.  Treat
    the arrays as read-only either way.
    """

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    hop: np.ndarray | None = None

    def __post_init__(self):
        if not (len(self.src) == len(self.dst) == len(self.weight)):
            raise ValueError("src, dst, weight must have equal lengths")
        if self.hop is not None and len(self.hop) != len(self.src):
            raise ValueError("hop must align with src")

    def __len__(self) -> int:
        return len(self.src)


def sparsify(edges, n, mode="static", coeffs=None, *, samples=None, ec=None,
             seed=0, workers=1, max_hop=None, start_set=None,
             symmetrize=False) -> EdgeArrays:
    """Sample a sparse filter operator for `edges` and return its arrays.

    `edges` is an integer pair array over node ids below `n`; the graph
    is symmetrized and deduplicated the same way the CLI loads an edge
    list, so a fixed (edges, config, seed) with one worker reproduces
    the CLI's TSV content exactly.

    Static and nodewise modes take `coeffs` and return the collapsed
    operator.  Learnable mode takes `max_hop` and returns all hop parts
    flattened, labeled by `hop` (hop 0 is the exact identity).  Budgets,
    preconditions, and error messages are the core's own.
    """
    graph = _core.from_edge_pairs(np.asarray(edges, dtype=np.int64), n=n)
    cfg = _core.SamplerConfig(
        mode=mode, samples=samples, ec=ec, seed=seed, workers=workers,
        symmetrize=symmetrize,
        start_nodes=None if start_set is None else tuple(int(u) for u in start_set),
    )
    if mode == "learnable":
        if max_hop is None:
            raise ValueError("learnable mode needs max_hop")
        parts = _core.sparsify_per_hop(graph, max_hop, cfg).hops
        return EdgeArrays(
            src=np.concatenate([p.rows for p in parts]),
            dst=np.concatenate([p.cols for p in parts]),
            weight=np.concatenate([p.weights for p in parts]),
            hop=np.concatenate(
                [np.full(p.rows.size, p.meta["hop"], dtype=np.int64) for p in parts]
            ),
        )
    if mode == "nodewise":
        op = _core.sparsify_nodewise(graph, coeffs, cfg)
    else:
        op = _core.sparsify_static(graph, coeffs, cfg)
    return EdgeArrays(src=op.rows, dst=op.cols, weight=op.weights)
