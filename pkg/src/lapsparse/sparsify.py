"""Sparse Monte-Carlo approximations of polynomial graph filters.

Target operator: F(w) = sum_{k=0}^{K} w_k P^k with P = D^{-1/2} A D^{-1/2}.
All three builders share the same estimator: a sampled length-k path with
endpoints (u, v) contributes weight proportional to d_u^{-1/2} d_v^{-1/2}
times the inverse of its draw probability, so every stored entry is an
unbiased one-draw estimate of the corresponding entry of F(w).  Hop 0 is
never sampled; its diagonal goes in exactly.

Three regimes:

``sparsify_static``
    One total budget M, split across hops by a categorical draw with
    Pr{k} proportional to |w_k|.  Signed coefficients enter through their
    sign at accumulation time.  Output is the collapsed operator.

``sparsify_per_hop``
    M draws for every hop k = 1..K, stored as separate per-hop parts
    without any coefficient factor, so a caller owning trainable
    coefficients can reweight hops (see :func:`collapse`) without
    resampling; gradients with respect to the coefficients stay exact.

``sparsify_nodewise``
    Walks started only from a node subset, estimating just those rows of
    F(w); rows outside the subset are exactly absent.

Duplicate draws accumulate by hash on the (u, v) key and finalize into a
COO triple sorted by (row, col).  Entries are stored exactly as drawn
(directed); pass ``symmetrize=True`` to average each entry with its
transpose as a variance reduction (this can raise the entry count above
the M + n bound that holds for as-drawn storage).
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .graphs import Graph
from .sampling import philox_stream, sample_edge_batch, walk_from_batch

__all__ = [
    "MODES",
    "SamplerConfig",
    "SparseOperator",
    "as_coeffs",
    "sparsify_static",
    "sparsify_per_hop",
    "sparsify_nodewise",
    "collapse",
    "write_operator",
    "read_operator",
]

MODES = ("static", "learnable", "nodewise")


def as_coeffs(w) -> np.ndarray:
    """Validate a filter coefficient vector w_0..w_K.

    Coefficients may be negative; they must be finite, non-empty, and not
    all zero.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("coefficients must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("coefficients must be finite")
    if not np.any(w != 0.0):
        raise ValueError("coefficients must not be all zero")
    return w


@dataclass(frozen=True)
class SamplerConfig:
    """Shared sampling knobs.

    ``samples`` is the explicit draw budget: the total across hops in
    static mode, and the per-hop count in learnable and node-wise modes.
    ``ec`` instead derives the same quantity as ceil(ec * n * ln n), the
    usual edge-count scaling for spectral sparsifiers.  Exactly one of the
    two may be set; leaving both unset is allowed only for runs that never
    sample (pure hop-0 filters).
    """

    mode: str = "static"
    samples: int | None = None
    ec: float | None = None
    seed: int = 0
    workers: int = 1
    symmetrize: bool = False
    start_nodes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.samples is not None and self.ec is not None:
            raise ValueError("give either an explicit sample budget or ec, not both")
        if self.samples is not None and self.samples < 1:
            raise ValueError("sample budget must be >= 1")
        if self.ec is not None and not self.ec > 0:
            raise ValueError("ec must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.mode == "nodewise":
            if self.start_nodes is None or len(self.start_nodes) == 0:
                raise ValueError("nodewise mode needs a non-empty start_nodes set")
        elif self.start_nodes is not None:
            raise ValueError("start_nodes is only meaningful in nodewise mode")

    def resolve_draws(self, n: int) -> int:
        """Draw budget for an n-node graph (total or per-hop by mode)."""
        if self.samples is not None:
            return int(self.samples)
        if self.ec is not None:
            return max(1, math.ceil(self.ec * n * math.log(n)))
        raise ValueError("no sample budget configured (set samples or ec)")


@dataclass(eq=False)
class SparseOperator:
    """Accumulated sampled operator in sorted COO form.

    ``rows``/``cols``/``weights`` hold deduplicated entries sorted by
    (row, col).  A hop-partitioned operator (learnable regime) instead
    carries its parts in ``hops`` and keeps the top-level triple empty
    until :func:`collapse` folds the parts with concrete coefficients.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)
    hops: tuple["SparseOperator", ...] | None = None

    @property
    def nnz(self) -> int:
        if self.hops is not None:
            return sum(part.nnz for part in self.hops)
        return int(self.weights.shape[0])

    def to_dense(self) -> np.ndarray:
        if self.hops is not None:
            raise ValueError("hop-partitioned operator: collapse it or densify a part")
        dense = np.zeros((self.n, self.n))
        dense[self.rows, self.cols] = self.weights
        return dense

    def symmetrized(self) -> "SparseOperator":
        """Average every entry with its transpose (union of supports)."""
        if self.hops is not None:
            raise ValueError("collapse before symmetrizing")
        rows = np.concatenate([self.rows, self.cols])
        cols = np.concatenate([self.cols, self.rows])
        weights = np.concatenate([self.weights, self.weights]) * 0.5
        r, c, w = _accumulate(self.n, rows, cols, weights)
        return SparseOperator(self.n, r, c, w, dict(self.meta, symmetrized=True), None)


def _accumulate(n, rows, cols, weights):
    """Merge duplicate (row, col) keys; return COO sorted by (row, col)."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if rows.size == 0:
        return rows, cols, weights
    keys = rows * np.int64(n) + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    summed = np.bincount(inverse, weights=weights, minlength=uniq.size)
    return uniq // n, uniq % n, summed


def _chunk_sizes(total: int, workers: int) -> list[int]:
    """Split ``total`` draws over workers; empty chunks are dropped."""
    workers = min(workers, total) if total else 0
    sizes = []
    for w in range(workers):
        size = total // workers + (1 if w < total % workers else 0)
        if size:
            sizes.append(size)
    return sizes


def _run_chunks(jobs, workers):
    """Evaluate chunk thunks, in parallel if asked, merging in index order."""
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: job(), jobs))
    return [job() for job in jobs]


def _base_meta(graph: Graph, cfg: SamplerConfig, max_hop: int, draws: int, draws_total: int) -> dict:
    return {
        "version": __version__,
        "mode": cfg.mode,
        "n": graph.n,
        "m": graph.m,
        "max_hop": max_hop,
        "draws": draws,
        "draws_total": draws_total,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "symmetrize": cfg.symmetrize,
        "ec": cfg.ec,
    }


def _require_mode(cfg: SamplerConfig, expected: str):
    if cfg.mode != expected:
        raise ValueError(f"config mode is {cfg.mode!r}, expected {expected!r}")


def _identity_part(n: int, weight: float, meta: dict) -> SparseOperator:
    idx = np.arange(n, dtype=np.int64)
    return SparseOperator(n, idx, idx, np.full(n, weight), meta, None)


def sparsify_static(graph: Graph, coeffs, cfg: SamplerConfig) -> SparseOperator:
    """Collapsed sparse estimate of sum_k w_k P^k under one total budget.

    The hop-0 term w_0 I goes in exactly.  Each of the M draws picks hop k
    with probability |w_k| / ||w_{1..K}||_1, samples one length-k path, and
    deposits sign(w_k) * ||w_{1..K}||_1 * d_u^{-1/2} d_v^{-1/2} *
    sum(degrees) / M on the drawn (u, v).  The expectation over draws
    equals the target filter; at most M + n entries are stored.
    """
    _require_mode(cfg, "static")
    w = as_coeffs(coeffs)
    max_hop = w.size - 1
    tail = np.abs(w[1:])
    l1_tail = float(tail.sum())

    draws_total = 0
    if max_hop >= 1:
        if l1_tail == 0.0:
            warnings.warn(
                "all hop >= 1 coefficients are zero; returning the exact diagonal only",
                RuntimeWarning,
            )
        else:
            draws_total = cfg.resolve_draws(graph.n)

    rows_acc, cols_acc, w_acc = [], [], []
    if w[0] != 0.0:
        idx = np.arange(graph.n, dtype=np.int64)
        rows_acc.append(idx)
        cols_acc.append(idx)
        w_acc.append(np.full(graph.n, w[0]))

    if draws_total:
        support = [k for k in range(1, max_hop + 1) if tail[k - 1] > 0.0]
        probs = tail[np.array(support) - 1] / l1_tail
        inv = graph.inv_sqrt_degrees
        scale = l1_tail * graph.arc_total / draws_total

        def make_job(worker_idx, size):
            def job():
                stream = philox_stream(cfg.seed, worker_idx)
                hops = stream.choice(np.array(support), size=size, p=probs)
                out_r, out_c, out_w = [], [], []
                for k in support:
                    count = int(np.count_nonzero(hops == k))
                    if count == 0:
                        continue
                    u, v = sample_edge_batch(graph, k, count, stream)
                    out_r.append(u)
                    out_c.append(v)
                    out_w.append(np.sign(w[k]) * scale * inv[u] * inv[v])
                return out_r, out_c, out_w

            return job

        jobs = [make_job(i, size) for i, size in enumerate(_chunk_sizes(draws_total, cfg.workers))]
        for out_r, out_c, out_w in _run_chunks(jobs, cfg.workers):
            rows_acc.extend(out_r)
            cols_acc.extend(out_c)
            w_acc.extend(out_w)

    r, c, wv = _accumulate(
        graph.n,
        np.concatenate(rows_acc) if rows_acc else np.empty(0, np.int64),
        np.concatenate(cols_acc) if cols_acc else np.empty(0, np.int64),
        np.concatenate(w_acc) if w_acc else np.empty(0),
    )
    meta = _base_meta(graph, cfg, max_hop, draws_total, draws_total)
    meta["coeffs"] = [float(x) for x in w]
    op = SparseOperator(graph.n, r, c, wv, meta, None)
    return op.symmetrized() if cfg.symmetrize else op


def sparsify_per_hop(graph: Graph, max_hop: int, cfg: SamplerConfig) -> SparseOperator:
    """Hop-partitioned estimate: one exact identity part plus K sampled parts.

    Part k holds M draws of length-k paths weighted d_u^{-1/2} d_v^{-1/2}
    * sum(degrees) / M, so its expectation is P^k with no coefficient
    baked in.  Use :func:`collapse` to fold parts with coefficients.
    """
    _require_mode(cfg, "learnable")
    if max_hop < 0:
        raise ValueError("max_hop must be >= 0")
    per_hop = cfg.resolve_draws(graph.n) if max_hop >= 1 else 0
    inv = graph.inv_sqrt_degrees

    meta = _base_meta(graph, cfg, max_hop, per_hop, per_hop * max_hop)
    parts = [_identity_part(graph.n, 1.0, {"n": graph.n, "hop": 0, "draws": 0})]
    for k in range(1, max_hop + 1):
        scale = graph.arc_total / per_hop

        def make_job(worker_idx, size, k=k):
            def job():
                stream = philox_stream(cfg.seed, k, worker_idx)
                u, v = sample_edge_batch(graph, k, size, stream)
                return u, v, scale * inv[u] * inv[v]

            return job

        jobs = [make_job(i, size) for i, size in enumerate(_chunk_sizes(per_hop, cfg.workers))]
        got = _run_chunks(jobs, cfg.workers)
        r, c, wv = _accumulate(
            graph.n,
            np.concatenate([g[0] for g in got]),
            np.concatenate([g[1] for g in got]),
            np.concatenate([g[2] for g in got]),
        )
        part = SparseOperator(graph.n, r, c, wv, {"n": graph.n, "hop": k, "draws": per_hop}, None)
        parts.append(part.symmetrized() if cfg.symmetrize else part)

    empty = np.empty(0, np.int64)
    return SparseOperator(graph.n, empty, empty, np.empty(0), meta, tuple(parts))


def sparsify_nodewise(graph: Graph, coeffs, cfg: SamplerConfig) -> SparseOperator:
    """Row-restricted estimate of sum_k w_k P^k from a start node subset.

    With s = sum of degrees over the subset, each hop k with w_k != 0
    draws M walk starts u with Pr{u} = d_u / s, walks k steps to v, and
    deposits w_k * d_u^{-1/2} d_v^{-1/2} * s / M on (u, v).  Rows outside
    the subset are exactly absent.
    """
    _require_mode(cfg, "nodewise")
    w = as_coeffs(coeffs)
    max_hop = w.size - 1
    start = np.unique(np.asarray(cfg.start_nodes, dtype=np.int64))
    if start.size == 0:
        raise ValueError("empty start node set")
    if start.min() < 0 or start.max() >= graph.n:
        raise ValueError("start node out of range")
    if cfg.symmetrize:
        raise ValueError("symmetrize is not defined for a row-restricted operator")

    s_total = float(graph.degrees[start].sum())
    start_probs = graph.degrees[start] / s_total
    inv = graph.inv_sqrt_degrees
    active = [k for k in range(1, max_hop + 1) if w[k] != 0.0]
    per_hop = cfg.resolve_draws(graph.n) if active else 0

    rows_acc, cols_acc, w_acc = [], [], []
    if w[0] != 0.0:
        rows_acc.append(start)
        cols_acc.append(start)
        w_acc.append(np.full(start.size, w[0]))

    for k in active:
        scale = w[k] * s_total / per_hop

        def make_job(worker_idx, size, k=k):
            def job():
                stream = philox_stream(cfg.seed, k, worker_idx)
                u = stream.choice(start, size=size, p=start_probs)
                v = walk_from_batch(graph, u, np.full(size, k, np.int64), stream)
                return u, v, scale * inv[u] * inv[v]

            return job

        jobs = [make_job(i, size) for i, size in enumerate(_chunk_sizes(per_hop, cfg.workers))]
        for u, v, wv in _run_chunks(jobs, cfg.workers):
            rows_acc.append(u)
            cols_acc.append(v)
            w_acc.append(wv)

    r, c, wv = _accumulate(
        graph.n,
        np.concatenate(rows_acc) if rows_acc else np.empty(0, np.int64),
        np.concatenate(cols_acc) if cols_acc else np.empty(0, np.int64),
        np.concatenate(w_acc) if w_acc else np.empty(0),
    )
    meta = _base_meta(graph, cfg, max_hop, per_hop, per_hop * len(active))
    meta["coeffs"] = [float(x) for x in w]
    meta["start_nodes"] = [int(x) for x in start]
    return SparseOperator(graph.n, r, c, wv, meta, None)


def collapse(op: SparseOperator, coeffs) -> SparseOperator:
    """Fold a hop-partitioned operator with concrete coefficients.

    Returns the entry-level accumulation of sum_k w_k * part_k as a plain
    collapsed operator.  Requires exactly one coefficient per part.
    """
    if op.hops is None:
        raise ValueError("operator has no hop partition to collapse")
    w = np.asarray(coeffs, dtype=np.float64)
    if w.ndim != 1 or w.size != len(op.hops):
        raise ValueError(f"need {len(op.hops)} coefficients (one per hop part), got {w.size}")
    if not np.all(np.isfinite(w)):
        raise ValueError("coefficients must be finite")
    rows = np.concatenate([part.rows for part in op.hops])
    cols = np.concatenate([part.cols for part in op.hops])
    weights = np.concatenate([w[k] * part.weights for k, part in enumerate(op.hops)])
    r, c, wv = _accumulate(op.n, rows, cols, weights)
    meta = dict(op.meta)
    meta["coeffs"] = [float(x) for x in w]
    meta["collapsed"] = True
    return SparseOperator(op.n, r, c, wv, meta, None)


# ---------------------------------------------------------------------------
# serialization: TSV "u v weight" per (part of an) operator + JSON sidecar
# ---------------------------------------------------------------------------


def _write_tsv(path, op: SparseOperator) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v, wv in zip(op.rows.tolist(), op.cols.tolist(), op.weights.tolist()):
            fh.write(f"{u}\t{v}\t{wv!r}\n")


def _read_tsv(path, n: int, meta: dict) -> SparseOperator:
    rows, cols, weights = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 3:
                raise ValueError(f"{path} line {line_no}: expected 'u v weight'")
            rows.append(int(tokens[0]))
            cols.append(int(tokens[1]))
            weights.append(float(tokens[2]))
    return SparseOperator(
        n,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(weights, dtype=np.float64),
        meta,
        None,
    )


def write_operator(op: SparseOperator, path) -> list[str]:
    """Write an operator (or its hop parts) plus a JSON meta sidecar.

    A collapsed operator goes to ``path`` itself; a hop-partitioned one
    writes ``path.hopK`` per part.  The sidecar lands at
    ``path + ".meta.json"``.  Weights are written as shortest round-trip
    decimals.  Returns the list of written file paths.
    """
    path = str(path)
    sidecar = path + ".meta.json"
    written = []
    doc = {"meta": op.meta, "nnz": op.nnz}
    if op.hops is not None:
        doc["hop_files"] = []
        for k, part in enumerate(op.hops):
            part_path = f"{path}.hop{k}"
            _write_tsv(part_path, part)
            written.append(part_path)
            doc["hop_files"].append({"hop": k, "file": part_path, "draws": part.meta.get("draws", 0)})
    else:
        _write_tsv(path, op)
        written.append(path)
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(sidecar)
    return written


def read_operator(path) -> SparseOperator:
    """Inverse of :func:`write_operator` (reads the sidecar to find parts)."""
    path = str(path)
    with open(path + ".meta.json", "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    meta = doc["meta"]
    n = int(meta["n"])
    if "hop_files" in doc:
        parts = tuple(
            _read_tsv(entry["file"], n, {"n": n, "hop": entry["hop"], "draws": entry["draws"]})
            for entry in doc["hop_files"]
        )
        empty = np.empty(0, np.int64)
        return SparseOperator(n, empty, empty, np.empty(0), meta, parts)
    return _read_tsv(path, n, meta)
