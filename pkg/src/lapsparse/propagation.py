"""Signal propagation through exact and sampled filters, and loss checks.

Signals are (n,) vectors or (n, F) matrices.  The exact propagation path
never materializes a matrix power: it applies P = D^{-1/2} A D^{-1/2} one
round at a time through the CSR arcs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph
from .sparsify import SamplerConfig, SparseOperator, as_coeffs, sparsify_static

__all__ = [
    "normalized_adjacency_matvec",
    "spmv",
    "appnp_coeffs",
    "propagate_exact",
    "appnp_loss",
    "solve_appnp",
    "LossReport",
    "loss_error_experiment",
    "write_signal",
    "read_signal",
]


def _as_signal(x, n: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != n:
            raise ValueError(f"signal length {x.shape[0]} != n={n}")
        return x[:, None], True
    if x.ndim == 2:
        if x.shape[0] != n:
            raise ValueError(f"signal has {x.shape[0]} rows, expected n={n}")
        return x, False
    raise ValueError("signal must be 1-D or 2-D")


def normalized_adjacency_matvec(graph: Graph, x) -> np.ndarray:
    """y = P x through the CSR arcs, one bincount per channel."""
    x2, squeeze = _as_signal(x, graph.n)
    src = graph.arc_sources
    dst = graph.neighbors
    aw = graph.arc_norm_weights
    out = np.empty_like(x2)
    for f in range(x2.shape[1]):
        out[:, f] = np.bincount(src, weights=aw * x2[dst, f], minlength=graph.n)
    return out[:, 0] if squeeze else out


def spmv(op: SparseOperator, x) -> np.ndarray:
    """y[u] = sum over stored entries (u, v) of weight * x[v].

    Deterministic accumulation order (entries are sorted); refuses
    hop-partitioned operators, which have no single set of entries until
    collapsed.
    """
    if op.hops is not None:
        raise ValueError("hop-partitioned operator: collapse before spmv")
    x2, squeeze = _as_signal(x, op.n)
    out = np.zeros_like(x2)
    for f in range(x2.shape[1]):
        out[:, f] = np.bincount(op.rows, weights=op.weights * x2[op.cols, f], minlength=op.n)
    return out[:, 0] if squeeze else out


def appnp_coeffs(alpha: float, max_hop: int) -> np.ndarray:
    """Personalized-PageRank filter weights for a K-round propagation.

    w_k = alpha (1 - alpha)^k for k < K and w_K = (1 - alpha)^K, which
    telescopes to sum 1 and keeps every weight non-negative.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if max_hop < 0 or int(max_hop) != max_hop:
        raise ValueError("max_hop must be a non-negative integer")
    max_hop = int(max_hop)
    w = np.array([alpha * (1.0 - alpha) ** k for k in range(max_hop + 1)])
    w[max_hop] = (1.0 - alpha) ** max_hop
    return w


def propagate_exact(graph: Graph, coeffs, x) -> np.ndarray:
    """sum_k w_k P^k x by K rounds of sparse matvec."""
    w = as_coeffs(coeffs)
    x2, squeeze = _as_signal(x, graph.n)
    acc = w[0] * x2
    cur = x2
    for k in range(1, w.size):
        cur = normalized_adjacency_matvec(graph, cur)
        if w[k] != 0.0:
            acc = acc + w[k] * cur
    return acc[:, 0] if squeeze else acc


def appnp_loss(graph: Graph, z, x, alpha: float) -> float:
    """(1 - alpha) Tr(z^T (I - P) z) + alpha ||z - x||_F^2.

    The smoothness term is evaluated as the edge sum of squared
    differences of the degree-rescaled signal, which is the same quantity
    but stays non-negative in floating point.  The ``I - P`` here uses the
    graph exactly as loaded, i.e. whatever self-loop policy it was built
    with.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    z2, _ = _as_signal(z, graph.n)
    x2, _ = _as_signal(x, graph.n)
    if z2.shape != x2.shape:
        raise ValueError(f"z and x shapes differ: {z2.shape} vs {x2.shape}")
    src = graph.arc_sources
    dst = graph.neighbors
    once = src < dst  # each non-loop edge once; loops drop out of the sum
    y = z2 * graph.inv_sqrt_degrees[:, None]
    gaps = y[src[once]] - y[dst[once]]
    smooth = float(np.sum(gaps * gaps))
    fit = float(np.sum((z2 - x2) ** 2))
    return (1.0 - alpha) * smooth + alpha * fit


def solve_appnp(
    graph: Graph,
    x,
    alpha: float,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> np.ndarray:
    """Fixed point of the propagation recursion: (I - (1-alpha) P) z = alpha x.

    The system matrix is symmetric positive definite for alpha in (0, 1]
    (its spectrum sits in [alpha, 2 - alpha]), so plain conjugate
    gradients converge quickly; iteration stops when every column's
    residual drops below tol times its right-hand side norm.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    x2, squeeze = _as_signal(x, graph.n)
    b = alpha * x2

    def apply(v):
        return v - (1.0 - alpha) * normalized_adjacency_matvec(graph, v)

    z = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = np.sum(r * r, axis=0)
    b_norm = np.sqrt(np.sum(b * b, axis=0))
    target = tol * np.where(b_norm > 0.0, b_norm, 1.0)
    if max_iter is None:
        max_iter = 10 * graph.n + 100
    for _ in range(max_iter):
        if np.all(np.sqrt(rs) <= target):
            break
        ap = apply(p)
        denom = np.sum(p * ap, axis=0)
        step = np.where(denom > 0.0, rs / np.where(denom > 0.0, denom, 1.0), 0.0)
        z = z + step * p
        r = r - step * ap
        rs_new = np.sum(r * r, axis=0)
        beta = np.where(rs > 0.0, rs_new / np.where(rs > 0.0, rs, 1.0), 0.0)
        p = r + beta * p
        rs = rs_new
    else:
        raise RuntimeError(f"conjugate gradients did not reach tol={tol} in {max_iter} iterations")
    return z[:, 0] if squeeze else z


@dataclass
class LossReport:
    """Losses of the exact K-round propagation vs its sparsified twin."""

    alpha: float
    max_hop: int
    draws: int
    loss_exact: float
    loss_approx: float
    rel_err: float
    rel_err_is_absolute: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "max_hop": self.max_hop,
            "draws": self.draws,
            "loss_exact": self.loss_exact,
            "loss_approx": self.loss_approx,
            "rel_err": self.rel_err,
            "rel_err_is_absolute": self.rel_err_is_absolute,
            "meta": self.meta,
        }


def loss_error_experiment(
    graph: Graph, x, alpha: float, max_hop: int, cfg: SamplerConfig
) -> LossReport:
    """Propagate one signal exactly and through a sampled filter; compare losses.

    rel_err = |L(z_exact) - L(z_sampled)| / |L(z_exact)|.  When the exact
    loss is zero the ratio is undefined; the report then carries the
    absolute difference and says so.
    """
    w = appnp_coeffs(alpha, max_hop)
    z_exact = propagate_exact(graph, w, x)
    op = sparsify_static(graph, w, cfg)
    z_approx = spmv(op, x)
    loss_exact = appnp_loss(graph, z_exact, x, alpha)
    loss_approx = appnp_loss(graph, z_approx, x, alpha)
    gap = abs(loss_exact - loss_approx)
    if loss_exact == 0.0:
        rel_err, absolute = gap, True
    else:
        rel_err, absolute = gap / abs(loss_exact), False
    return LossReport(
        alpha=alpha,
        max_hop=max_hop,
        draws=op.meta["draws_total"],
        loss_exact=loss_exact,
        loss_approx=loss_approx,
        rel_err=rel_err,
        rel_err_is_absolute=absolute,
        meta={
            "n": graph.n,
            "m": graph.m,
            "self_loop_count": graph.self_loop_count,
            "seed": cfg.seed,
            "ec": cfg.ec,
        },
    )


def write_signal(path, x) -> None:
    """Write a signal as TSV with header 'node f0 f1 ...'."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("signal must be 1-D or 2-D")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node\t" + "\t".join(f"f{f}" for f in range(x.shape[1])) + "\n")
        for u in range(x.shape[0]):
            fh.write(str(u) + "\t" + "\t".join(repr(float(v)) for v in x[u]) + "\n")


def read_signal(path, n: int | None = None) -> np.ndarray:
    """Read a signal TSV written by :func:`write_signal`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header or header[0] != "node":
            raise ValueError(f"{path}: expected header starting with 'node'")
        width = len(header) - 1
        if width < 1:
            raise ValueError(f"{path}: no feature columns")
        rows: dict[int, list[float]] = {}
        for line_no, line in enumerate(fh, start=2):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != width + 1:
                raise ValueError(f"{path} line {line_no}: expected {width + 1} fields")
            node = int(tokens[0])
            if node in rows:
                raise ValueError(f"{path} line {line_no}: duplicate node {node}")
            rows[node] = [float(t) for t in tokens[1:]]
    if not rows:
        raise ValueError(f"{path}: empty signal")
    count = max(rows) + 1 if n is None else n
    out = np.zeros((count, width))
    seen = np.zeros(count, dtype=bool)
    for node, values in rows.items():
        if not 0 <= node < count:
            raise ValueError(f"{path}: node {node} out of range for n={count}")
        out[node] = values
        seen[node] = True
    if not seen.all():
        missing = np.flatnonzero(~seen)
        raise ValueError(f"{path}: missing rows for node(s) {missing[:5].tolist()}")
    return out
