"""Exact dense references and statistical verification of sampled operators.

Everything here is deliberately simple and allocation-heavy: dense matrix
powers against which the Monte-Carlo estimators are judged.  A hard node
limit keeps accidental O(n^2) blowups out of large-graph runs.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph
from .sparsify import (
    SamplerConfig,
    SparseOperator,
    as_coeffs,
    sparsify_nodewise,
    sparsify_per_hop,
    sparsify_static,
)

__all__ = [
    "DENSE_LIMIT",
    "dense_adjacency",
    "dense_rw_poly",
    "dense_poly",
    "UnbiasednessReport",
    "zscore_table",
    "unbiasedness_test",
    "SimilarityReport",
    "similarity_check",
    "write_diff_tsv",
]

DENSE_LIMIT = 5000


def _check_dense_limit(n: int, limit: int):
    if n > limit:
        raise ValueError(f"graph has {n} nodes, above the dense oracle limit {limit}")


def dense_adjacency(graph: Graph, limit: int = DENSE_LIMIT) -> np.ndarray:
    _check_dense_limit(graph.n, limit)
    a = np.zeros((graph.n, graph.n))
    a[graph.arc_sources, graph.neighbors] = 1.0
    return a


def dense_rw_poly(graph: Graph, k: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Exact D (D^-1 A)^k by repeated dense multiplication.

    Row u sums to d_u for every k, and the total mass equals the arc
    count; both identities are pinned in tests.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _check_dense_limit(graph.n, limit)
    a = dense_adjacency(graph, limit)
    step = a / graph.degrees[:, None].astype(np.float64)
    out = np.eye(graph.n)
    for _ in range(k):
        out = out @ step
    return graph.degrees[:, None] * out


def dense_poly(graph: Graph, coeffs, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Exact sum_k w_k P^k with P = D^{-1/2} A D^{-1/2}."""
    w = np.asarray(coeffs, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("coefficients must be a non-empty 1-D vector")
    _check_dense_limit(graph.n, limit)
    inv = graph.inv_sqrt_degrees
    p = inv[:, None] * dense_adjacency(graph, limit) * inv[None, :]
    out = w[0] * np.eye(graph.n)
    power = np.eye(graph.n)
    for k in range(1, w.size):
        power = power @ p
        if w[k] != 0.0:
            out = out + w[k] * power
    return out


# ---------------------------------------------------------------------------
# unbiasedness: entrywise z-scores of the trial mean against the exact value
# ---------------------------------------------------------------------------


@dataclass
class UnbiasednessReport:
    """Entrywise comparison of a Monte-Carlo mean against an exact table.

    ``z`` holds (mean - exact) / (std / sqrt(T)) per entry, with 0 where
    the trials never varied and agreed exactly.  ``deterministic_bias``
    marks the fatal case: zero variance with a nonzero discrepancy, which
    no amount of sampling noise can explain.
    """

    trials: int
    z: np.ndarray
    mean: np.ndarray
    exact: np.ndarray
    flagged: list = field(default_factory=list)
    within_3sigma: float = 1.0
    deterministic_bias: bool = False

    def summary(self) -> dict:
        return {
            "trials": self.trials,
            "within_3sigma": self.within_3sigma,
            "flagged": [[int(i), int(j), float(z)] for i, j, z in self.flagged],
            "deterministic_bias": self.deterministic_bias,
            "max_abs_z": float(np.max(np.abs(self.z))) if self.z.size else 0.0,
        }


def zscore_table(samples: np.ndarray, exact: np.ndarray, flag_at: float = 4.0) -> UnbiasednessReport:
    """Score stacked trial tables (T, ...) against the exact table."""
    samples = np.asarray(samples, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if samples.ndim < 2 or samples.shape[1:] != exact.shape:
        raise ValueError("samples must stack trials of exact's shape on axis 0")
    trials = samples.shape[0]
    if trials < 2:
        raise ValueError("need at least 2 trials")
    mean = samples.mean(axis=0)
    std = samples.std(axis=0, ddof=1)
    diff = mean - exact
    # the ddof-1 std of T identical floats can come out ~1e-18 rather than
    # exactly 0, so "never varied" has to be a relative test
    scale = np.maximum(np.maximum(np.abs(mean), np.abs(exact)), 1.0)
    frozen = std <= 1e-12 * scale
    bias = frozen & (np.abs(diff) > 1e-9 * scale)
    z = np.zeros_like(diff)
    live = ~frozen
    z[live] = diff[live] / (std[live] / np.sqrt(trials))
    flagged = [
        (int(idx[0]), int(idx[-1]), float(z[idx]))
        for idx in zip(*np.nonzero(np.abs(z) > flag_at))
    ]
    within = float(np.count_nonzero(np.abs(z) <= 3.0) / z.size) if z.size else 1.0
    return UnbiasednessReport(
        trials=trials,
        z=z,
        mean=mean,
        exact=exact,
        flagged=flagged,
        within_3sigma=within,
        deterministic_bias=bool(bias.any()),
    )


def unbiasedness_test(
    graph: Graph,
    regime: str,
    *,
    coeffs=None,
    max_hop: int | None = None,
    start_nodes=None,
    samples: int = 1000,
    trials: int = 100,
    seed: int = 0,
    workers: int = 1,
    node_limit: int = 50,
) -> UnbiasednessReport:
    """Repeat a sparsifier under independent seeds and z-score the mean.

    Regimes mirror the builders: ``static`` scores the collapsed operator
    against the exact filter, ``learnable`` scores every hop part against
    its exact P^k, and ``nodewise`` scores just the sampled rows.  Kept to
    small graphs on purpose; the tables are dense.
    """
    if graph.n > node_limit:
        raise ValueError(f"unbiasedness test is dense; n={graph.n} exceeds limit {node_limit}")
    if trials < 30:
        raise ValueError("need at least 30 trials for a meaningful z-score")

    def build(trial_seed: int) -> np.ndarray:
        if regime == "static":
            cfg = SamplerConfig(mode="static", samples=samples, seed=trial_seed)
            return sparsify_static(graph, coeffs, cfg).to_dense()
        if regime == "learnable":
            cfg = SamplerConfig(mode="learnable", samples=samples, seed=trial_seed)
            op = sparsify_per_hop(graph, max_hop, cfg)
            return np.stack([part.to_dense() for part in op.hops])
        if regime == "nodewise":
            start = tuple(int(x) for x in np.unique(np.asarray(start_nodes)))
            cfg = SamplerConfig(mode="nodewise", samples=samples, seed=trial_seed, start_nodes=start)
            op = sparsify_nodewise(graph, coeffs, cfg)
            outside = ~np.isin(op.rows, np.asarray(start))
            if outside.any():
                raise AssertionError("nodewise operator produced rows outside the start set")
            return op.to_dense()[np.asarray(start), :]
        raise ValueError(f"unknown regime {regime!r}")

    if regime == "static":
        exact = dense_poly(graph, as_coeffs(coeffs))
    elif regime == "learnable":
        if max_hop is None or max_hop < 0:
            raise ValueError("learnable regime needs max_hop >= 0")
        inv = graph.inv_sqrt_degrees
        # hop 0 is exactly the identity; computing it as inv * D * inv would
        # leave ~1e-16 residue against the sampler's exact identity part
        exact = np.stack(
            [
                np.eye(graph.n)
                if k == 0
                else inv[:, None] * dense_rw_poly(graph, k) * inv[None, :]
                for k in range(max_hop + 1)
            ]
        )
    elif regime == "nodewise":
        if start_nodes is None or len(start_nodes) == 0:
            raise ValueError("nodewise regime needs start nodes")
        rows = np.unique(np.asarray(start_nodes, dtype=np.int64))
        exact = dense_poly(graph, as_coeffs(coeffs))[rows, :]
    else:
        raise ValueError(f"unknown regime {regime!r}")

    trial_seeds = [seed + t for t in range(trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tables = list(pool.map(build, trial_seeds))
    else:
        tables = [build(s) for s in trial_seeds]
    return zscore_table(np.stack(tables), exact)


# ---------------------------------------------------------------------------
# similarity: norm errors, quadratic-form probes, spectral bounds
# ---------------------------------------------------------------------------


@dataclass
class SimilarityReport:
    """How close a (densified) approximation sits to an exact operator.

    ``quad_ratios`` collects x^T approx x / x^T exact x over random unit
    probes, skipping probes whose exact quadratic form is numerically
    zero.  When both operators are symmetric PSD and small enough, the
    generalized spectrum of (approx, exact) on exact's range gives
    ``eig_bounds`` and the similarity radius ``epsilon_hat`` =
    max(|1 - min|, |max - 1|); otherwise those stay None and ``flags``
    says why.  For signed coefficient filters the spectral reading is
    heuristic, which is flagged rather than hidden.
    """

    frob_rel_err: float
    max_abs_err: float
    quad_ratios: list[float] = field(default_factory=list)
    eig_bounds: tuple[float, float] | None = None
    epsilon_hat: float | None = None
    probes_rejected: int = 0
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "frob_rel_err": self.frob_rel_err,
            "max_abs_err": self.max_abs_err,
            "quad_ratios": self.quad_ratios,
            "eig_bounds": list(self.eig_bounds) if self.eig_bounds else None,
            "epsilon_hat": self.epsilon_hat,
            "probes_rejected": self.probes_rejected,
            "flags": self.flags,
        }


def _as_dense(op) -> np.ndarray:
    if isinstance(op, SparseOperator):
        return op.to_dense()
    return np.asarray(op, dtype=np.float64)


def similarity_check(
    exact,
    approx,
    probes: int = 64,
    *,
    seed: int = 0,
    eig_limit: int = 500,
    probe_floor: float = 1e-9,
    signed_coeffs: bool = False,
) -> SimilarityReport:
    """Compare an approximation against its exact dense counterpart."""
    exact = _as_dense(exact)
    approx = _as_dense(approx)
    if exact.shape != approx.shape or exact.ndim != 2 or exact.shape[0] != exact.shape[1]:
        raise ValueError("exact and approx must be square matrices of equal shape")
    n = exact.shape[0]
    flags: list[str] = []
    if signed_coeffs:
        flags.append("signed-coefficients: spectral similarity is heuristic")

    diff = approx - exact
    exact_norm = float(np.linalg.norm(exact))
    if exact_norm == 0.0:
        frob_rel = float(np.linalg.norm(diff))
        flags.append("exact operator is zero: frob_rel_err holds the absolute norm")
    else:
        frob_rel = float(np.linalg.norm(diff) / exact_norm)
    max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0

    rng = np.random.default_rng(seed)
    ratios: list[float] = []
    rejected = 0
    attempts = 0
    while len(ratios) < probes and attempts < probes * 50:
        attempts += 1
        x = rng.standard_normal(n)
        norm2 = float(x @ x)
        q_exact = float(x @ exact @ x)
        if abs(q_exact) < probe_floor * norm2:
            rejected += 1
            continue
        ratios.append(float(x @ approx @ x) / q_exact)
    if len(ratios) < probes:
        flags.append("probe budget exhausted: exact quadratic form is numerically zero")

    eig_bounds = None
    eps_hat = None
    sym_exact = np.allclose(exact, exact.T, atol=1e-10)
    sym_approx = (approx + approx.T) * 0.5
    if not np.allclose(approx, approx.T, atol=1e-10):
        flags.append("approx not symmetric: spectral path uses its symmetric part")
    if n > eig_limit:
        flags.append(f"n={n} above spectral limit {eig_limit}: eig bounds skipped")
    elif not sym_exact:
        flags.append("exact operator not symmetric: eig bounds skipped")
    else:
        evals, evecs = np.linalg.eigh(exact)
        scale = float(np.max(np.abs(evals))) if evals.size else 0.0
        if scale == 0.0 or evals.min() < -1e-8 * scale:
            flags.append("exact operator indefinite or zero: eig bounds skipped")
        else:
            keep = evals > 1e-12 * scale
            if not keep.all():
                flags.append("exact operator singular: bounds taken on its range")
            basis = evecs[:, keep] / np.sqrt(evals[keep])
            reduced = basis.T @ sym_approx @ basis
            gen = np.linalg.eigvalsh(reduced)
            eig_bounds = (float(gen.min()), float(gen.max()))
            eps_hat = float(max(abs(1.0 - eig_bounds[0]), abs(eig_bounds[1] - 1.0)))

    return SimilarityReport(
        frob_rel_err=frob_rel,
        max_abs_err=max_abs,
        quad_ratios=ratios,
        eig_bounds=eig_bounds,
        epsilon_hat=eps_hat,
        probes_rejected=rejected,
        flags=flags,
    )


def write_diff_tsv(path, exact_tail: np.ndarray, approx_tail: np.ndarray, clip: float = 0.5) -> None:
    """Emit the entrywise difference grid as TSV 'u v diff'.

    Callers pass hop-0-free tails (the exact diagonal term is shared by
    construction and would only wash out the picture).  Values are clipped
    to [-clip, clip] to match a fixed display range.
    """
    exact_tail = np.asarray(exact_tail, dtype=np.float64)
    approx_tail = np.asarray(approx_tail, dtype=np.float64)
    if exact_tail.shape != approx_tail.shape:
        raise ValueError("shape mismatch")
    diff = np.clip(approx_tail - exact_tail, -clip, clip)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("u\tv\tdiff\n")
        n_rows = diff.shape[0]
        for u in range(n_rows):
            for v, val in enumerate(diff[u].tolist()):
                fh.write(f"{u}\t{v}\t{val!r}\n")
