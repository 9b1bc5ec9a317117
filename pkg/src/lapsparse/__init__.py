"""Sparse random-walk approximations of polynomial graph filters.

The package builds signed, weighted, sparse stand-ins for dense filter
matrices of the form sum_k w_k P^k (P the symmetrically normalized
adjacency) by sampling random-walk paths, and ships the exact oracles and
statistical verifiers needed to hold the samples to account.
"""

from ._version import __version__
from .graphs import (
    Graph,
    ParseError,
    complete_graph,
    degree_sqrt_inv,
    edge_homophily,
    erdos_renyi_graph,
    from_edge_pairs,
    load_graph,
    load_labels,
    path_graph,
    star_graph,
    write_id_map,
)
from .sampling import (
    SampledPathEndpoints,
    philox_stream,
    sample_edge_batch,
    sample_edge_k,
    sample_walk_from,
    walk_from_batch,
)
from .sparsify import (
    MODES,
    SamplerConfig,
    SparseOperator,
    as_coeffs,
    collapse,
    read_operator,
    sparsify_nodewise,
    sparsify_per_hop,
    sparsify_static,
    write_operator,
)
from .oracle import (
    DENSE_LIMIT,
    SimilarityReport,
    UnbiasednessReport,
    dense_adjacency,
    dense_poly,
    dense_rw_poly,
    similarity_check,
    unbiasedness_test,
    write_diff_tsv,
    zscore_table,
)
from .propagation import (
    LossReport,
    appnp_coeffs,
    appnp_loss,
    loss_error_experiment,
    normalized_adjacency_matvec,
    propagate_exact,
    read_signal,
    solve_appnp,
    spmv,
    write_signal,
)

__all__ = [
    "__version__",
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
    "SampledPathEndpoints",
    "philox_stream",
    "walk_from_batch",
    "sample_walk_from",
    "sample_edge_batch",
    "sample_edge_k",
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
