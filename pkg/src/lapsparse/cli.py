"""Command line front end.

Subcommands: sparsify, verify, appnp-check, bench, homophily.  Exit codes:
0 success, 1 usage error, 2 I/O or input-data error, 3 verification
failure.  Every run that writes files also writes a JSON run manifest
holding the fully resolved parameters, so any output can be reproduced
byte for byte by replaying the manifest (see :func:`manifest_to_argv`).
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import time

import numpy as np

from ._version import __version__
from .graphs import ParseError, edge_homophily, load_graph, load_labels, write_id_map
from .oracle import (
    DENSE_LIMIT,
    dense_poly,
    similarity_check,
    unbiasedness_test,
    write_diff_tsv,
)
from .propagation import (
    appnp_coeffs,
    loss_error_experiment,
    read_signal,
    spmv,
)
from .sparsify import (
    SamplerConfig,
    sparsify_nodewise,
    sparsify_per_hop,
    sparsify_static,
    write_operator,
)

__all__ = ["main", "manifest_to_argv"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VERIFY = 3


class _UsageError(Exception):
    pass


class _DataError(Exception):
    """Input files exist but their content is unusable."""


class _VerifyFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lapsparse", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, output_required=True):
        p.add_argument("--input", required=True, help="edge-list file, one 'u v' pair per line")
        p.add_argument("--add-self-loops", action="store_true", help="give every node one self-loop")
        p.add_argument("--seed", type=int, default=None, help="RNG seed; generated and printed if omitted")
        p.add_argument("--workers", type=int, default=None, help="parallel sampling workers (default: cpu count)")
        p.add_argument("--output", required=output_required, help="output path (prefix for multi-file commands)")

    def coeff_flags(p):
        p.add_argument("--coeffs", default=None, help="comma-separated filter coefficients w0,w1,...")
        p.add_argument("--appnp-alpha", type=float, default=None, dest="appnp_alpha",
                       help="restart probability; with --K expands to personalized-PageRank coefficients")
        p.add_argument("--K", type=int, default=None, dest="K", help="maximum hop")

    def budget_flags(p):
        p.add_argument("--samples", type=int, default=None, help="explicit draw budget M")
        p.add_argument("--ec", type=float, default=None, help="budget factor: M = ceil(ec * n * ln n)")

    p = sub.add_parser("sparsify", help="build and write a sparse filter operator")
    common(p)
    coeff_flags(p)
    budget_flags(p)
    p.add_argument("--mode", choices=("static", "learnable", "nodewise"), default="static")
    p.add_argument("--symmetrize", action="store_true",
                   help="average each entry with its transpose (off by default)")
    p.add_argument("--start-set", default=None, dest="start_set",
                   help="file of start node ids (one per line); required in nodewise mode")
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("verify", help="statistically compare sampled operators to the dense oracle")
    common(p)
    coeff_flags(p)
    p.add_argument("--trials", type=int, default=50, help="unbiasedness trials (0 disables)")
    p.add_argument("--samples", type=int, default=1000, help="draws per unbiasedness trial")
    p.add_argument("--probes", type=int, default=64, help="quadratic-form probe vectors per sweep point")
    p.add_argument("--ec-sweep", default="", dest="ec_sweep",
                   help="comma-separated ec values to sweep for similarity reports")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("appnp-check", help="loss error of sampled vs exact propagation")
    common(p)
    budget_flags(p)
    p.add_argument("--alpha", type=float, required=True, help="restart probability in (0, 1]")
    p.add_argument("--K", type=int, required=True, dest="K", help="propagation rounds")
    p.add_argument("--signal", default="random", help="'random' or a signal TSV path")
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_appnp_check)

    p = sub.add_parser("bench", help="sampling and matvec timings over budget sweeps")
    common(p)
    p.add_argument("--samples-sweep", default="", dest="samples_sweep",
                   help="comma-separated draw budgets; empty sweep emits a header-only table")
    p.add_argument("--hops-sweep", default="2", dest="hops_sweep",
                   help="comma-separated maximum hops")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("homophily", help="print the same-label fraction over non-loop edges")
    p.add_argument("--input", required=True)
    p.add_argument("--labels", required=True, help="two-column file 'node_id label'")
    p.set_defaults(func=cmd_homophily)

    return parser


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _resolve_seed(args) -> int:
    if args.seed is None:
        seed = secrets.randbits(32)
    else:
        seed = args.seed
    print(f"seed: {seed}")
    return seed


def _resolve_workers(args) -> int:
    if args.workers is None:
        import os

        return max(1, os.cpu_count() or 1)
    if args.workers < 1:
        raise _UsageError("--workers must be >= 1")
    return args.workers


def _float_list(text: str, flag: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _int_list(text: str, flag: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _resolve_coeffs(args, mode: str) -> np.ndarray | None:
    """Turn --coeffs / --appnp-alpha / --K into a concrete vector (or None)."""
    has_list = args.coeffs is not None
    has_appnp = args.appnp_alpha is not None
    if mode == "learnable":
        if has_list or has_appnp:
            raise _UsageError("learnable mode samples hops without coefficients; give --K only")
        if args.K is None or args.K < 0:
            raise _UsageError("learnable mode needs --K >= 0")
        return None
    if has_list and has_appnp:
        raise _UsageError("give either --coeffs or --appnp-alpha, not both")
    if has_list:
        if args.K is not None:
            raise _UsageError("--K conflicts with an explicit --coeffs list")
        values = _float_list(args.coeffs, "--coeffs")
        if not values:
            raise _UsageError("--coeffs is empty")
        return np.asarray(values)
    if has_appnp:
        if args.K is None:
            raise _UsageError("--appnp-alpha needs --K")
        try:
            return appnp_coeffs(args.appnp_alpha, args.K)
        except ValueError as exc:
            raise _UsageError(str(exc)) from None
    raise _UsageError(f"{mode} mode needs --coeffs or --appnp-alpha with --K")


def _load_graph(args):
    try:
        return load_graph(args.input, add_self_loops=args.add_self_loops)
    except ParseError as exc:
        raise _DataError(f"{args.input}: {exc}") from None
    except ValueError as exc:
        raise _DataError(str(exc)) from None


def _read_start_set(path, id_map) -> tuple[int, ...]:
    nodes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 1:
                raise _DataError(f"{path} line {line_no}: expected one node id per line")
            try:
                raw = int(tokens[0])
            except ValueError:
                raise _DataError(f"{path} line {line_no}: non-integer id {tokens[0]!r}") from None
            if raw not in id_map:
                raise _DataError(f"{path} line {line_no}: node {raw} not present in the graph")
            nodes.append(id_map[raw])
    if not nodes:
        raise _DataError(f"{path}: empty start set")
    return tuple(nodes)


def _write_manifest(path, command: str, params: dict, seed: int, workers: int,
                    wall_time: float, outputs: list[str]) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "params": params,
        "seed": seed,
        "workers": workers,
        "wall_time_s": wall_time,
        "outputs": outputs,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest_to_argv(doc: dict) -> list[str]:
    """Rebuild the argv that reproduces a manifest's run.

    Manifest params use flag names (minus leading dashes) as keys; True
    becomes a bare flag, None and False are dropped, lists are joined with
    commas.
    """
    argv = [doc["command"]]
    for key, value in doc["params"].items():
        flag = "--" + key
        if value is None or value is False:
            continue
        if value is True:
            argv.append(flag)
        elif isinstance(value, (list, tuple)):
            argv.extend([flag, ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in value)])
        else:
            argv.extend([flag, str(value)])
    return argv


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_sparsify(args) -> int:
    seed = _resolve_seed(args)
    workers = _resolve_workers(args)
    coeffs = _resolve_coeffs(args, args.mode)
    graph, id_map = _load_graph(args)

    start_nodes = None
    if args.mode == "nodewise":
        if args.start_set is None:
            raise _UsageError("nodewise mode needs --start-set")
        start_nodes = _read_start_set(args.start_set, id_map)
    elif args.start_set is not None:
        raise _UsageError("--start-set is only meaningful in nodewise mode")

    cfg = SamplerConfig(
        mode=args.mode,
        samples=args.samples,
        ec=args.ec,
        seed=seed,
        workers=workers,
        symmetrize=args.symmetrize,
        start_nodes=start_nodes,
    )
    t0 = time.perf_counter()
    if args.mode == "static":
        op = sparsify_static(graph, coeffs, cfg)
    elif args.mode == "learnable":
        op = sparsify_per_hop(graph, args.K, cfg)
    else:
        op = sparsify_nodewise(graph, coeffs, cfg)
    dt = time.perf_counter() - t0

    outputs = write_operator(op, args.output)
    idmap_path = args.output + ".idmap.tsv"
    write_id_map(idmap_path, id_map)
    outputs.append(idmap_path)
    print(f"nnz: {op.nnz}")
    print(f"sample_time_s: {dt:.6f}")

    params = {
        "input": args.input,
        "mode": args.mode,
        "coeffs": [float(c) for c in coeffs] if coeffs is not None else None,
        "K": args.K if args.mode == "learnable" else None,
        "samples": args.samples,
        "ec": args.ec,
        "seed": seed,
        "workers": workers,
        "symmetrize": args.symmetrize,
        "add-self-loops": args.add_self_loops,
        "start-set": args.start_set,
        "output": args.output,
    }
    _write_manifest(args.output + ".manifest.json", "sparsify", params, seed, workers, dt, outputs)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _resolve_seed(args)
    workers = _resolve_workers(args)
    coeffs = _resolve_coeffs(args, "static")
    graph, _ = _load_graph(args)
    if graph.n > DENSE_LIMIT:
        raise _UsageError(
            f"graph has {graph.n} nodes; verify needs the dense oracle (limit {DENSE_LIMIT})"
        )

    t0 = time.perf_counter()
    outputs: list[str] = []
    failed = False

    unbiased_doc = None
    if args.trials > 0:
        report = unbiasedness_test(
            graph,
            "static",
            coeffs=coeffs,
            samples=args.samples,
            trials=args.trials,
            seed=seed,
            workers=workers,
            node_limit=min(max(graph.n, 1), 200),
        )
        unbiased_doc = report.summary()
        print(
            f"unbiasedness: trials={report.trials} within_3sigma={report.within_3sigma:.4f} "
            f"flagged={len(report.flagged)} deterministic_bias={report.deterministic_bias}"
        )
        if report.deterministic_bias:
            failed = True

    w = np.asarray(coeffs)
    signed = bool(np.any(w < 0))
    exact = dense_poly(graph, w)
    w_tail = w.copy()
    w_tail[0] = 0.0
    exact_tail = dense_poly(graph, w_tail) if np.any(w_tail != 0) else np.zeros_like(exact)
    sweep_docs = []
    for idx, ec in enumerate(_float_list(args.ec_sweep, "--ec-sweep")):
        cfg = SamplerConfig(mode="static", ec=ec, seed=seed + idx, workers=workers)
        op = sparsify_static(graph, w, cfg)
        approx = op.to_dense()
        approx_tail = approx - w[0] * np.eye(graph.n)
        rep = similarity_check(exact, approx, probes=args.probes, seed=seed, signed_coeffs=signed)
        diff_path = f"{args.output}.ec{ec:g}.diff.tsv"
        write_diff_tsv(diff_path, exact_tail, approx_tail)
        outputs.append(diff_path)
        sweep_docs.append({"ec": ec, "draws": op.meta["draws_total"], **rep.to_dict()})
        eps = "None" if rep.epsilon_hat is None else f"{rep.epsilon_hat:.6f}"
        print(f"ec={ec:g} frob_rel_err={rep.frob_rel_err:.6f} epsilon_hat={eps}")

    report_path = args.output + ".report.json"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {"unbiasedness": unbiased_doc, "sweep": sweep_docs},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    outputs.append(report_path)

    params = {
        "input": args.input,
        "coeffs": [float(c) for c in w],
        "trials": args.trials,
        "samples": args.samples,
        "probes": args.probes,
        "ec-sweep": _float_list(args.ec_sweep, "--ec-sweep"),
        "seed": seed,
        "workers": workers,
        "add-self-loops": args.add_self_loops,
        "output": args.output,
    }
    _write_manifest(args.output + ".manifest.json", "verify", params, seed, workers,
                    time.perf_counter() - t0, outputs)
    if failed:
        raise _VerifyFailure("unbiasedness test found deterministic bias")
    return EXIT_OK


def cmd_appnp_check(args) -> int:
    seed = _resolve_seed(args)
    workers = _resolve_workers(args)
    try:
        appnp_coeffs(args.alpha, args.K)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if args.trials < 1:
        raise _UsageError("--trials must be >= 1")
    graph, _ = _load_graph(args)

    if args.signal == "random":
        x = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0xFEED,)))).standard_normal(graph.n)
    else:
        try:
            x = read_signal(args.signal, n=graph.n)
        except ValueError as exc:
            raise _DataError(str(exc)) from None

    t0 = time.perf_counter()
    reports = []
    for t in range(args.trials):
        cfg = SamplerConfig(
            mode="static", samples=args.samples, ec=args.ec, seed=seed + t, workers=workers
        )
        reports.append(loss_error_experiment(graph, x, args.alpha, args.K, cfg))
    rel = np.array([r.rel_err for r in reports])
    summary = {
        "trials": args.trials,
        "rel_err_median": float(np.median(rel)),
        "rel_err_q25": float(np.quantile(rel, 0.25)),
        "rel_err_q75": float(np.quantile(rel, 0.75)),
        "any_absolute": bool(any(r.rel_err_is_absolute for r in reports)),
    }
    print(
        f"rel_err median={summary['rel_err_median']:.6f} "
        f"q25={summary['rel_err_q25']:.6f} q75={summary['rel_err_q75']:.6f}"
    )
    doc = {"summary": summary, "reports": [r.to_dict() for r in reports]}
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    params = {
        "input": args.input,
        "alpha": args.alpha,
        "K": args.K,
        "samples": args.samples,
        "ec": args.ec,
        "signal": args.signal,
        "trials": args.trials,
        "seed": seed,
        "workers": workers,
        "add-self-loops": args.add_self_loops,
        "output": args.output,
    }
    _write_manifest(args.output + ".manifest.json", "appnp-check", params, seed, workers,
                    time.perf_counter() - t0, [args.output])
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = _resolve_seed(args)
    workers = _resolve_workers(args)
    graph, _ = _load_graph(args)
    samples_sweep = _int_list(args.samples_sweep, "--samples-sweep")
    hops_sweep = _int_list(args.hops_sweep, "--hops-sweep")
    t0 = time.perf_counter()

    graph_bytes = sum(a.nbytes for a in (graph.row_offsets, graph.neighbors, graph.degrees))
    lines = ["n\tm\tK\tM\tsample_time_s\tspmv_time_s\tpeak_mem_bytes"]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0xB,))))
    x = rng.standard_normal(graph.n)
    for max_hop in hops_sweep:
        if max_hop < 1:
            raise _UsageError("--hops-sweep entries must be >= 1")
        w = np.concatenate([[0.0], np.ones(max_hop)])
        for m_draws in samples_sweep:
            if m_draws < 1:
                raise _UsageError("--samples-sweep entries must be >= 1")
            cfg = SamplerConfig(mode="static", samples=m_draws, seed=seed, workers=workers)
            t_s = time.perf_counter()
            op = sparsify_static(graph, w, cfg)
            sample_t = time.perf_counter() - t_s
            t_m = time.perf_counter()
            spmv(op, x)
            spmv_t = time.perf_counter() - t_m
            # draws keep ~4 live arrays of 8 bytes each; operator holds 3
            peak = graph_bytes + 4 * 8 * m_draws + 3 * 8 * op.nnz
            lines.append(
                f"{graph.n}\t{graph.m}\t{max_hop}\t{m_draws}\t{sample_t:.6f}\t{spmv_t:.6f}\t{peak}"
            )
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"bench rows: {len(lines) - 1}")

    params = {
        "input": args.input,
        "samples-sweep": samples_sweep,
        "hops-sweep": hops_sweep,
        "seed": seed,
        "workers": workers,
        "add-self-loops": args.add_self_loops,
        "output": args.output,
    }
    _write_manifest(args.output + ".manifest.json", "bench", params, seed, workers,
                    time.perf_counter() - t0, [args.output])
    return EXIT_OK


def cmd_homophily(args) -> int:
    try:
        graph, id_map = load_graph(args.input)
        labels = load_labels(args.labels, id_map=id_map)
        value = edge_homophily(graph, labels)
    except ParseError as exc:
        raise _DataError(str(exc)) from None
    except ValueError as exc:
        raise _DataError(str(exc)) from None
    print(f"{value:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except _UsageError as exc:
        print(f"lapsparse: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DataError as exc:
        print(f"lapsparse: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _VerifyFailure as exc:
        print(f"lapsparse: verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as exc:
        print(f"lapsparse: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"lapsparse: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
