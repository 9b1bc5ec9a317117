"""Loss error of sampled propagation as the draw budget doubles.

Runs the propagation loss experiment over a geometric budget sweep and
prints the median relative loss error with its per-doubling ratio.  The
error is quadratic in the operator deviation, so the ratio should hover
near 2 once the budget is past the noise floor.
"""

import argparse

import numpy as np

import lapsparse as lp
from lapsparse.sampling import philox_stream
from lapsparse.sparsify import SamplerConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=100)
    ap.add_argument("--mean-degree", type=float, default=8.0)
    ap.add_argument("--graph-seed", type=int, default=42)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--base-budget", type=int, default=32000)
    ap.add_argument("--doublings", type=int, default=4)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=4000)
    args = ap.parse_args()

    g = lp.erdos_renyi_graph(args.nodes, mean_degree=args.mean_degree,
                             seed=args.graph_seed)
    x = philox_stream(31337).standard_normal(g.n)
    print(f"graph: n={g.n} m={g.m} alpha={args.alpha} K={args.K}")

    prev = None
    for j in range(args.doublings + 1):
        budget = args.base_budget * 2**j
        errs = [lp.loss_error_experiment(
                    g, x, args.alpha, args.K,
                    SamplerConfig(mode="static", samples=budget,
                                  seed=args.seed + t)).rel_err
                for t in range(args.trials)]
        med = float(np.median(errs))
        ratio = "" if prev is None else f"  ratio={prev / med:.3f}"
        print(f"M={budget:<8d} median rel_err={med:.6f}{ratio}")
        prev = med


if __name__ == "__main__":
    main()
