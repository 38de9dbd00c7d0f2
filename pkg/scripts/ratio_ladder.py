#!/usr/bin/env python3
"""Ratio g(U)/g(V) and level-set exponent on a size ladder, printed as a table."""
import argparse
import math
import warnings

import numpy as np

from levelset_lab import (
    RngStream,
    build_dgff,
    build_iid,
    cardinality_experiment,
    estimate_g,
    factorize,
    normalize_to_spec,
    ratio_experiment,
)

SEED = 20261015


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", choices=("dgff", "iid"), default="dgff")
    p.add_argument("--sizes", type=int, nargs="+", default=[17, 33, 65])
    p.add_argument("--alphas", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    p.add_argument("--outer", type=int, default=50)
    p.add_argument("--inner", type=int, default=200)
    p.add_argument("--seed", type=int, default=SEED)
    args = p.parse_args()
    warnings.simplefilter("ignore")

    print(f"{'size':>6} {'alpha':>5} {'ratio':>7} {'target':>7} {'exp':>6} {'target':>6}")
    for size in args.sizes:
        m = build_dgff(size) if args.model == "dgff" else normalize_to_spec(build_iid(size, 1.0))
        k = factorize(m)
        rng = RngStream(args.seed)
        g_v = estimate_g(k, None, 2000, rng)
        for a in args.alphas:
            ratios = [r.ratio for r in ratio_experiment(m, a, args.outer, args.inner, rng,
                                                        g_v=g_v, kernel=k)]
            exps = [r.exponent for r in cardinality_experiment(m, a, args.outer, rng,
                                                               g_v=g_v, kernel=k)]
            print(f"{m.size:>6} {a:>5.2f} {np.nanmedian(ratios):>7.3f} "
                  f"{math.sqrt(1 - a * a):>7.3f} {np.median(exps):>6.3f} {1 - a * a:>6.3f}")


if __name__ == "__main__":
    main()
