"""Accuracy over the (C_u, eps) plane at fixed (mu, lambda) on noisy quadratic data.

Writes ``colormap_<kind>.csv`` per Universum model and prints the sweep
maximum next to the C_u = 0 baseline.
"""

import argparse
from pathlib import Path

from qsurf import dataset as ds
from qsurf import harness as H
from qsurf.models import Hyperparams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=100, help="points per class")
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--mu", type=float, default=65536.0)
    ap.add_argument("--lam", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", default="results/colormap")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = ds.synth_quadratic(args.m, noise=args.noise, separable=False, rng_seed=args.seed)
    cus = [2.0 ** e for e in range(-4, 17, 2)]
    epss = [2.0 ** e for e in range(-8, 1)]
    for kind in ("u-sqssvm", "l1-u-sqssvm", "ls-l1-u-sqssvm"):
        base = H.cross_validate(kind, data, Hyperparams(args.mu, args.lam, 0.0, 0.01), 5,
                                args.seed)
        res = H.colormap_sweep(kind, data, args.mu, args.lam, cus, epss, 5, args.seed,
                               workers=args.workers)
        H.colormap_table(res).write(out / f"colormap_{kind}.csv")
        cu, eps = res.best_point
        print(f"{kind:16s} best {res.best:6.2f} at C_u={cu:g} eps={eps:g}; "
              f"C_u=0 baseline {base.mean_accuracy:6.2f}")


if __name__ == "__main__":
    main()
