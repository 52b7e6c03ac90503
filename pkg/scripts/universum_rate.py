"""CV accuracy as a function of the Universum size (fraction of the data)."""

import argparse
from pathlib import Path

from qsurf import dataset as ds
from qsurf import harness as H
from qsurf.models import Hyperparams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=100, help="points per class")
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", default="results/urate")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = ds.synth_quadratic(args.m, noise=args.noise, separable=False, rng_seed=args.seed)
    rates = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
    # near the colormap maxima on this data
    settings = {
        "u-sqssvm": Hyperparams(65536.0, 0.0, 4096.0, 2.0 ** -8),
        "l1-u-sqssvm": Hyperparams(65536.0, 4.0, 4096.0, 2.0 ** -8),
        "ls-l1-u-sqssvm": Hyperparams(65536.0, 4.0, 65536.0, 2.0 ** -8),
    }
    for kind, h in settings.items():
        curve = H.universum_rate_curve(kind, data, h, rates, args.repeats, 5, args.seed,
                                       workers=args.workers)
        H.urate_table(curve).write(out / f"urate_{kind}.csv")
        print(kind, " ".join(f"{p.rate:.2f}:{p.mean:.2f}" for p in curve))


if __name__ == "__main__":
    main()
