"""How the L1 weight flattens the quadratic term on linearly separable data.

For each lambda the script trains the Universum models on the full set and
records the largest |W_ij| and the training accuracy.
"""

import argparse
from pathlib import Path

import numpy as np

from qsurf import dataset as ds
from qsurf import harness as H
from qsurf.models import Hyperparams, train_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=100, help="points per class")
    ap.add_argument("--margin", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--out", default="results/linear_study.csv")
    args = ap.parse_args()
    data = ds.synth_linear(args.m, 2, args.margin, rng_seed=args.seed)
    data = data.with_points(ds.apply_normalizer(ds.fit_normalizer(data), data.points))
    uni = ds.expand_universum(ds.generate_universum(data, 0.1, args.seed), 2)
    table = H.Table(["model", "lambda", "max_abs_W", "train_accuracy"],
                    ["str", "float", "float", "acc"])
    for kind in ("u-sqssvm", "l1-u-sqssvm", "ls-l1-u-sqssvm"):
        for e in range(-2, 13, 2):
            lam = 0.0 if kind == "u-sqssvm" else 2.0 ** e
            m = train_model(kind, data, uni, Hyperparams(2.0 ** 10, lam, 16.0, 0.01))
            wmax = float(np.max(np.abs(m.classifier.W)))
            acc = H.accuracy(m.classifier.predict(data.points), data.labels)
            table.add(kind, lam, wmax, acc)
            print(f"{kind:16s} lambda={lam:8g} max|W|={wmax:.2e} train={acc:.1f}%")
            if kind == "u-sqssvm":
                break
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    table.write(args.out)


if __name__ == "__main__":
    main()
