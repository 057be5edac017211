"""Write the bundled two-class synthetic CSV used by the regression tests.

The shape mimics a small expression study: two classes, a few hundred
coordinates, a sparse block of shifted means and a class with inflated
variances on another block.
"""

import argparse
from pathlib import Path

import numpy as np

from hdqc.summaries import Dataset, write_dataset_csv


def make(seed: int = 20240501, p: int = 300, sizes=(14, 9)) -> Dataset:
    rng = np.random.default_rng(seed)
    scale = rng.lognormal(mean=5.0, sigma=0.6, size=p)
    X1 = scale * (1 + 0.3 * rng.standard_normal((sizes[0], p)))
    shift = np.zeros(p)
    shift[:15] = 0.6
    spread = np.ones(p)
    spread[15:30] = 1.8
    X2 = scale * (1 + shift + 0.3 * spread * rng.standard_normal((sizes[1], p)))
    return Dataset((np.round(X1, 3), np.round(X2, 3)), ("ALL", "AML"))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "tests" / "data" / "synthetic_two_class.csv")
    ap.add_argument("--seed", type=int, default=20240501)
    args = ap.parse_args()
    write_dataset_csv(make(args.seed), args.out)
    print(f"wrote {args.out}")
