"""Diagnostics and error counts for a labeled expression-style CSV.

Usage:
    python3 scripts/real_data_report.py --train train.csv [--test test.csv] [--gamma-grid 0.1,0.3,0.5,0.7,0.9]

Prints the heterogeneity/sparsity report, the train/test error table when a
test file is given, LOOCV tables under per-fold and cohort standardization,
and optionally the FS-DQDA gamma curve.
"""

import argparse
from pathlib import Path

import numpy as np

from hdqc.discriminant import FitOptions
from hdqc.estimators import sparsity_report
from hdqc.evaluation import LoocvOptions, evaluate_split, gamma_sweep, loocv
from hdqc.summaries import Dataset, read_dataset_csv, standardize_global

CLASSIFIERS = ["dbda", "gqda", "dlda_bc", "dqda_bc", "fs_dqda"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--train", type=Path, required=True)
    ap.add_argument("--test", type=Path)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--gamma-grid", type=lambda s: [float(v) for v in s.split(",")])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    train = read_dataset_csv(args.train)
    two = Dataset(train.classes[:2], train.labels[:2])
    rep = sparsity_report(*standardize_global(two)[0].classes, two.labels)
    print(rep.headline(), end="\n\n")

    fit_opts = FitOptions(gamma=args.gamma, standardize=True)
    if args.test is not None:
        test = read_dataset_csv(args.test)
        print(evaluate_split(train, test, CLASSIFIERS, fit_opts).table())
        # LOOCV runs on the pooled train + test cohort
        merged = Dataset(tuple(np.vstack([x, test.classes[test.labels.index(lab)]]) if lab in test.labels else x for x, lab in zip(train.classes, train.labels)), train.labels)
    else:
        merged = train
    for cohort in (False, True):
        print(loocv(merged, CLASSIFIERS, LoocvOptions(fit_opts, cohort, args.workers)).table())
    if args.gamma_grid:
        print("gamma  errors  selected_median")
        for pt in gamma_sweep(merged, args.gamma_grid, LoocvOptions(fit_opts, False, args.workers)):
            print(f"{pt.gamma:<6g} {pt.errors}/{pt.total:<5} {pt.selected_median:g}")


if __name__ == "__main__":
    main()
