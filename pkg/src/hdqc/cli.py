"""Command-line entry point: ``hdqc <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure. Diagnostics go to stderr; data goes to ``--out`` or
stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .discriminant import FitOptions, TrainedClassifier, fit
from .errors import ConfigError, DataError, HDQCError
from .estimators import ThresholdConfig, sparsity_report
from .evaluation import LoocvOptions, evaluate_split, gamma_sweep, loocv
from .feature_selection import select_features
from .simulation import SCENARIOS, ScenarioConfig, default_workers, run_monte_carlo, theory_grid
from .summaries import Dataset, read_dataset_csv, standardize_global, summarize

log = logging.getLogger("hdqc")

SIM_DEFAULT = "I,II,III,IV"
EVAL_DEFAULT = "dbda,gqda,dlda_bc,dqda_bc,fs_dqda"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_fit_flags(sp, standardize_default: bool = True):
    g = sp.add_argument_group("classifier options")
    g.add_argument("--gamma", type=float, default=0.5, help="feature-selection exponent in (0, 1) (default 0.5)")
    g.add_argument("--M", dest="M", type=float, default=2.0, help="thresholding constant M' (default 2.0)")
    g.add_argument("--keep-diagonal", action="store_true", help="do not threshold diagonal covariance entries")
    g.add_argument("--strict-ties", action="store_true", help="send exact ties to the last class instead of the first")
    if standardize_default:
        g.add_argument("--no-standardize", action="store_true", help="skip the global trace standardization")


def _fit_options(args, standardize: bool | None = None) -> FitOptions:
    if not 0 < args.gamma < 1:
        raise ConfigError(f"--gamma must lie in (0, 1), got {args.gamma}")
    if standardize is None:
        standardize = not getattr(args, "no_standardize", False)
    return FitOptions(
        gamma=args.gamma,
        threshold=ThresholdConfig(args.M, args.keep_diagonal),
        standardize=standardize,
        strict_ties=args.strict_ties,
    )


def _add_output(sp, formats=("csv", "json"), default="csv"):
    sp.add_argument("--format", choices=formats, default=default, help=f"output format (default {default})")
    sp.add_argument("--out", type=Path, help="write data here instead of stdout")


def _emit(args, text: str):
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def _scenario_config(args, reps_default=None) -> ScenarioConfig:
    if args.config is not None:
        cfg = ScenarioConfig.from_json(args.config)
    else:
        cfg = ScenarioConfig.from_catalog(args.scenario)
    updates = {}
    if args.grid is not None:
        updates["grid"] = tuple(args.grid)
    for key in ("reps", "seed", "nu"):
        v = getattr(args, key, None)
        if v is not None:
            updates["replications" if key == "reps" else key] = v
    if getattr(args, "fixed_training", False):
        updates["fixed_training"] = True
    return replace(cfg, **updates) if updates else cfg


def _add_scenario(sp):
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=SCENARIOS, help="built-in scenario id")
    src.add_argument("--config", type=Path, help="scenario JSON file")
    sp.add_argument("--grid", type=_int_list, help="comma-separated dimensions, e.g. 8,64,512")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hdqc", description="Bias-corrected high-dimensional quadratic classifiers.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="Monte Carlo error rates over a dimension grid")
    _add_scenario(sp)
    sp.add_argument("--reps", type=int, help="replications per dimension (default 2000)")
    sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sp.add_argument("--nu", type=float, help="degrees of freedom for the t family")
    sp.add_argument("--classifiers", type=_names, default=_names(SIM_DEFAULT), help=f"comma-separated list (default {SIM_DEFAULT}); oracle choices I-IV or sample variants")
    sp.add_argument("--workers", type=int, default=default_workers(), help="worker processes (default: logical cores)")
    sp.add_argument("--fixed-training", action="store_true", help="draw one training set per dimension instead of one per replication")
    sp.add_argument("--no-overlay", action="store_true", help="skip the Phi(-Delta/delta) overlay column")
    _add_fit_flags(sp, standardize_default=False)
    _add_output(sp)

    sp = sub.add_parser("theory", help="Delta, delta and Phi(-Delta/delta) over a dimension grid")
    _add_scenario(sp)
    sp.add_argument("--classifiers", type=_names, default=_names(SIM_DEFAULT), help="precision choices among I,II,III,IV")
    _add_output(sp)

    sp = sub.add_parser("diagnose", help="heterogeneity, sparsity and eigenvalue diagnostics of two classes")
    sp.add_argument("--data", type=Path, required=True, help="labeled CSV")
    sp.add_argument("--classes", type=_names, help="the two class labels to compare (default: the first two)")
    sp.add_argument("--no-standardize", action="store_true", help="skip the global trace standardization")
    _add_output(sp, ("text", "csv", "json"), "text")

    sp = sub.add_parser("fit", help="fit one classifier and save it as JSON")
    sp.add_argument("--data", type=Path, required=True, help="labeled training CSV")
    sp.add_argument("--classifier", required=True, help="dbda, gqda, dlda-bc, dqda-bc, fs-dqda, sample-precision or thresholded")
    sp.add_argument("--model", type=Path, required=True, help="output model file")
    _add_fit_flags(sp)

    sp = sub.add_parser("classify", help="classify observations with a saved model")
    sp.add_argument("--model", type=Path, required=True, help="model file written by fit")
    sp.add_argument("--data", type=Path, required=True, help="CSV of observations, with or without a leading label column")
    sp.add_argument("--strict-ties", action="store_true", help="send exact ties to the last class instead of the first")
    _add_output(sp)

    sp = sub.add_parser("loocv", help="leave-one-out error counts")
    sp.add_argument("--data", type=Path, required=True, help="labeled CSV")
    sp.add_argument("--test", type=Path, help="score this labeled test CSV instead of running LOOCV")
    sp.add_argument("--classifiers", type=_names, default=_names(EVAL_DEFAULT), help=f"comma-separated list (default {EVAL_DEFAULT})")
    sp.add_argument("--paper-standardization", dest="cohort_standardization", action="store_true", help="standardize once on the full cohort instead of per fold")
    sp.add_argument("--gamma-grid", type=_float_list, help="sweep FS-DQDA over these gamma values")
    sp.add_argument("--workers", type=int, default=1, help="worker processes for the folds (default 1)")
    _add_fit_flags(sp)
    _add_output(sp)

    sp = sub.add_parser("select-features", help="heterogeneity statistics and the selected coordinates")
    sp.add_argument("--data", type=Path, required=True, help="labeled CSV")
    sp.add_argument("--gamma", type=float, default=0.5, help="selection exponent in (0, 1) (default 0.5)")
    _add_output(sp)
    return ap


# -- commands --------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg = _scenario_config(args)
    opts = _fit_options(args, standardize=False)
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    log.info("simulate %s grid=%s R=%d", cfg.scenario, list(cfg.grid), cfg.replications)
    rep = run_monte_carlo(cfg, args.classifiers, opts, workers=args.workers, overlay=not args.no_overlay)
    log.info("finished in %.1f s", rep.wall_time)
    _emit(args, rep.to_csv() if args.format == "csv" else rep.to_json())
    return 0


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _cmd_theory(args) -> int:
    cfg = _scenario_config(args)
    choices = [c.upper() for c in args.classifiers]
    rows = theory_grid(cfg, choices)
    if args.format == "json":
        text = json.dumps({"config": cfg.to_dict(), "rows": [r.__dict__ for r in rows]}, sort_keys=True, indent=1) + "\n"
    else:
        lines = [f"# config={json.dumps(cfg.to_dict(), sort_keys=True)}", "p,classifier,class,Delta,delta_small,phi_error,bayes_error"]
        lines += [f"{r.p},{r.classifier},{r.cls},{r.delta!r},{r.delta_small!r},{r.phi_error!r},{_fmt(r.bayes_error)}" for r in rows]
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    return 0


def _pick_two(data: Dataset, classes) -> tuple[Dataset, tuple[str, str]]:
    if classes is None:
        if len(data.labels) < 2:
            raise DataError("need at least two classes")
        classes = data.labels[:2]
    if len(classes) != 2:
        raise ConfigError("--classes takes exactly two labels")
    idx = []
    for c in classes:
        if c not in data.labels:
            raise DataError(f"class {c!r} not found; available: {list(data.labels)}")
        idx.append(data.labels.index(c))
    return Dataset(tuple(data.classes[i] for i in idx), tuple(classes)), tuple(classes)


def _cmd_diagnose(args) -> int:
    data, labels = _pick_two(read_dataset_csv(args.data), args.classes)
    if not args.no_standardize:
        data, _ = standardize_global(data)
    rep = sparsity_report(data.classes[0], data.classes[1], labels)
    items = rep.items()
    header = f"# data={args.data.name} classes={','.join(labels)} p={rep.p} n={','.join(str(n) for n in data.sizes)} standardized={not args.no_standardize}"
    if args.format == "json":
        text = json.dumps({"p": rep.p, "classes": list(labels), "n": list(data.sizes), "standardized": not args.no_standardize, **{k: _jsonable(v) for k, v in items}, "conditions_defined": rep.conditions_defined, "headline": rep.headline()}, indent=1) + "\n"
    elif args.format == "csv":
        text = "\n".join([header, "key,value"] + [f"{k},{v!r}" for k, v in items]) + "\n"
    else:
        text = "\n".join([header] + [f"{k} = {v!r}" for k, v in items] + [rep.headline()]) + "\n"
    if not rep.conditions_defined:
        log.warning("Delta_I_hat <= 0: C1 and C2 are undefined")
    _emit(args, text)
    return 0


def _jsonable(v: float):
    return None if isinstance(v, float) and math.isnan(v) else v


def _cmd_fit(args) -> int:
    data = read_dataset_csv(args.data)
    model = fit(data, args.classifier, _fit_options(args))
    model.save(args.model)
    if model.selected is not None:
        log.info("selected %d coordinates", model.selected.size)
    return 0


def _read_observations(path: Path, p: int) -> tuple[np.ndarray, list[str] | None]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if row[0].strip().lower().startswith("label"):
                continue
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no observations")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise DataError(f"{path}: rows have differing lengths")
    w = width.pop()
    try:
        if w == p:
            return np.array([[float(v) for v in r] for r in rows]), None
        if w == p + 1:
            return np.array([[float(v) for v in r[1:]] for r in rows]), [r[0].strip() for r in rows]
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    raise DataError(f"{path}: rows have {w} fields; the model expects {p} (or {p + 1} with a label)")


def _cmd_classify(args) -> int:
    model = TrainedClassifier.load(args.model)
    if args.strict_ties:
        model = replace(model, strict_ties=True)
    X, truth = _read_observations(args.data, model.p)
    idx, ties = model.predict(X)
    pred = [model.labels[i] for i in idx]
    if args.format == "json":
        rows = [{"row": k, "predicted": pred[k], "tie": bool(ties[k]), **({"label": truth[k]} if truth else {})} for k in range(len(pred))]
        text = json.dumps({"model": model.variant, "rows": rows}, indent=1) + "\n"
    else:
        head = "row,predicted,tie" + (",label" if truth else "")
        lines = [f"# model={args.model.name} variant={model.variant}", head]
        lines += [f"{k},{pred[k]},{int(ties[k])}" + (f",{truth[k]}" if truth else "") for k in range(len(pred))]
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    return 0


def _cmd_loocv(args) -> int:
    data = read_dataset_csv(args.data)
    opts = _fit_options(args)
    header = f"# data={args.data.name} classifiers={','.join(args.classifiers)} gamma={args.gamma!r} M={args.M!r} standardize={opts.standardize} cohort_standardization={args.cohort_standardization}"
    if args.gamma_grid:
        pts = gamma_sweep(data, args.gamma_grid, LoocvOptions(opts, args.cohort_standardization, args.workers))
        if args.format == "json":
            text = json.dumps([p.__dict__ for p in pts], indent=1) + "\n"
        else:
            text = "\n".join([header, "gamma,errors,total,selected_median"] + [f"{p.gamma!r},{p.errors},{p.total},{p.selected_median!r}" for p in pts]) + "\n"
        _emit(args, text)
        return 0
    if args.test is not None:
        report = evaluate_split(data, read_dataset_csv(args.test), args.classifiers, opts)
    else:
        report = loocv(data, args.classifiers, LoocvOptions(opts, args.cohort_standardization, args.workers))
    text = report.to_json() if args.format == "json" else header + "\n" + report.to_csv()
    _emit(args, text)
    (sys.stdout if args.out is not None else sys.stderr).write(report.table())
    return 0


def _cmd_select(args) -> int:
    data = read_dataset_csv(args.data)
    res = select_features(summarize(data), args.gamma, data.p)
    if args.format == "json":
        text = json.dumps({"threshold": res.threshold, "gamma": res.gamma, "theta_hat": res.theta_hat.tolist(), "selected": res.selected.tolist()}, indent=1) + "\n"
    else:
        text = res.to_csv()
    log.info("selected %d of %d coordinates", res.p_star_hat, data.p)
    _emit(args, text)
    return 0


COMMANDS = {
    "simulate": _cmd_simulate,
    "theory": _cmd_theory,
    "diagnose": _cmd_diagnose,
    "fit": _cmd_fit,
    "classify": _cmd_classify,
    "loocv": _cmd_loocv,
    "select-features": _cmd_select,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except HDQCError as exc:
        print(f"hdqc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"hdqc {args.command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
