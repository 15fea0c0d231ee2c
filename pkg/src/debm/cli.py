"""Command-line surface: fit, stage, simulate, evaluate, experiment.

Exit codes: 0 on success, 2 for input errors (files, schemas, configs),
3 for numerical failures during fitting.  Every command that consumes
randomness takes --seed and is bit-reproducible, independent of
--threads.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from . import evaluate as ev
from .data import load_dataset
from .errors import DataError, FitError
from .model_io import load_model, save_model
from .pipeline import fit_model
from .simulate import SimConfig, simulate_cohort

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

SCHEMA_ENV = "DEBM_SCHEMA"
CONFIG_ENV = "DEBM_CONFIG"


def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None


def _load(args):
    schema_path = args.schema or os.environ.get(SCHEMA_ENV)
    if not schema_path:
        raise DataError(f"--schema is required (or set ${SCHEMA_ENV})")
    schema = _read_json(schema_path, "schema")
    ds = load_dataset(args.data, schema)
    for biomarker, covs in schema.get("residualize", {}).items():
        from .data import residualize
        ds = residualize(ds, biomarker, covs)
    return ds, schema


def cmd_fit(args):
    ds, schema = _load(args)
    biomarkers = None
    if args.select_alpha is not None:
        from .data import select_biomarkers
        biomarkers = select_biomarkers(ds, alpha=args.select_alpha,
                                       bonferroni=not args.no_bonferroni)
        if not biomarkers:
            raise DataError("no biomarker passed the selection test")
    model = fit_model(ds, method=args.method, seed=args.seed, threads=args.threads,
                      biomarkers=biomarkers, restarts=args.restarts, starts=args.starts)
    save_model(model, args.out)
    print(f"wrote {args.out}: {len(model.biomarkers)} events, method={model.method}")
    return 0


def cmd_stage(args):
    model = load_model(args.model)
    ds, _ = _load(args)
    missing = [n for n in model.biomarkers if n not in ds.biomarkers]
    if missing:
        raise DataError(f"data lacks model biomarkers: {missing}")
    staged = model.stage(ds.matrix(model.biomarkers), bins=args.bins,
                         include_zero_stage=args.staging_k0 == "on")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "stage", "k1", "w1", "k2", "w2", "k3", "w3", "error"])
        for sid, result, err in _stage_rows(ds, staged):
            writer.writerow([sid, *result, err])
    n_err = len(staged.errors)
    print(f"wrote {args.out}: {ds.n_subjects - n_err} staged, {n_err} failed")
    return 0


def _stage_rows(ds, staged):
    errs = dict(staged.errors)
    for j, result in enumerate(staged.results):
        if result is None:
            yield ds.subject_ids[j], [""] * 7, errs.get(j, "staging failed")
        else:
            top = result.top_weights(3)
            top += [("", "")] * (3 - len(top))
            flat = [x for pair in top for x in
                    (pair[0], f"{pair[1]:.17g}" if pair[1] != "" else "")]
            yield ds.subject_ids[j], [f"{result.stage:.17g}", *flat], ""


def cmd_simulate(args):
    config_path = args.config or os.environ.get(CONFIG_ENV)
    overrides = _read_json(config_path, "simulation config") if config_path else {}
    field_names = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(overrides) - field_names
    if unknown:
        raise DataError(f"unknown simulation config keys: {sorted(unknown)}")
    if "fractions" in overrides:
        overrides["fractions"] = tuple(overrides["fractions"])
    cfg = SimConfig(**overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    ds, truth = simulate_cohort(cfg)

    names = ds.biomarker_names
    with open(args.out_data, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "dx", *names])
        matrix = ds.matrix(names)
        for j in range(ds.n_subjects):
            writer.writerow([ds.subject_ids[j], str(ds.diagnoses[j]),
                             *(f"{v:.17g}" for v in matrix[j])])
    truth_doc = {
        "format_version": 1,
        "ordering": [truth.names[i] for i in truth.ordering],
        "event_centers": {n: float(c) for n, c in zip(truth.names, truth.mu_xi)},
        "rho": truth.rho.tolist(),
        "psi": truth.psi.tolist(),
        "seed": truth.seed,
    }
    with open(args.out_truth, "w") as fh:
        json.dump(truth_doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out_data} ({ds.n_subjects} subjects) and {args.out_truth}")
    return 0


def _truth_metrics(model, truth_doc):
    names = model.biomarkers
    truth_order = [n for n in truth_doc["ordering"] if n in set(names)]
    if set(truth_order) != set(names):
        raise DataError("truth file does not cover the model's biomarkers")
    est_order = [names[i] for i in model.timeline.ordering]
    centers = model.timeline.centers_by_biomarker()
    gt = np.array([truth_doc["event_centers"][n] for n in names])
    lam = np.asarray(centers)
    corr = float(np.corrcoef(lam, gt)[0, 1]) if len(names) > 2 else None
    return {
        "ordering_error": ev.ordering_error(est_order, truth_order),
        "event_center_error": ev.event_center_error(lam, gt),
        "center_correlation": corr,
        "estimated_ordering": est_order,
        "truth_ordering": truth_order,
    }


def cmd_evaluate(args):
    modes = sum([args.truth is not None, args.resamples is not None,
                 args.folds is not None])
    if modes != 1:
        raise DataError("pick exactly one of --truth, --resamples, --folds")

    if args.truth is not None:
        if not args.model:
            raise DataError("--truth mode needs --model")
        model = load_model(args.model)
        metrics = _truth_metrics(model, _read_json(args.truth, "truth"))
    elif args.resamples is not None:
        ds, _ = _load(args)
        result = ev.bootstrap(ds, resamples=args.resamples, method=args.method,
                              seed=args.seed, threads=args.threads)
        metrics = {
            "method": args.method,
            "resamples": result.resamples,
            "event_names": result.event_names,
            "positional_variance": result.positional_variance.tolist(),
            "center_mean": result.center_mean.tolist(),
            "center_se": result.center_se.tolist(),
        }
        if args.svg:
            with open(args.svg, "w") as fh:
                fh.write(ev.positional_variance_svg(result.positional_variance,
                                                    result.event_names))
    else:
        ds, _ = _load(args)
        result = ev.cv_auc(ds, folds=args.folds, method=args.method,
                           seed=args.seed, threads=args.threads)
        metrics = {
            "method": args.method,
            "folds": args.folds,
            "auc": result.auc,
            "median_stage": {
                label: float(np.nanmedian(result.stages[result.diagnoses == label]))
                for label in ("CN", "MCI", "AD")
                if np.any(result.diagnoses == label)
            },
        }

    with open(args.out, "w") as fh:
        json.dump(metrics, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out}")
    return 0


def cmd_experiment(args):
    doc = _read_json(args.grid, "grid")
    base_overrides = doc.get("base", {})
    field_names = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(base_overrides) - field_names
    if unknown:
        raise DataError(f"unknown base config keys: {sorted(unknown)}")
    if "fractions" in base_overrides:
        base_overrides["fractions"] = tuple(base_overrides["fractions"])
    vary = doc.get("vary", {})
    if not vary:
        raise DataError("grid file must specify a 'vary' mapping")
    bad = set(vary) - field_names
    if bad:
        raise DataError(f"cannot vary unknown parameters: {sorted(bad)}")
    grid = ev.GridConfig(
        base=SimConfig(**base_overrides),
        vary=vary,
        repetitions=args.reps or doc.get("repetitions", 10),
        methods=tuple(doc.get("methods", ["debm", "febm"])),
        seed=args.seed if args.seed is not None else doc.get("seed", 0),
    )
    rows, summary = ev.run_experiment_grid(grid, threads=args.threads)

    keys = list(vary)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*keys, "repetition", "method", "seed",
                         "ordering_error", "event_center_error"])
        for r in rows:
            writer.writerow([*(r[k] for k in keys), r["repetition"], r["method"],
                             r["seed"], f"{r['ordering_error']:.17g}",
                             f"{r['event_center_error']:.17g}"])
    summary_path = args.summary or (os.path.splitext(args.out)[0] + ".summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} ({len(rows)} rows) and {summary_path}")
    return 0


def _add_common(parser, data=False):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    if data:
        parser.add_argument("--data", required=True)
        parser.add_argument("--schema", default=None,
                            help=f"column-role schema JSON (default ${SCHEMA_ENV})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="debm",
        description="Disease progression timelines from cross-sectional biomarker tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a progression model from a biomarker table")
    _add_common(p, data=True)
    p.add_argument("--method", choices=["debm", "febm"], default="debm")
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=0,
                   help="extra random starts for the central-ordering search")
    p.add_argument("--starts", type=int, default=10,
                   help="random starts for the likelihood ordering search (febm)")
    p.add_argument("--select-alpha", type=float, default=None,
                   help="keep only biomarkers passing a CN-vs-AD t-test at this level")
    p.add_argument("--no-bonferroni", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stage", help="stage subjects on a fitted timeline")
    _add_common(p, data=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--staging-k0", choices=["on", "off"], default="on",
                   help="include the zero-events stage (center 0)")
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_stage)

    p = sub.add_parser("simulate", help="generate a synthetic cohort with ground truth")
    p.add_argument("--config", default=None,
                   help=f"SimConfig overrides JSON (default ${CONFIG_ENV})")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-data", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate",
                       help="score a model against truth, or bootstrap / cross-validate")
    _add_common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--method", choices=["debm", "febm"], default="debm")
    p.add_argument("--resamples", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--svg", default=None,
                   help="write the positional-variance heatmap here (bootstrap mode)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a simulation experiment grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
