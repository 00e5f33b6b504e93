"""Command-line interface: ``synth``, ``train``, ``predict``, ``cv`` and ``bench``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Log verbosity comes from the ``ARD_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .ard import ArdConfig, train_slr
from .correntropy import CslrConfig, train_cslr
from .data import (ContaminationSpec, SyntheticSpec, apply_standardize,
                   contaminate, fit_standardize, generate_synthetic, load_csv,
                   write_csv)
from .errors import DataError, DimensionMismatch, MissingColumn, NonNumericCell, NumericalFailure
from .logistic import (OptimizerConfig, load_model, predict_label, predict_prob,
                       save_model, train_mle)
from .metrics import accuracy
from .rng import substream
from .selection import (DEFAULT_BANDWIDTHS, DEFAULT_NOISE_STDS, DEFAULT_PROPORTIONS,
                        BenchSpec, CvPlan, cv_scores, deterministic_blas,
                        run_benchmark)

log = logging.getLogger("cslr")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _write_atomic(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="milliseconds")


def write_manifest(path, args, started, outputs):
    """Record what is needed to reproduce ``outputs``: command, flags, seed, version."""
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": args.command,
        "argv": sys.argv[1:],
        "flags": flags,
        "seed": flags.get("seed"),
        "version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
    }
    _write_atomic(Path(path), json.dumps(doc, indent=1, default=str) + "\n")


def _manifest_path(output: Path):
    output = Path(output)
    if output.is_dir():
        return output / "manifest.json"
    return output.with_name(output.name + ".manifest.json")


# ---------------------------------------------------------------------------
# Shared flag groups

def _add_ard_flags(p):
    p.add_argument("--alpha-max", type=float, default=1e8)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--alpha-rule", choices=("fast", "expectation"), default="fast")
    p.add_argument("--protect-bias", action="store_true",
                   help="keep the bias precision fixed instead of letting ARD prune it")


def _add_cslr_flags(p):
    p.add_argument("--hq-max-iter", type=int, default=100)
    p.add_argument("--reduction", choices=("scaled", "sum", "mean"), default="scaled",
                   help="weighting of the correntropy term: N*sigma^2 (scaled), N (sum) or 1 (mean)")


def _ard_config(args):
    return ArdConfig(alpha_max=args.alpha_max, max_iter=args.max_iter, tol=args.tol,
                     alpha_rule=args.alpha_rule, protect_bias=args.protect_bias)


def _cslr_config(args, sigma=1.0):
    return CslrConfig(alpha_max=args.alpha_max, max_iter=args.max_iter, tol=args.tol,
                      alpha_rule=args.alpha_rule, protect_bias=args.protect_bias,
                      bandwidth=sigma, max_hq_iter=args.hq_max_iter, reduction=args.reduction)


# ---------------------------------------------------------------------------
# Commands

def cmd_synth(args):
    started = _now()
    spec = SyntheticSpec(args.n_train, args.n_test, args.dim, args.relevant, args.seed)
    train, test, w, relevant = generate_synthetic(spec)
    if args.contaminate != "none":
        cspec = ContaminationSpec(args.contaminate, args.prop, args.std, args.seed)
        train = contaminate(train, cspec, substream(args.seed, "contaminate"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "train.csv", out / "test.csv", out / "truth.csv"]
    write_csv(train, paths[0])
    write_csv(test, paths[1])
    with open(paths[2], "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["feature", "weight", "relevant"])
        for name, wd, r in zip(train.names(), w, relevant):
            wr.writerow([name, repr(float(wd)), int(r)])
    write_manifest(out / "manifest.json", args, started, paths)
    return 0


def cmd_train(args):
    started = _now()
    data = load_csv(args.data, args.label)
    stats = fit_standardize(data)
    data_s = apply_standardize(stats, data)
    report = None
    if args.algo == "mle":
        model = train_mle(data_s, OptimizerConfig(max_iter=args.max_iter))
    elif args.algo == "slr":
        model, report = train_slr(data_s, _ard_config(args))
    else:
        sigma = args.sigma
        if sigma is None:
            plan = CvPlan(args.cv_folds, args.sigma_grid, args.seed)
            scores = cv_scores(data, plan, _cslr_config(args), jobs=args.jobs)
            best = max(a for _, a in scores)
            sigma = max(s for s, a in scores if a == best)
            log.info("cross-validated bandwidth: %g", sigma)
        model, report = train_cslr(data_s, _cslr_config(args, sigma))
    meta = dict(model.train_meta, seed=args.seed, n_train=data.n_samples)
    model = replace(model, standardization=stats, train_meta=meta)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    outputs = [out]
    if report is not None:
        rpath = Path(args.report) if args.report else out.with_name(out.stem + "_report.csv")
        report.write_csv(rpath)
        outputs.append(rpath)
    write_manifest(_manifest_path(out), args, started, outputs)
    print(f"{args.algo}: {model.n_selected} of {model.dim} features active"
          + (f", sigma={model.bandwidth:g}" if model.bandwidth is not None else ""))
    return 0


def _load_features(path, model_dim, label):
    """Feature matrix and labels (if a ``label`` column is present) from a headed CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    if label in header:
        data = load_csv(path, label)
        return data.attributes, data.labels
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError:
                raise NonNumericCell(r, "?", ",".join(rec)) from None
    return np.array(rows, dtype=np.float64).reshape(-1, len(header)), None


def cmd_predict(args):
    started = _now()
    model = load_model(args.model)
    X, t = _load_features(args.data, model.dim, args.label)
    if X.shape[1] != model.dim:
        raise DimensionMismatch(f"data has {X.shape[1]} features, model expects {model.dim}")
    Z = model.transform(X)
    prob = predict_prob(model, Z)
    lab = predict_label(model, Z)
    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["row", "probability", "label"])
        for i, (p, l) in enumerate(zip(prob, lab)):
            wr.writerow([i, repr(float(p)), int(l)])
    write_manifest(_manifest_path(out), args, started, [out])
    if t is not None:
        print(f"accuracy: {accuracy(lab, t):.4f}")
    return 0


def cmd_cv(args):
    started = _now()
    data = load_csv(args.data, args.label)
    plan = CvPlan(args.cv_folds, args.sigma_grid, args.seed)
    scores = cv_scores(data, plan, _cslr_config(args), jobs=args.jobs)
    best = max(a for _, a in scores)
    sigma = max(s for s, a in scores if a == best)
    if args.out:
        out = Path(args.out)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["sigma", "cv_accuracy"])
            for s, a in scores:
                wr.writerow([repr(s), repr(a)])
        write_manifest(_manifest_path(out), args, started, [out])
    print(f"selected sigma: {sigma:g}")
    return 0


def cmd_bench(args):
    started = _now()
    spec = BenchSpec(
        synthetic=SyntheticSpec(args.n_train, args.n_test, args.dim, args.relevant, args.seed),
        modes=args.modes, proportions=args.props, noise_stds=args.stds,
        n_repetitions=args.reps, algorithms=args.algos, seed=args.seed,
        sigma=args.sigma_fixed, sigma_selection=args.sigma_selection,
        cv_plan=CvPlan(args.cv_folds, args.sigma_grid, args.seed),
        ard=_ard_config(args), cslr=_cslr_config(args), record_timing=args.record_timing)
    result = run_benchmark(spec, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    raw, agg = out / "bench_raw.csv", out / "bench_aggregate.csv"
    result.write_raw_csv(raw)
    result.write_aggregate_csv(agg)
    write_manifest(out / "manifest.json", args, started, [raw, agg])
    failed = sum(1 for r in result.rows if r["error"])
    if failed:
        log.warning("%d of %d runs failed; see the error column", failed, len(result.rows))
    if result.rows and failed == len(result.rows):
        return EXIT_NUMERIC
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="cslr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate the sparse synthetic task")
    s.add_argument("--dim", type=int, default=500)
    s.add_argument("--relevant", type=int, default=5)
    s.add_argument("--n-train", type=int, default=300)
    s.add_argument("--n-test", type=int, default=300)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--contaminate", choices=("none", "sample", "arbitrary"), default="none")
    s.add_argument("--prop", type=float, default=0.0)
    s.add_argument("--std", type=float, default=1.0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_synth)

    def data_flags(q):
        q.add_argument("--data", required=True, help="CSV file with a header row")
        q.add_argument("--label", default="label", help="label column name or 0-based index")

    def cv_flags(q):
        q.add_argument("--cv-folds", type=int, default=5)
        q.add_argument("--sigma-grid", type=_floats, default=DEFAULT_BANDWIDTHS)
        q.add_argument("--jobs", type=int, default=1)
        q.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="fit a model on a CSV file")
    data_flags(t)
    t.add_argument("--algo", choices=("cslr", "slr", "mle"), required=True)
    t.add_argument("--out", required=True, help="model file (JSON)")
    t.add_argument("--report", help="training trace CSV (default: <model>_report.csv)")
    g = t.add_mutually_exclusive_group()
    g.add_argument("--sigma", type=float, help="CSLR kernel bandwidth")
    g.add_argument("--sigma-cv", action="store_true",
                   help="choose the bandwidth by cross-validation (default for cslr)")
    _add_ard_flags(t)
    _add_cslr_flags(t)
    cv_flags(t)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="apply a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--label", default="label",
                    help="label column to drop if present (used to report accuracy)")
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    c = sub.add_parser("cv", help="cross-validate the CSLR bandwidth")
    data_flags(c)
    c.add_argument("--out", help="CSV of per-bandwidth accuracy")
    _add_ard_flags(c)
    _add_cslr_flags(c)
    cv_flags(c)
    c.set_defaults(func=cmd_cv)

    b = sub.add_parser("bench", help="Monte-Carlo robustness benchmark on synthetic data")
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--props", type=_floats, default=DEFAULT_PROPORTIONS)
    b.add_argument("--stds", type=_floats, default=DEFAULT_NOISE_STDS)
    b.add_argument("--modes", type=_names, default=("sample", "arbitrary"))
    b.add_argument("--algos", type=_names, default=("slr", "cslr"))
    b.add_argument("--dim", type=int, default=500)
    b.add_argument("--relevant", type=int, default=5)
    b.add_argument("--n-train", type=int, default=300)
    b.add_argument("--n-test", type=int, default=300)
    b.add_argument("--sigma-fixed", type=float, default=None)
    b.add_argument("--sigma-selection", choices=("per-repetition", "per-cell"),
                   default="per-repetition")
    b.add_argument("--record-timing", action="store_true",
                   help="fill wall_time_ms (makes output run-dependent)")
    b.add_argument("--out", default="bench_out")
    _add_ard_flags(b)
    _add_cslr_flags(b)
    cv_flags(b)
    b.set_defaults(func=cmd_bench)
    return p


def _setup_logging():
    level = os.environ.get("ARD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with deterministic_blas():
            return args.func(args)
    except (ValueError, MissingColumn) as exc:
        if isinstance(exc, DataError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
