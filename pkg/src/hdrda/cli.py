"""Command-line interface: ``hdrda {fit,predict,cv,simulate,rank-features}``.

Summaries go to stdout as ``key=value`` pairs on a single line. Exit codes:
0 on success, 1 when a computation fails, 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import data_io
from .errors import ComputationError, DimensionMismatch, HdrdaError, InputError
from .estimator import Parameterization, discriminant_scores
from .model_selection import DEFAULT_FOLDS, TuningGrid, cross_validate, default_grid, fit
from .reduction import DEFAULT_TOLERANCE
from .simulation import SimulationConfig, hdrda_classifier, run_experiment

DEFAULT_SEED = 1

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(**pairs):
    print(" ".join(f"{k}={_fmt(v)}" for k, v in pairs.items()))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--folds", type=_positive_int, default=DEFAULT_FOLDS,
                        help="cross-validation folds (default %(default)s)")
    common.add_argument("--parameterization", choices=[p.value for p in Parameterization],
                        default="ridge", help="alpha_k = 1 (ridge) or 1 - gamma (convex)")
    common.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                        help="eigenvalue cutoff for the reduced subspace (default %(default)s)")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--label-column", default="label")
    common.add_argument("--delimiter", default=",")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hdrda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a model and save it")
    p.add_argument("train")
    p.add_argument("--lambda", dest="lambda_", type=float,
                   help="pooling parameter; with --gamma omitted too, both are cross-validated")
    p.add_argument("--gamma", type=float)
    p.add_argument("--output", "-o", required=True, help="model file to write")

    p = sub.add_parser("predict", parents=[common], help="classify a data file")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--output", "-o", required=True, help="CSV of predicted labels")
    p.add_argument("--scores", action="store_true", help="add one score column per class")

    p = sub.add_parser("cv", parents=[common], help="cross-validate over a tuning grid")
    p.add_argument("train")
    p.add_argument("--lambdas", type=_floats, help="comma-separated lambda candidates")
    p.add_argument("--gammas", type=_floats, help="comma-separated gamma candidates")
    p.add_argument("--output", "-o", required=True, help="CSV of the error grid")

    p = sub.add_parser("simulate", parents=[common], help="run the contaminated-normal study")
    p.add_argument("--p-list", type=_ints, default=[100])
    p.add_argument("--epsilon-list", type=_floats, default=[0.0, 0.25, 0.5])
    p.add_argument("--replications", type=_positive_int, default=50)
    p.add_argument("--n-train", type=_positive_int, default=25, help="training rows per class")
    p.add_argument("--n-test", type=_positive_int, default=2000, help="test rows per class")
    p.add_argument("--rho", type=_floats, default=[0.1, 0.5, 0.9])
    p.add_argument("--eta", type=float, default=100.0)
    p.add_argument("--block-size", type=_positive_int, default=100)
    p.add_argument("--output", "-o", required=True, help="CSV of per-replication errors")

    p = sub.add_parser("rank-features", parents=[common], help="BSS/WSS feature ranking")
    p.add_argument("train")
    p.add_argument("--output", "-o", required=True, help="CSV of feature scores")
    p.add_argument("--top", type=_positive_int, help="keep this many features")
    p.add_argument("--reduced-output", help="write the training data restricted to --top features")
    p.add_argument("--apply", help="another data file to restrict to the same features")
    p.add_argument("--apply-output")
    return parser


def _check_params(param, lam, gam):
    try:
        param.check(lam, gam)
    except InputError as exc:
        raise UsageError(str(exc)) from None


def cmd_fit(args):
    param = Parameterization(args.parameterization)
    if (args.lambda_ is None) != (args.gamma is None):
        raise UsageError("--lambda and --gamma must be given together")
    if args.lambda_ is not None:
        _check_params(param, args.lambda_, args.gamma)
    data = data_io.read_dataset(args.train, args.label_column, args.delimiter)
    if args.lambda_ is None:
        report = cross_validate(data, default_grid(param), args.folds, args.seed,
                                args.tolerance, args.threads)
        lam, gam = report.best
    else:
        lam, gam = args.lambda_, args.gamma
    model = fit(data, lam, gam, param, args.tolerance)
    data_io.save_model(model, args.output)
    _emit(n=data.n, p=model.p, q=model.q, k=model.k, r=model.subspace.r,
          parameterization=param.value, **{"lambda": model.lambda_}, gamma=model.gamma)


def cmd_predict(args):
    model = data_io.load_model(args.model)
    x, labels, _ = data_io.read_table(args.data, args.label_column, args.delimiter,
                                      require_label=False)
    if x.shape[1] != model.p:
        raise DimensionMismatch(model.p, x.shape[1])
    scores = discriminant_scores(model, x)
    pred = model.classes[np.argmin(scores, axis=1)]
    out = Path(args.output)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["label"]
        if args.scores:
            header += [f"score_{c}" for c in model.classes.tolist()]
        writer.writerow(header)
        for t, label in enumerate(pred.tolist()):
            row = [label]
            if args.scores:
                row += [repr(float(s)) for s in scores[t]]
            writer.writerow(row)
    summary = {"n": len(pred)}
    if labels is not None:
        summary["error"] = float(np.mean(np.asarray(labels) != pred.astype(str)))
    _emit(**summary)


def cmd_cv(args):
    param = Parameterization(args.parameterization)
    grid = default_grid(param)
    try:
        grid = TuningGrid.from_values(grid.lambdas if args.lambdas is None else args.lambdas,
                                      grid.gammas if args.gammas is None else args.gammas, param)
    except InputError as exc:
        raise UsageError(str(exc)) from None
    data = data_io.read_dataset(args.train, args.label_column, args.delimiter)
    report = cross_validate(data, grid, args.folds, args.seed, args.tolerance, args.threads)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "gamma", "misclassified", "error"])
        for g, lam in enumerate(grid.lambdas):
            for h, gam in enumerate(grid.gammas):
                writer.writerow([repr(float(lam)), repr(float(gam)),
                                 int(report.misclassified[g, h]), repr(float(report.errors[g, h]))])
    lam, gam = report.best
    g, h = int(np.searchsorted(grid.lambdas, lam)), int(np.searchsorted(grid.gammas, gam))
    _emit(**{"lambda": lam}, gamma=gam, cv_error=float(report.errors[g, h]),
          grid=f"{grid.shape[0]}x{grid.shape[1]}", folds=args.folds, seed=args.seed)


def cmd_simulate(args):
    param = Parameterization(args.parameterization)
    name = f"hdrda-{param.value}"
    classifiers = {name: hdrda_classifier(param, args.folds, args.seed)}
    configs = []
    try:
        for p in args.p_list:
            for eps in args.epsilon_list:
                configs.append(SimulationConfig(
                    p=p, block_size=args.block_size, rho=tuple(args.rho), epsilon=eps,
                    eta=args.eta, n_train=(args.n_train,) * len(args.rho), n_test=args.n_test,
                    replications=args.replications, seed=args.seed))
    except InputError as exc:
        raise UsageError(str(exc)) from None

    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replication", "classifier", "p", "epsilon", "error"])
        for cfg in configs:
            result = run_experiment(cfg, classifiers, args.threads)
            for rep, clf, p, eps, err in result.records:
                writer.writerow([rep, clf, p, repr(float(eps)), repr(err)])
            fh.flush()
            for clf, (mean, se) in result.summary().items():
                _emit(classifier=clf, p=cfg.p, epsilon=cfg.epsilon, mean_error=mean, se=se,
                      replications=cfg.replications)


def cmd_rank_features(args):
    data = data_io.read_dataset(args.train, args.label_column, args.delimiter)
    ranking = data_io.bss_wss_ranking(data)
    names = data.feature_names
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "feature", "index", "score"])
        for rank, j in enumerate(ranking.order.tolist(), start=1):
            score = ranking.scores[j]
            writer.writerow([rank, names[j], j, "inf" if np.isinf(score) else repr(float(score))])
    summary = {"p": data.p}
    if args.top is not None:
        try:
            reduced, kept = data_io.select_features(data, ranking, args.top)
        except InputError as exc:
            raise UsageError(str(exc)) from None
        summary["kept"] = len(kept)
        if args.reduced_output:
            data_io.write_dataset(args.reduced_output, reduced, args.label_column, args.delimiter)
        if args.apply:
            if not args.apply_output:
                raise UsageError("--apply requires --apply-output")
            other = data_io.read_dataset(args.apply, args.label_column, args.delimiter)
            if other.p != data.p:
                raise DimensionMismatch(data.p, other.p)
            data_io.write_dataset(args.apply_output, other.with_columns(kept),
                                  args.label_column, args.delimiter)
    elif args.reduced_output or args.apply:
        raise UsageError("--reduced-output and --apply require --top")
    _emit(**summary)


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "simulate": cmd_simulate,
    "rank-features": cmd_rank_features,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hdrda {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"hdrda {args.command}: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as exc:
        print(f"hdrda {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ComputationError, HdrdaError, np.linalg.LinAlgError) as exc:
        print(f"hdrda {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
