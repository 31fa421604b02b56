"""Command-line front end.

Subcommands: ingest, train, attack, sweep, verify, report. Every run is a
pure function of (input artifacts, flags, seed): outputs carry no timestamps
and repeated invocations rewrite byte-identical files. Input artifacts are
never modified.

Exit codes: 0 success, 2 usage or config error, 3 missing artifact,
4 numeric failure (divergence, violated hard check).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import data, metrics, plot, sweep, synthetic, theory, training
from .attacks import OBJECTIVES, AttackConfig, run_attack, trace_csv_lines
from .errors import (DegenerateDataError, DomainError, NumericError,
                     SchemaError, TrainingError)
from .mlp import forward, load_model, save_model
from .training import MODES, TrainConfig

DATASET_IDS = ("adult", "compas", "german")
SUITES = ("gap-bound", "alignment", "loss-transfer", "shift-transfer",
          "perturbed-gap", "all")
HARD_SUITES = ("gap-bound", "alignment", "perturbed-gap")
_SUITE_FILES = {"gap-bound": "gap_bound.csv", "alignment": "alignment.csv",
                "loss-transfer": "loss_transfer.csv",
                "shift-transfer": "shift_transfer.csv",
                "perturbed-gap": "perturbed_gap.csv"}


def _write_lines(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("wrote %s" % path)


def _resolve_artifact(token: str, out_dir: str, suffix: str) -> Path:
    """Accept either a literal path or a bare name living in the out dir."""
    p = Path(token)
    if p.is_file():
        return p
    for cand in (Path(out_dir) / (token + suffix), Path(token + suffix)):
        if cand.is_file():
            return cand
    raise FileNotFoundError("no such artifact: %s (looked for %s)"
                            % (token, token + suffix))


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        if ":" in text:
            lo, hi, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise DomainError("grid step must be positive")
            count = int(round((hi - lo) / step))
            vals = tuple(round(lo + k * step, 10) for k in range(count + 1))
            return tuple(v for v in vals if v <= hi + 1e-12)
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise DomainError(f"cannot parse float list {text!r}") from exc


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise DomainError(f"cannot parse integer list {text!r}") from exc


def _eval_threshold(model):
    return model.group_thresholds if model.group_thresholds is not None else 0.5


# ---------------------------------------------------------------- ingest


def cmd_ingest(args) -> int:
    out = Path(args.out)
    if args.csv:
        if not os.path.isfile(args.csv):
            raise SchemaError(f"csv file not found: {args.csv}")
        if args.schema:
            if not os.path.isfile(args.schema):
                raise SchemaError(f"schema file not found: {args.schema}")
            schema = data.read_schema(args.schema)
        elif args.dataset:
            schema = data.read_schema(data.packaged_schema_path(args.dataset))
        else:
            raise SchemaError("--csv needs --schema or a known dataset id")
        name = args.dataset or Path(args.csv).stem
        csv_path = Path(args.csv)
    else:
        if args.dataset not in DATASET_IDS:
            raise SchemaError(
                f"unknown dataset id {args.dataset!r}; use --csv/--schema "
                f"for custom data (known ids: {', '.join(DATASET_IDS)})")
        name = args.dataset
        frame = synthetic.generate(args.dataset, n_rows=args.rows,
                                   seed=args.data_seed)
        csv_path = out / f"{name}.csv"
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        synthetic.write_csv(frame, csv_path)
        print("wrote %s" % csv_path)
        schema = data.read_schema(data.packaged_schema_path(args.dataset))

    ds = data.load_csv(csv_path, schema, split_fraction=args.split,
                       seed=args.seed)
    data.save_dataset(ds, out / f"{name}.dataset")
    print("wrote %s" % (out / f"{name}.dataset"))
    data.write_stats_sidecar(ds, out / f"{name}.stats")
    print("wrote %s" % (out / f"{name}.stats"))

    n_train = int((ds.split == "train").sum())
    n_test = int((ds.split == "test").sum())
    print("rows %d (train %d / test %d), features %d, dropped %d, filtered %d"
          % (len(ds.labels), n_train, n_test, ds.n_features,
             ds.dropped_rows, ds.filtered_rows))
    for split in ("train", "test"):
        counts = data.group_counts(ds, split)
        print("%s cells %s" % (split, " ".join(
            "y%d,a%d=%d" % (y, a, counts[(y, a)]) for y in (0, 1) for a in (0, 1))))
    return 0


# ----------------------------------------------------------------- train


def _train_config_from_args(args) -> TrainConfig:
    return TrainConfig(mode=args.mode, epochs=args.epochs,
                       batch_size=args.batch, lr=args.lr,
                       train_epsilon=args.eps,
                       inner_iterations=args.inner_iters,
                       fairness_weight=getattr(args, "lambda"),
                       seed=args.seed)


def cmd_train(args) -> int:
    ds = data.load_dataset(_resolve_artifact(args.dataset, args.out, ".dataset"))
    cfg = _train_config_from_args(args)
    result = training.train(ds, cfg)

    out = Path(args.out)
    name = args.name or args.mode
    save_model(result.model, out / f"{name}.model")
    print("wrote %s" % (out / f"{name}.model"))
    _write_lines(out / f"{name}.trainlog.csv", training.log_csv_lines(result))

    last = result.log[-1]
    print("final epoch %d loss %.6g ce %.6g fair %.6g train_acc %.6g"
          % (last.epoch, last.loss, last.ce, last.fair_term, last.train_acc))
    report = metrics.hard_report(result.model, ds, "test")
    print("clean test: " + metrics.report_csv_row(0.0, report))
    return 0


# ---------------------------------------------------------------- attack


def cmd_attack(args) -> int:
    ds = data.load_dataset(_resolve_artifact(args.dataset, args.out, ".dataset"))
    model = load_model(_resolve_artifact(args.model, args.out, ".model"))
    view = ds.view(args.split)
    cfg = AttackConfig(objective=args.objective, epsilon=args.eps,
                       step=args.step, iterations=args.iters)
    result = run_attack(model, view, cfg)

    out = Path(args.out)
    name = args.name or ("attack_%s_eps%.4g" % (args.objective, args.eps))
    _write_lines(out / f"{name}.trace.csv", trace_csv_lines(result))

    threshold = _eval_threshold(model)
    clean = metrics.report_from_arrays(result.soft_trajectory[0], view.labels,
                                       view.sensitive, threshold)
    adv = metrics.report_from_arrays(result.soft_trajectory[-1], view.labels,
                                     view.sensitive, threshold)
    _write_lines(out / f"{name}.report.csv",
                 [metrics.REPORT_CSV_HEADER,
                  metrics.report_csv_row(0.0, clean),
                  metrics.report_csv_row(args.eps, adv)])
    if args.save_features:
        rows = [" ".join("%.17g" % v for v in row) for row in result.features_adv]
        _write_lines(out / f"{name}.advfeatures.txt", rows)
    print("objective %s: %.17g -> %.17g"
          % (args.objective, result.objective_values[0],
             result.objective_values[-1]))
    return 0


# ----------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    ds = data.load_dataset(_resolve_artifact(args.dataset, args.out, ".dataset"))
    spec = sweep.SweepSpec(
        dataset_id=args.dataset_id or Path(args.dataset).stem,
        modes=tuple(args.modes.split(",")),
        objective=args.objective,
        grid=_parse_floats(args.grid),
        seeds=_parse_ints(args.seeds),
        train_epsilon=args.train_eps,
        attack_iterations=args.iters,
        epochs=args.epochs, batch_size=args.batch, lr=args.lr,
        fairness_weight=getattr(args, "lambda"),
        threads=args.threads)
    outcome = sweep.run_sweep(ds, spec)

    out = Path(args.out)
    for (mode, seed), trained in sorted(outcome.trained.items()):
        save_model(trained.model, out / ("model_%s_seed%d.model" % (mode, seed)))
        print("wrote %s" % (out / ("model_%s_seed%d.model" % (mode, seed))))
    _write_lines(out / "rows.csv", sweep.rows_csv_lines(outcome))
    for mode in spec.modes:
        _write_lines(out / f"curve_{mode}.csv",
                     sweep.curve_csv_lines(outcome, mode))
    if args.plot:
        for attr, label in (("accuracy", "accuracy"), ("di_hard", "di"),
                            ("eod_hard", "eod")):
            series = sweep.curve_series(outcome, attr)
            if not series:
                continue
            svg = plot.curves_svg(
                "%s under %s attack" % (label, spec.objective),
                "attack radius", label, series)
            path = out / f"plot_{label}.svg"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(svg)
            print("wrote %s" % path)

    n_deg = sum(1 for r in outcome.rows if r.status != "ok")
    print("sweep rows %d (degenerate %d)" % (len(outcome.rows), n_deg))
    return 0


# ---------------------------------------------------------------- verify


def _verify_gap_bound(model, view, eps, iters, out):
    """Odds-gap lower bound on clean scores and on both attacked score sets."""
    cases = [("clean", forward(model, view.features).soft_labels)]
    for objective in ("di", "eod"):
        cfg = AttackConfig(objective=objective, epsilon=eps, iterations=iters)
        cases.append(("%s_attack" % objective,
                      run_attack(model, view, cfg).soft_trajectory[-1]))
    lines = ["case,lhs,rhs,holds"]
    ok = True
    for label, soft in cases:
        lhs, rhs, holds = theory.check_odds_gap_lower_bound(
            soft, view.labels, view.sensitive)
        ok &= holds
        lines.append("%s,%.17g,%.17g,%d" % (label, lhs, rhs, int(holds)))
    _write_lines(out / _SUITE_FILES["gap-bound"], lines)
    return ok


def _verify_alignment(model, view, out):
    fractions = theory.check_attack_sign_alignment(model, view,
                                                   _eval_threshold(model))
    lines = ["cell,group,role,fraction,holds"]
    ok = True
    for (kind, group), frac in sorted(fractions.items()):
        role = metrics.SubgroupPartition.alignment(kind, group)
        if frac is None:
            lines.append("%s,%d,%s,," % (kind, group, role))
            continue
        holds = frac == 1.0
        ok &= holds
        lines.append("%s,%d,%s,%.17g,%d" % (kind, group, role, frac, int(holds)))
    _write_lines(out / _SUITE_FILES["alignment"], lines)
    return ok


def _verify_transfer(model, view, eps, iters, k_pairs, seed, out, which):
    if which == "loss-transfer":
        audits = theory.audit_fairness_attack_loss_gap(
            model, view, eps, iterations=iters, k_pairs=k_pairs, seed=seed)
    else:
        audits = theory.audit_accuracy_attack_soft_shift(
            model, view, eps, iterations=iters, k_pairs=k_pairs, seed=seed)
    lines = []
    for audit in audits:
        lines += theory.audit_csv_lines(audit)
        print("%s: %d pairs, %d violations%s"
              % (audit.kind, len(audit.pairs), audit.n_violations,
                 " (skipped: %s)" % audit.skipped if audit.skipped else ""))
    _write_lines(out / _SUITE_FILES[which], lines)


def _verify_perturbed_gap(model, view, eps, iters, out):
    lhs, rhs, holds = theory.check_perturbed_gap_bound(model, view, eps,
                                                       iterations=iters)
    _write_lines(out / _SUITE_FILES["perturbed-gap"],
                 ["epsilon,lhs,rhs,holds",
                  "%.17g,%.17g,%.17g,%d" % (eps, lhs, rhs, int(holds))])
    return holds


def cmd_verify(args) -> int:
    ds = data.load_dataset(_resolve_artifact(args.dataset, args.out, ".dataset"))
    model = load_model(_resolve_artifact(args.model, args.out, ".model"))
    view = ds.view(args.split)
    out = Path(args.out)
    wanted = SUITES[:-1] if args.suite == "all" else (args.suite,)

    failed = []
    for suite in wanted:
        if suite == "gap-bound":
            if not _verify_gap_bound(model, view, args.eps, args.iters, out):
                failed.append(suite)
        elif suite == "alignment":
            if not _verify_alignment(model, view, out):
                failed.append(suite)
        elif suite == "perturbed-gap":
            if not _verify_perturbed_gap(model, view, args.eps, args.iters, out):
                failed.append(suite)
        else:
            _verify_transfer(model, view, args.eps, args.iters,
                             args.k_pairs, args.seed, out, suite)

    if failed:
        print("hard checks FAILED: %s" % ", ".join(failed), file=sys.stderr)
        return 4
    print("hard checks passed (%s)"
          % ", ".join(s for s in wanted if s in HARD_SUITES))
    return 0


# ---------------------------------------------------------------- report


def cmd_report(args) -> int:
    all_rows = []
    for token in args.inputs:
        path = Path(token)
        if not path.is_file():
            raise FileNotFoundError("no such sweep file: %s" % token)
        with open(path) as fh:
            _, rows = sweep.parse_rows_csv(fh)
        all_rows.extend(rows)
    merged = sweep.merge_rows(all_rows)
    out = Path(args.out)
    _write_lines(out / f"{args.name}.csv",
                 ["# report v1", "# sources %d" % len(args.inputs)] + merged)
    print("merged %d rows into %d keys" % (len(all_rows), len(merged) - 1))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairadv",
        description="Fairness-targeted attacks, fair adversarial training, "
                    "and bound audits for tabular binary classifiers.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed (default 0)")
    common.add_argument("--out", default=".",
                        help="output directory (default current)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker pool size for sweeps (default 1)")
    common.add_argument("--plot", action="store_true",
                        help="also emit SVG curve plots (sweep only)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="build a normalized split dataset artifact")
    p.add_argument("dataset", nargs="?",
                   help="dataset id (%s) or omit with --csv/--schema"
                        % "/".join(DATASET_IDS))
    p.add_argument("--csv", help="ingest this CSV instead of generating data")
    p.add_argument("--schema", help="schema file for --csv")
    p.add_argument("--rows", type=int, default=None,
                   help="row count for generated data")
    p.add_argument("--data-seed", type=int, default=7,
                   help="seed for generated data (default 7)")
    p.add_argument("--split", type=float, default=0.8,
                   help="train fraction (default 0.8)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common],
                       help="train one model on a dataset artifact")
    p.add_argument("dataset", help="dataset artifact path or name")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--eps", type=float, default=0.0,
                   help="training attack radius (default 0)")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--lambda", type=float, default=1.0,
                   help="odds-gap penalty weight for fair_adv_in")
    p.add_argument("--inner-iters", type=int, default=7,
                   help="attack steps inside training (default 7)")
    p.add_argument("--name", default=None,
                   help="output stem (default: the mode name)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", parents=[common],
                       help="attack one model, write trace and report")
    p.add_argument("dataset", help="dataset artifact path or name")
    p.add_argument("model", help="model file path or name")
    p.add_argument("--objective", choices=OBJECTIVES, default="di")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--step", type=float, default=None,
                   help="step size (default eps/10)")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--save-features", action="store_true",
                   help="also write the adversarial feature matrix")
    p.add_argument("--name", default=None, help="output stem")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", parents=[common],
                       help="train modes x seeds, attack across an eps grid")
    p.add_argument("dataset", help="dataset artifact path or name")
    p.add_argument("--modes", required=True,
                   help="comma list of training modes")
    p.add_argument("--objective", choices=OBJECTIVES, default="di")
    p.add_argument("--grid", default="0.0:0.5:0.05",
                   help="eps grid, 'lo:hi:step' or comma list "
                        "(default 0.0:0.5:0.05)")
    p.add_argument("--seeds", default="0,1,2", help="comma list of seeds")
    p.add_argument("--train-eps", type=float, default=0.0,
                   help="training attack radius for adversarial modes")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--lambda", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=20,
                   help="evaluation attack steps (default 20)")
    p.add_argument("--dataset-id", default=None,
                   help="dataset label in report rows (default: file stem)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common],
                       help="run verification suites against one model")
    p.add_argument("dataset", help="dataset artifact path or name")
    p.add_argument("model", help="model file path or name")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--eps", type=float, default=0.2,
                   help="attack radius for the checks (default 0.2)")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--k-pairs", type=int, default=200,
                   help="pairs for the curvature estimate (default 200)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", parents=[common],
                       help="merge sweep row files into one table")
    p.add_argument("inputs", nargs="+", help="rows.csv files from sweeps")
    p.add_argument("--name", default="merged", help="output stem")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (SchemaError, DomainError, DegenerateDataError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (NumericError, TrainingError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
