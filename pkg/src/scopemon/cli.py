"""``scopemon`` command line: power, calibrate, monitor, evaluate.

Exit codes: 0 success, 1 error, 2 power analysis found no window size with
power 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import model as model_io
from .distances import ALL_KINDS, DistanceKind, EsParams
from .errors import IdMismatch, ParseError, ScopeError
from .estimators import FitForm, calibrate, default_form, write_points_csv
from .features import FeatureMatrix, fit_pca, pca_transform, read_csv
from .monitor import (
    AggregateRule,
    Monitor,
    MonitorConfig,
    dump_jsonl,
    load_jsonl,
    score_confusion,
    threshold_sweep,
    window_truth,
)
from .resampling import power_analysis

EXIT_OK, EXIT_ERROR, EXIT_NO_NSTAR = 0, 1, 2


def _sizes(text):
    text = text.strip()
    if ":" in text:
        start, stop, step = (int(v) for v in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(",") if v.strip()]


def _kinds(text):
    return tuple(DistanceKind.parse(k) for k in text.split(",") if k.strip())


def _forms(text):
    forms = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        kind, _, form = item.partition("=")
        if not form:
            raise ScopeError(f"--forms entries look like KIND=FORM, got {item!r}")
        forms[DistanceKind.parse(kind)] = FitForm.parse(form)
    return forms


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        model_io.atomic_write(path, text)


def _fmt(value):
    return "null" if value is None else repr(float(value))


def cmd_power(args):
    train = read_csv(args.train_csv)
    ood = read_csv(args.ood_csv)
    if train.cols != ood.cols:
        raise ScopeError(f"train has {train.cols} features, ood has {ood.cols}")
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    order = rng.permutation(train.rows)
    n_in = int(round(args.holdout * train.rows))
    if not 0 < n_in < train.rows:
        raise ScopeError(f"--holdout {args.holdout} leaves an empty reference or in-scope split")
    in_scope, reference = train.data[order[:n_in]], train.data[order[n_in:]]
    curve = power_analysis(in_scope, ood.data, reference, _sizes(args.sizes), args.kind,
                           args.alpha, args.trials, args.seed)
    report = {
        "kind": curve.kind.value,
        "alpha": curve.alpha,
        "trials": curve.trials,
        "level": curve.level,
        "sizes": list(curve.sizes),
        "power": list(curve.power),
        "n_star": curve.n_star,
    }
    _emit(json.dumps(report, indent=1) + "\n", args.out)
    if args.csv:
        model_io.atomic_write(args.csv, _csv_text(["size", "power"], curve.rows()))
    return EXIT_OK if curve.n_star is not None else EXIT_NO_NSTAR


def cmd_calibrate(args):
    cal = read_csv(args.cal_csv)
    if cal.correct is None:
        raise ScopeError(f"{args.cal_csv} has no `correct` column")
    ref_raw = read_csv(args.ref_csv)
    if ref_raw.cols != cal.cols:
        raise ScopeError(f"reference has {ref_raw.cols} features, calibration has {cal.cols}")
    pca = fit_pca(ref_raw, args.target_variance, standardize=args.standardize)
    reference = FeatureMatrix(pca_transform(pca, ref_raw).data)
    cal_z = pca_transform(pca, cal)
    kinds = _kinds(args.kinds)
    forms = {k: default_form(k) for k in kinds}
    forms.update(_forms(args.forms))
    _, points, scues = calibrate(cal_z, reference, kinds, args.n, args.m, args.seed, forms)

    ref_path = None
    if args.ref_by_path:
        ref_file = Path(args.ref_by_path)
        header = [f"f{i}" for i in range(reference.cols)]
        model_io.atomic_write(ref_file, _csv_text(header, [[repr(float(v)) for v in row]
                                                           for row in reference.data]))
        out_dir = Path(args.out).resolve().parent
        try:
            ref_path = str(ref_file.resolve().relative_to(out_dir))
        except ValueError:
            ref_path = str(ref_file.resolve())
    scope = model_io.ScopeModel(pca, reference, scues, args.window or args.n, args.seed,
                                EsParams(), ref_path)
    model_io.save(scope, args.out)

    lines = [f"pca components={pca.k} explained={float(pca.explained_ratio.sum())!r}"]
    for kind in kinds:
        s = scues[kind]
        x, u = np.array(points[kind]).T
        rho = stats.spearmanr(x, u).statistic
        lines.append(f"{kind.value} form={s.form.value} rmse={s.fit_rmse!r} r2={s.fit_r2!r} "
                     f"spearman={float(rho)!r}")
        if args.points_dir:
            Path(args.points_dir).mkdir(parents=True, exist_ok=True)
            write_points_csv(Path(args.points_dir) / f"points_{kind.value}.csv", points[kind])
    print("\n".join(lines))
    return EXIT_OK


def _read_truth(path):
    truth = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"window_id", "inaccuracy"} <= set(reader.fieldnames):
            raise ParseError(path, 1, "truth CSV needs columns window_id, inaccuracy")
        for line_no, row in enumerate(reader, start=2):
            try:
                wid, inacc = int(row["window_id"]), float(row["inaccuracy"])
            except (TypeError, ValueError) as exc:
                raise ParseError(path, line_no, str(exc)) from None
            if not 0.0 <= inacc <= 1.0:
                raise ParseError(path, line_no, f"inaccuracy {inacc} outside [0, 1]")
            truth[wid] = inacc
    return truth


def _pair(reports, truth):
    report_ids = {r.window_id for r in reports}
    missing = sorted(report_ids ^ set(truth))
    if missing:
        raise IdMismatch(f"report and truth window ids differ: {missing[:20]}", missing)
    return [(r, truth[r.window_id]) for r in reports]


def _confusion_rows(pairs, kinds, threshold):
    rows = []
    for kind in kinds:
        c = score_confusion(pairs, threshold, kind)
        rows.append([kind.value, c.rejected, c.false_rejects, c.missed, c.total])
    c = score_confusion(pairs, threshold)
    rows.append(["WINDOW", c.rejected, c.false_rejects, c.missed, c.total])
    return rows


CONFUSION_HEADER = ["kind", "Rej", "FR", "Missed", "total"]


def cmd_monitor(args):
    scope = model_io.load(args.model)
    stream = read_csv(args.stream_csv)
    kinds = _kinds(args.kinds) if args.kinds else tuple(scope.scues)
    config = MonitorConfig(scope.window, args.stride, kinds, args.threshold, args.aggregate)
    mon = Monitor(scope.reference, scope.scues, config, scope.es_params)
    reports = mon.run(pca_transform(scope.pca, stream).data) if stream.rows else []

    buf = io.StringIO()
    dump_jsonl(reports, buf)
    _emit(buf.getvalue(), args.out)

    truth = None
    if args.truth:
        truth = _read_truth(args.truth)
    elif stream.correct is not None:
        truth = dict(zip((r.window_id for r in reports), window_truth(stream.correct, reports)))
    if args.truth_out:
        if truth is None:
            raise ScopeError("--truth-out needs a `correct` column in the stream or --truth")
        rows = [[wid, repr(float(v))] for wid, v in sorted(truth.items())]
        model_io.atomic_write(args.truth_out, _csv_text(["window_id", "inaccuracy"], rows))
    if truth is not None:
        for row in _confusion_rows(_pair(reports, truth), kinds, args.threshold):
            print("summary " + " ".join(f"{h}={v}" for h, v in zip(CONFUSION_HEADER, row)),
                  file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args):
    with open(args.reports, encoding="utf-8") as fh:
        reports = load_jsonl(fh)
    pairs = _pair(reports, _read_truth(args.truth_csv))
    kinds = []
    for r in reports:
        kinds.extend(k for k in r.per_kind if k not in kinds)
    kinds = [k for k in ALL_KINDS if k in kinds]
    _emit(_csv_text(CONFUSION_HEADER, _confusion_rows(pairs, kinds, args.threshold)), args.out)
    if args.sweep:
        thresholds = _floats(args.thresholds)
        rows = []
        for kind in kinds + [None]:
            for row in threshold_sweep(pairs, thresholds, kind):
                rows.append(["WINDOW" if kind is None else kind.value, repr(row.threshold),
                             _fmt(row.cutoff), _fmt(row.mean_accuracy), row.rejected_count])
        text = _csv_text(["kind", "threshold", "cutoff", "mean_accuracy", "rejected_count"], rows)
        if args.sweep_out:
            model_io.atomic_write(args.sweep_out, text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="scopemon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("power", help="bootstrapped power analysis to choose the window size")
    p.add_argument("train_csv")
    p.add_argument("ood_csv")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--sizes", default="10:200:10", help="start:stop:step or a comma list")
    p.add_argument("--kind", type=DistanceKind.parse, default=DistanceKind.KS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.5,
                   help="share of train rows drawn as in-scope batches; the rest is the reference")
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--csv", help="also write size,power rows here")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("calibrate", help="fit PCA and one SCUE per distance kind")
    p.add_argument("cal_csv")
    p.add_argument("ref_csv")
    p.add_argument("--out", required=True, help="scope model JSON path")
    p.add_argument("--n", type=int, default=50, help="rows per calibration batch")
    p.add_argument("--m", type=int, default=20, help="calibration batches minus one")
    p.add_argument("--kinds", default=",".join(k.value for k in ALL_KINDS))
    p.add_argument("--forms", default="", help="overrides such as ES=sigmoid3,KS=poly2")
    p.add_argument("--target-variance", type=float, default=0.85)
    p.add_argument("--standardize", action="store_true", help="z-score features before PCA")
    p.add_argument("--window", type=int, help="monitor window size (default --n)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ref-by-path", help="store reference features in this CSV instead of the JSON")
    p.add_argument("--points-dir", help="write calibration points CSVs into this directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("monitor", help="run the monitor over a recorded stream")
    p.add_argument("stream_csv")
    p.add_argument("model")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--stride", type=int, help="default: the window size (tumbling windows)")
    p.add_argument("--aggregate", type=AggregateRule.parse, default=AggregateRule.PER_KIND)
    p.add_argument("--kinds", help="subset of the model's kinds")
    p.add_argument("--out", help="JSON-lines report path (default stdout)")
    p.add_argument("--truth", help="per-window truth CSV (window_id, inaccuracy)")
    p.add_argument("--truth-out", help="write per-window truth derived from the stream labels")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("evaluate", help="Rej/FR/Missed tables and threshold sweeps")
    p.add_argument("reports")
    p.add_argument("truth_csv")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--thresholds", default=",".join(f"{t / 10:.1f}" for t in range(11)))
    p.add_argument("--out", help="confusion CSV path (default stdout)")
    p.add_argument("--sweep-out", help="sweep CSV path (default stdout)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScopeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
