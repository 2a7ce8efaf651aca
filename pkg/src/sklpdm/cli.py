"""Command-line front end wiring the modules into reproducible end-to-end runs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every run writes its primary output atomically and drops a
`<output>.manifest.json` recording the command, flags, seed, paths,
version, and wall-clock duration; replaying the manifest's flags
reproduces the outputs byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import baselines
from . import classify_eval
from . import diffusion_map
from . import silhouette_features
from . import sklp_projection
from .dataset import (
    LabeledDataset,
    load_csv,
    save_csv,
    gen_gaussian_classes,
    gen_ring_classes,
    with_groups,
    _dense_ids,
)
from .errors import DataError, NumericalError
from ._util import atomic_write_text, format_float


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _auto_or_float(text):
    if text == "auto":
        return "auto"
    return float(text)


def _auto_or_int(text):
    if text == "auto":
        return "auto"
    return int(text)


def _build_parser():
    parser = _Parser(prog="sklpdm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sklpdm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    synth.add_argument("shape", choices=["gaussian", "rings"])
    synth.add_argument("--classes", type=int, default=3)
    synth.add_argument("--per-class", type=int, default=50)
    synth.add_argument("--dim", type=int, default=10)
    synth.add_argument("--spread", type=float, default=1.0)
    synth.add_argument("--separation", type=float, default=10.0)
    synth.add_argument("--noise", type=float, default=0.1)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--groups", type=int, default=0, help="assign this many round-robin group ids")
    synth.add_argument("--out", required=True)

    radon_cmd = sub.add_parser("radon", help="angle-profile features from silhouette frames")
    radon_cmd.add_argument(
        "--manifest",
        required=True,
        help="CSV with columns path,label[,group], or a plain list of frame paths "
        "(one per line) combined with --label/--group",
    )
    radon_cmd.add_argument("--angles", type=int, default=180)
    radon_cmd.add_argument("--label", default=None, help="label for every frame of a plain-list manifest")
    radon_cmd.add_argument("--group", default=None, help="group id for every frame of a plain-list manifest")
    radon_cmd.add_argument("--out", required=True)

    fit_cmd = sub.add_parser("fit", help="fit a projection model")
    fit_cmd.add_argument("kind", choices=["sklp", "pca", "lda"])
    fit_cmd.add_argument("--data", required=True)
    fit_cmd.add_argument("--dim", type=_auto_or_int, default="auto")
    fit_cmd.add_argument("--rho", type=float, default=0.1)
    fit_cmd.add_argument("--eta", type=float, default=0.1)
    fit_cmd.add_argument("--sigma", type=_auto_or_float, default="auto")
    fit_cmd.add_argument("--tol", type=float, default=1e-6)
    fit_cmd.add_argument("--max-iters", type=int, default=100)
    fit_cmd.add_argument("--out", required=True)

    project_cmd = sub.add_parser("project", help="apply a fitted model to a dataset")
    project_cmd.add_argument("--model", required=True)
    project_cmd.add_argument("--data", required=True)
    project_cmd.add_argument("--out", required=True)

    diffuse = sub.add_parser("diffuse", help="diffusion embedding of a dataset")
    diffuse.add_argument("--data", required=True)
    diffuse.add_argument("--dim", type=int, default=2)
    diffuse.add_argument("--sigma", type=_auto_or_float, default="auto")
    diffuse.add_argument("--time", type=int, default=1)
    diffuse.add_argument("--out", required=True, help="embedding CSV; model JSON lands at <out>.model.json")

    classify = sub.add_parser("classify", help="train on one CSV, evaluate on another")
    classify.add_argument("method", choices=["knn", "svm"])
    classify.add_argument("--train", required=True)
    classify.add_argument("--test", required=True)
    classify.add_argument("--k", type=int, default=1)
    classify.add_argument("--reg", type=float, default=1e-3)
    classify.add_argument("--epochs", type=int, default=200)
    classify.add_argument("--seed", type=int, default=0)
    classify.add_argument("--vote-by-group", action="store_true")
    classify.add_argument("--report", required=True)

    evaluate = sub.add_parser("evaluate", help="leave-one-group-out pipeline evaluation")
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--pipeline", choices=list(classify_eval.PIPELINES), required=True)
    evaluate.add_argument("--classifier", choices=["knn", "svm"], default="knn")
    evaluate.add_argument("--dim", type=_auto_or_int, default="auto")
    evaluate.add_argument("--rho", type=float, default=0.1)
    evaluate.add_argument("--eta", type=float, default=0.1)
    evaluate.add_argument("--sigma", type=_auto_or_float, default="auto")
    evaluate.add_argument("--tol", type=float, default=1e-6)
    evaluate.add_argument("--max-iters", type=int, default=100)
    evaluate.add_argument("--dm-sigma", type=_auto_or_float, default="auto")
    evaluate.add_argument("--dm-dim", type=int, default=0, help="0 = match the projection dimension")
    evaluate.add_argument("--time", type=int, default=1)
    evaluate.add_argument("--k", type=int, default=1)
    evaluate.add_argument("--reg", type=float, default=1e-3)
    evaluate.add_argument("--epochs", type=int, default=200)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--report", required=True)
    evaluate.add_argument("--confusion", required=True)

    trace = sub.add_parser("trace", help="per-iteration objective trace of a projection fit")
    trace.add_argument("--data", required=True)
    trace.add_argument("--dim", type=_auto_or_int, default="auto")
    trace.add_argument("--rho", type=float, default=0.1)
    trace.add_argument("--eta", type=float, default=0.1)
    trace.add_argument("--sigma", type=_auto_or_float, default="auto")
    trace.add_argument("--tol", type=float, default=1e-6)
    trace.add_argument("--max-iters", type=int, default=100)
    trace.add_argument("--out", required=True)
    return parser


def _write_manifest(primary_output, args, inputs, outputs, started):
    manifest = {
        "command": args.command,
        "flags": {
            key: value
            for key, value in sorted(vars(args).items())
            if key != "command"
        },
        "seed": getattr(args, "seed", 0),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "duration_s": time.monotonic() - started,
    }
    atomic_write_text(str(primary_output) + ".manifest.json", json.dumps(manifest, indent=1) + "\n")


def _sklp_config_from(args):
    return sklp_projection.SklpConfig(
        rho=args.rho,
        kernel_bandwidth=args.sigma,
        target_dim=args.dim,
        learning_rate=args.eta,
        max_iters=args.max_iters,
        rel_tolerance=args.tol,
    )


def _dataset_csv_text(dataset):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["label"] + [f"f{j}" for j in range(dataset.dim)]
    if dataset.groups is not None:
        header.append("group")
    writer.writerow(header)
    for i in range(dataset.sample_count):
        row = [dataset.label_names[dataset.labels[i]]]
        row += [format_float(v) for v in dataset.features[:, i]]
        if dataset.groups is not None:
            row.append(dataset.group_names[dataset.groups[i]])
        writer.writerow(row)
    return buffer.getvalue()


def _cmd_synth(args, started):
    if args.shape == "gaussian":
        data = gen_gaussian_classes(
            args.classes, args.per_class, args.dim, args.spread, args.separation, args.seed
        )
    else:
        data = gen_ring_classes(args.classes, args.per_class, args.noise, args.dim, args.seed)
    if args.groups > 0:
        data = with_groups(data, args.groups)
    save_csv(data, args.out)
    _write_manifest(args.out, args, [], [args.out], started)
    return 0


def _parse_frame_manifest(args):
    """Yield (path, label, group-or-None) rows from either manifest form."""
    try:
        with open(args.manifest, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {args.manifest}: {exc}") from exc
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{args.manifest}: empty manifest")
    header = rows[0]
    if "path" in header and "label" in header:
        path_col = header.index("path")
        label_col = header.index("label")
        group_col = header.index("group") if "group" in header else None
        if not rows[1:]:
            raise DataError(f"{args.manifest}: no frames listed")
        entries = []
        for r, row in enumerate(rows[1:], start=1):
            if len(row) != len(header):
                raise DataError(f"{args.manifest}: row {r}: expected {len(header)} fields")
            entries.append(
                (row[path_col], row[label_col], row[group_col] if group_col is not None else None)
            )
        return entries
    if args.label is None:
        raise DataError(
            f"{args.manifest}: plain path lists need --label (and optionally --group)"
        )
    return [(row[0].strip(), args.label, args.group) for row in rows]


def _cmd_radon(args, started):
    entries = _parse_frame_manifest(args)
    base = os.path.dirname(os.path.abspath(args.manifest))
    config = silhouette_features.RadonConfig(angle_bins=args.angles)
    labels, groups, columns = [], [], []
    has_groups = any(group is not None for _, _, group in entries)
    for r, (raw_path, label, group) in enumerate(entries, start=1):
        frame_path = raw_path
        if not os.path.isabs(frame_path):
            frame_path = os.path.join(base, frame_path)
        try:
            image = silhouette_features.load_pgm(frame_path)
            columns.append(silhouette_features.r_transform(silhouette_features.radon(image, config)))
        except (DataError, NumericalError) as exc:
            raise type(exc)(f"frame {r} ({raw_path}): {exc}") from exc
        labels.append(label)
        if has_groups:
            groups.append(group)

    label_ids, label_names = _dense_ids(labels)
    group_ids = group_names = None
    if has_groups:
        group_ids, group_names = _dense_ids(groups)
    data = LabeledDataset(
        features=np.column_stack(columns),
        labels=label_ids,
        class_count=len(label_names),
        label_names=label_names,
        groups=group_ids,
        group_names=group_names,
    )
    save_csv(data, args.out)
    _write_manifest(args.out, args, [args.manifest], [args.out], started)
    return 0


def _cmd_fit(args, started):
    data = load_csv(args.data)
    if args.kind == "sklp":
        model, _ = sklp_projection.fit(data, _sklp_config_from(args))
    elif args.kind == "pca":
        d = args.dim
        if d == "auto":
            d = max(1, min(data.class_count - 1, data.dim, data.sample_count - 1))
        model = baselines.pca_fit(data.features, d)
    else:
        d = args.dim
        if d == "auto":
            d = data.class_count - 1
        model = baselines.lda_fit(data, d)
    sklp_projection.save_model(model, args.out)
    _write_manifest(args.out, args, [args.data], [args.out], started)
    return 0


def _cmd_project(args, started):
    model = sklp_projection.load_model(args.model)
    data = load_csv(args.data)
    projected = sklp_projection.project(model, data.features)
    out_set = LabeledDataset(
        features=projected,
        labels=data.labels,
        class_count=data.class_count,
        label_names=data.label_names,
        groups=data.groups,
        group_names=data.group_names,
    )
    save_csv(out_set, args.out)
    _write_manifest(args.out, args, [args.model, args.data], [args.out], started)
    return 0


def _cmd_diffuse(args, started):
    data = load_csv(args.data)
    config = diffusion_map.DiffusionConfig(bandwidth=args.sigma, embed_dim=args.dim, time=args.time)
    model = diffusion_map.fit(data.features, config)
    labels = [data.label_names[y] for y in data.labels]
    diffusion_map.save_embedding_csv(args.out, model.embedding, labels)
    model_path = args.out + ".model.json"
    diffusion_map.save_model_json(model, model_path)
    _write_manifest(args.out, args, [args.data], [args.out, model_path], started)
    return 0


def _format_confusion(matrix):
    names = matrix.class_names
    width = max(6, max(len(n) for n in names) + 1)
    lines = [" " * width + "".join(f"{n:>{width}}" for n in names)]
    for k, name in enumerate(names):
        lines.append(f"{name:>{width}}" + "".join(f"{c:>{width}}" for c in matrix.counts[k]))
    return "\n".join(lines)


def _confusion_csv_text(matrix):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["true\\predicted"] + list(matrix.class_names))
    for k, name in enumerate(matrix.class_names):
        writer.writerow([name] + [int(c) for c in matrix.counts[k]])
    return buffer.getvalue()


def _report_text(title, matrix, fold_accuracies, config_echo, extra_lines=()):
    lines = [title, ""]
    lines.append(f"overall accuracy: {matrix.accuracy:.6f}")
    lines.append("per-class accuracy:")
    for name, value in zip(matrix.class_names, matrix.per_class_accuracy()):
        lines.append(f"  {name}: " + (f"{value:.6f}" if value is not None else "n/a"))
    lines.extend(extra_lines)
    lines.append("confusion matrix (rows = true, cols = predicted):")
    lines.append(_format_confusion(matrix))
    if fold_accuracies:
        lines.append("per-fold accuracies: " + ", ".join(f"{a:.6f}" for a in fold_accuracies))
    lines.append("configuration: " + json.dumps(config_echo, sort_keys=True))
    return "\n".join(lines) + "\n"


def _cmd_classify(args, started):
    train = load_csv(args.train)
    test = load_csv(args.test)
    if train.dim != test.dim:
        raise DataError("train and test feature dimensions differ")
    name_to_id = {name: k for k, name in enumerate(train.label_names)}
    for name in test.label_names:
        if name not in name_to_id:
            raise DataError(f"test label {name!r} never appears in the training data")
    test_y = np.array([name_to_id[test.label_names[y]] for y in test.labels], dtype=np.int64)
    if args.method == "knn":
        config = classify_eval.KnnConfig(k=args.k)
        predicted = classify_eval.knn_predict((train.features, train.labels), test.features, config)
        echo = {"method": "knn", "k": args.k}
    else:
        config = classify_eval.SvmConfig(regularization=args.reg, epochs=args.epochs, seed=args.seed)
        model = classify_eval.svm_fit((train.features, train.labels), config)
        predicted = classify_eval.svm_predict(model, test.features)
        echo = {"method": "svm", "regularization": args.reg, "epochs": args.epochs, "seed": args.seed}
    matrix = classify_eval.confusion(test_y, predicted, train.class_count, train.label_names)
    extra = []
    if args.vote_by_group:
        if test.groups is None:
            raise DataError("--vote-by-group requires a `group` column in the test data")
        votes = classify_eval.video_majority_vote(predicted.tolist(), test.groups.tolist())
        true_votes = classify_eval.video_majority_vote(test_y.tolist(), test.groups.tolist())
        group_true = [true_votes[g] for g in votes]
        group_pred = [votes[g] for g in votes]
        group_matrix = classify_eval.confusion(
            group_true, group_pred, train.class_count, train.label_names
        )
        extra.append(f"group-vote accuracy: {group_matrix.accuracy:.6f}")
        extra.append("group-vote confusion (rows = true, cols = predicted):")
        extra.append(_format_confusion(group_matrix))
    text = _report_text(f"classification report ({args.method})", matrix, (), echo, extra)
    atomic_write_text(args.report, text)
    _write_manifest(args.report, args, [args.train, args.test], [args.report], started)
    return 0


def _cmd_evaluate(args, started):
    data = load_csv(args.data)
    sklp_cfg = _sklp_config_from(args)
    d = data.class_count - 1 if args.dim == "auto" else int(args.dim)
    dm_dim = args.dm_dim if args.dm_dim > 0 else max(1, d)
    pipeline = classify_eval.PipelineConfig(
        reduction=args.pipeline,
        classifier=args.classifier,
        target_dim=args.dim,
        knn=classify_eval.KnnConfig(k=args.k),
        svm=classify_eval.SvmConfig(regularization=args.reg, epochs=args.epochs, seed=args.seed),
        sklp=sklp_cfg,
        diffusion=diffusion_map.DiffusionConfig(
            bandwidth=args.dm_sigma, embed_dim=dm_dim, time=args.time
        ),
    )
    result = classify_eval.cross_validate_actions(data, pipeline)
    text = _report_text(
        f"leave-one-group-out evaluation ({args.pipeline} / {args.classifier})",
        result.confusion,
        result.fold_accuracies,
        result.pipeline,
    )
    atomic_write_text(args.report, text)
    atomic_write_text(args.confusion, _confusion_csv_text(result.confusion))
    _write_manifest(args.report, args, [args.data], [args.report, args.confusion], started)
    return 0


def _cmd_trace(args, started):
    data = load_csv(args.data)
    _, state = sklp_projection.fit(data, _sklp_config_from(args))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["iteration", "objective", "predicted_increment"])
    writer.writerow([0, format_float(state.objective_history[0]), ""])
    for t, (value, increment) in enumerate(
        zip(state.objective_history[1:], state.predicted_increments), start=1
    ):
        writer.writerow([t, format_float(value), format_float(increment)])
    atomic_write_text(args.out, buffer.getvalue())
    _write_manifest(args.out, args, [args.data], [args.out], started)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "radon": _cmd_radon,
    "fit": _cmd_fit,
    "project": _cmd_project,
    "diffuse": _cmd_diffuse,
    "classify": _cmd_classify,
    "evaluate": _cmd_evaluate,
    "trace": _cmd_trace,
}


def run(argv=None):
    """Parse argv and execute one subcommand; returns the process exit code."""
    started = time.monotonic()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args, started)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
