"""Command-line front-end.

Subcommands: eval, compare, drop, gradcheck, dedup, split, demo-train.
Global flags --config/--seed/--workers/--out may be given before or
after the subcommand; CLI flags override config-file values.

Exit codes: 0 success, 1 usage error, 2 data/content error.  Errors are
reported as a single "error: ..." line on stderr.
"""

import argparse
import os
import sys

import numpy as np

from ..losses import LOSSES, get_loss, finite_difference_check
from ..metrics import METRIC_NAMES
from ..protocols import (DEFAULT_NEIGHBORS, DEFAULT_SIMILARITY,
                         FEWSHOT_SCALES, OBJECTNESS_SUBSET_SIZE,
                         STANDARD_TRAIN_SIZE, DownscaleEmbedder,
                         apply_review, find_duplicates, load_manifest,
                         load_split, load_vectors, read_scores_file,
                         save_manifest, save_split, save_vectors,
                         split_fewshot, split_objectness, split_standard)
from .config import RunConfig, load_config
from .evaluate import evaluate_directory
from .reports import (compare_reports, drop_report, drop_to_csv,
                      drop_to_markdown, load_report_csv, report_to_csv,
                      report_to_markdown, write_eval_report)
from .synth import SCENE_SIZE, synth_dataset
from .train import DEFAULT_EPOCHS, micro_train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through our codes
    def error(self, message):
        raise UsageError(message)


def _globals_parent():
    p = _Parser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS,
                   help="TOML config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS,
                   help="output path or basename")
    return p


def build_parser():
    root = _Parser(prog="salbench",
                   description="saliency evaluation and loss toolkit")
    root.add_argument("--config", default=None)
    root.add_argument("--seed", type=int, default=None)
    root.add_argument("--workers", type=int, default=None)
    root.add_argument("--out", default=None)
    parent = [_globals_parent()]
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=parent,
                       help="score prediction directories against GT")
    p.add_argument("--pred", action="append", default=None,
                   help="prediction directory (repeatable)")
    p.add_argument("--gt", default=None, help="ground-truth directory")
    p.add_argument("--method", action="append", default=None,
                   help="method name per --pred (defaults to dir name)")
    p.add_argument("--metrics", default=None,
                   help="comma list from: %s" % ",".join(METRIC_NAMES))
    p.add_argument("--binarize-threshold", type=float, default=None)
    p.add_argument("--resize", action="store_true", default=None,
                   help="nearest-neighbour resize predictions to GT size")
    p.add_argument("--skip-unpaired", action="store_true", default=None)

    p = sub.add_parser("compare", parents=parent,
                       help="rank >= 2 eval report CSVs")
    p.add_argument("reports", nargs="*", help="dataset report CSV files")

    p = sub.add_parser("drop", parents=parent,
                       help="normal-vs-hard performance drop")
    p.add_argument("normal", help="report CSV on the normal subset")
    p.add_argument("hard", help="report CSV on the hard subset")

    p = sub.add_parser("gradcheck", parents=parent,
                       help="finite-difference certification of losses")
    p.add_argument("--losses", default=",".join(sorted(LOSSES)))
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--corrupt", action="store_true",
                   help="self-test: scale one gradient component by 1.01 "
                        "and expect the suite to fail")

    p = sub.add_parser("dedup", parents=parent,
                       help="find near-duplicate images in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_NEIGHBORS)
    p.add_argument("--tau", type=float, default=DEFAULT_SIMILARITY)
    p.add_argument("--vectors", default=None,
                   help="npz file of precomputed descriptors")
    p.add_argument("--save-vectors", default=None,
                   help="write computed descriptors to this npz")
    p.add_argument("--review", default=None,
                   help="review CSV of per-pair votes; prunes the manifest")
    p.add_argument("--out-manifest", default=None,
                   help="write the pruned manifest here (with --review)")

    p = sub.add_parser("split", parents=parent,
                       help="emit benchmark split JSON")
    p.add_argument("protocol", choices=("standard", "objectness", "fewshot"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-size", type=int, default=STANDARD_TRAIN_SIZE)
    p.add_argument("--subset-size", type=int, default=OBJECTNESS_SUBSET_SIZE)
    p.add_argument("--scales", default=None,
                   help="comma list of few-shot sizes")
    p.add_argument("--scores", default=None,
                   help="objectness scores CSV to merge into the manifest")
    p.add_argument("--from-split", default=None,
                   help="few-shot: draw from this split's train partition")

    p = sub.add_parser("demo-train", parents=parent,
                       help="train the logistic micro-predictor on "
                            "synthetic scenes")
    p.add_argument("--loss", default="ea")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--train-size", type=int, default=12)
    p.add_argument("--heldout-size", type=int, default=5)
    p.add_argument("--scene-size", type=int, default=SCENE_SIZE)
    return root


def _resolve(args):
    """Fold config file and CLI flags into a validated RunConfig."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise DataError("cannot read config: %s" % exc)
        except ValueError as exc:
            raise UsageError(str(exc))
    for name, attr in (("seed", "seed"), ("workers", "workers"),
                       ("out", "out")):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


def _cmd_eval(args):
    cfg = _resolve(args)
    if args.pred is not None:
        cfg.pred_dirs = args.pred
        cfg.methods = []
    if args.gt is not None:
        cfg.gt_dir = args.gt
    if args.method is not None:
        cfg.methods = args.method
    if args.metrics is not None:
        cfg.metrics = tuple(m.strip() for m in args.metrics.split(","))
    if args.binarize_threshold is not None:
        cfg.binarize_threshold = args.binarize_threshold
    if args.resize is not None:
        cfg.resize = args.resize
    if args.skip_unpaired is not None:
        cfg.skip_unpaired = args.skip_unpaired
    if not cfg.pred_dirs or not cfg.gt_dir:
        raise UsageError("eval needs --pred and --gt (or a config file)")
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc))

    reports = []
    for pos, pred_dir in enumerate(cfg.pred_dirs):
        method = cfg.methods[pos] if cfg.methods else None
        reports.append(evaluate_directory(
            pred_dir, cfg.gt_dir, method=method, workers=cfg.workers,
            resize=cfg.resize, skip_unpaired=cfg.skip_unpaired,
            binarize_threshold=cfg.binarize_threshold, metrics=cfg.metrics))
    for report in reports:
        if cfg.out:
            base = cfg.out if len(reports) == 1 \
                else "%s-%s" % (cfg.out, report.method)
            write_eval_report(report, base)
        else:
            sys.stdout.write(report_to_csv(report))
            sys.stdout.write(report_to_markdown(report))
    return EXIT_OK


def _cmd_compare(args):
    if len(args.reports) < 2:
        raise UsageError("need >= 2 methods")
    reports = [load_report_csv(p) for p in args.reports]
    md, csv_text = compare_reports(reports)
    out = getattr(args, "out", None)
    if out:
        with open(out + ".md", "w", encoding="utf-8") as fh:
            fh.write(md)
        with open(out + ".csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(md)
    return EXIT_OK


def _cmd_drop(args):
    normal = load_report_csv(args.normal)
    hard = load_report_csv(args.hard)
    drop = drop_report(normal, hard)
    out = getattr(args, "out", None)
    if out:
        with open(out + ".md", "w", encoding="utf-8") as fh:
            fh.write(drop_to_markdown(drop))
        with open(out + ".csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(drop_to_csv(drop))
    else:
        sys.stdout.write(drop_to_markdown(drop))
    return EXIT_OK


def _cmd_gradcheck(args):
    loss_ids = [s.strip() for s in args.losses.split(",") if s.strip()]
    for loss_id in loss_ids:
        if loss_id not in LOSSES:
            raise UsageError(
                "unknown loss %r, expected one of %s"
                % (loss_id, sorted(LOSSES)))
    if args.step <= 0.0:
        raise UsageError("step must be positive")
    failed = False
    for loss_id in loss_ids:
        worst = 0.0
        for seed in range(args.seeds):
            rng = np.random.default_rng(seed)
            pred = rng.uniform(0.05, 0.95, size=(args.size, args.size))
            gt = (rng.random((args.size, args.size)) < 0.5).astype(float)
            kwargs = {}
            if args.corrupt:
                grad = get_loss(loss_id)(pred, gt).gradient
                kwargs = {"scale_component": int(np.abs(grad).argmax()),
                          "scale_factor": 1.01}
            err = finite_difference_check(loss_id, pred, gt,
                                          step=args.step, **kwargs)
            worst = max(worst, err)
        ok = worst < args.tol
        failed = failed or not ok
        print("%-6s max relative error %.3e over %d seeds (%dx%d)  %s"
              % (loss_id, worst, args.seeds, args.size, args.size,
                 "PASS" if ok else "FAIL"))
    print("gradcheck: %s" % ("FAIL" if failed else "PASS"))
    return EXIT_DATA if failed else EXIT_OK


def _pairs_csv(pairs):
    lines = ["id_a,id_b,similarity,verdict"]
    for p in pairs:
        lines.append("%s,%s,%s,%s"
                     % (p.id_a, p.id_b, repr(p.similarity), p.verdict))
    return "\n".join(lines) + "\n"


def _cmd_dedup(args):
    manifest = load_manifest(args.manifest)
    vectors = load_vectors(args.vectors) if args.vectors else None
    embedder = DownscaleEmbedder()
    if args.save_vectors:
        ids = manifest.ids()
        mat = embedder.transform([e.image_path for e in manifest])
        save_vectors(ids, mat, args.save_vectors)
        vectors = dict(zip(ids, mat))
    pairs = find_duplicates(manifest, k=args.k, tau=args.tau,
                            embedder=embedder, vectors=vectors)
    if args.review:
        result = apply_review(manifest, pairs, args.review)
        pairs = result.pairs
        if args.out_manifest:
            save_manifest(result.manifest, args.out_manifest)
        print("removed %d image(s): %s"
              % (len(result.removed_ids), ",".join(result.removed_ids)))
    out = getattr(args, "out", None)
    text = _pairs_csv(pairs)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print("%d pair(s) written to %s" % (len(pairs), out))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_split(args):
    cfg = _resolve(args)
    manifest = load_manifest(args.manifest)
    if args.scores:
        manifest = manifest.with_objectness(read_scores_file(args.scores))
    out = cfg.out
    if args.protocol == "standard":
        spec = split_standard(manifest, cfg.seed, train_size=args.train_size)
        specs = [spec]
    elif args.protocol == "objectness":
        spec = split_objectness(manifest, subset_size=args.subset_size)
        specs = [spec]
    else:
        ids = manifest.ids()
        if args.from_split:
            source = load_split(args.from_split)
            if "train" not in source.partitions:
                raise DataError(
                    "split %s has no 'train' partition" % args.from_split)
            ids = source.partitions["train"]
        scales = FEWSHOT_SCALES if args.scales is None else \
            tuple(int(s) for s in args.scales.split(","))
        specs = split_fewshot(ids, cfg.seed, scales=scales)
    for spec in specs:
        if out:
            path = out if len(specs) == 1 else "%s-%s.json" % (
                out, spec.name.split("-")[-1])
            save_split(spec, path)
            print("wrote %s (%s)" % (
                path, ", ".join("%s=%d" % (k, len(v))
                                for k, v in sorted(spec.partitions.items()))))
        else:
            print(spec.to_json())
    return EXIT_OK


def _cmd_demo_train(args):
    cfg = _resolve(args)
    if args.loss not in LOSSES:
        raise UsageError(
            "unknown loss %r, expected one of %s"
            % (args.loss, sorted(LOSSES)))
    scenes = synth_dataset(args.train_size + args.heldout_size, cfg.seed,
                           size=args.scene_size)
    run = micro_train(args.loss, scenes[:args.train_size],
                      scenes[args.train_size:], config=cfg.loss_config,
                      learning_rate=args.lr, epochs=args.epochs,
                      seed=cfg.seed)
    text = run.to_json()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        final = run.final_metrics()
        print("final loss %.6f, held-out %s" % (
            run.loss_trace[-1],
            " ".join("%s=%.4f" % (k, final[k]) for k in sorted(final))))
    else:
        print(text)
    return EXIT_OK


_COMMANDS = {
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "drop": _cmd_drop,
    "gradcheck": _cmd_gradcheck,
    "dedup": _cmd_dedup,
    "split": _cmd_split,
    "demo-train": _cmd_demo_train,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, KeyError, OSError, RuntimeError) as exc:
        msg = exc.args[0] if exc.args else exc
        print("error: %s" % msg, file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
