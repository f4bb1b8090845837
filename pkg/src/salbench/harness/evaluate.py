"""Directory-level evaluation: pair prediction and GT files by stem,
score every pair (optionally in parallel) and aggregate.

Workers only compute per-image records; aggregation always happens on
the coordinator in sorted-id order, so dataset numbers are bitwise
identical for any worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..masks import BINARIZE_THRESHOLD, binarize, load_saliency_map
from ..metrics import ALPHA, BETA2, METRIC_NAMES, aggregate, evaluate_pair


def pair_stems(pred_dir, gt_dir, skip_unpaired=False):
    """Match PNG files in the two directories by filename stem.

    Returns (pairs, n_unpaired) where pairs is a sorted list of
    (stem, pred_path, gt_path).  Unpaired files on either side are an
    error unless `skip_unpaired`, which downgrades them to a count.
    """
    for d in (pred_dir, gt_dir):
        if not os.path.isdir(d):
            raise FileNotFoundError("directory not found: %s" % d)

    def scan(d):
        out = {}
        for name in sorted(os.listdir(d)):
            stem, ext = os.path.splitext(name)
            if ext.lower() == ".png":
                out[stem] = os.path.join(d, name)
        return out

    preds = scan(pred_dir)
    gts = scan(gt_dir)
    unpaired = sorted(set(preds) ^ set(gts))
    if unpaired and not skip_unpaired:
        shown = ", ".join(unpaired[:5])
        raise ValueError(
            "%d unpaired file stem(s) between %s and %s: %s%s "
            "(pass skip_unpaired to ignore them)"
            % (len(unpaired), pred_dir, gt_dir, shown,
               ", ..." if len(unpaired) > 5 else ""))
    stems = sorted(set(preds) & set(gts))
    if not stems:
        raise ValueError(
            "no prediction/GT pairs found between %s and %s"
            % (pred_dir, gt_dir))
    return [(s, preds[s], gts[s]) for s in stems], len(unpaired)


def resize_nearest(arr, shape):
    """Nearest-neighbour resample to `shape` using pixel-centre mapping."""
    arr = np.asarray(arr, dtype=np.float64)
    h_out, w_out = shape
    rows = np.minimum(
        ((np.arange(h_out) + 0.5) * arr.shape[0] / h_out).astype(np.int64),
        arr.shape[0] - 1)
    cols = np.minimum(
        ((np.arange(w_out) + 0.5) * arr.shape[1] / w_out).astype(np.int64),
        arr.shape[1] - 1)
    return arr[np.ix_(rows, cols)]


def _score_one(task):
    """Worker body: load, align and score one prediction/GT pair."""
    (stem, pred_path, gt_path, resize, binarize_threshold, beta2, alpha,
     metrics) = task
    pred = load_saliency_map(pred_path)
    gt_raw = load_saliency_map(gt_path)
    if pred.shape != gt_raw.shape:
        if not resize:
            raise ValueError(
                "size mismatch for %r: prediction %s vs ground truth %s "
                "(enable the resize flag to resample predictions)"
                % (stem, pred.shape, gt_raw.shape))
        pred = resize_nearest(pred, gt_raw.shape)
    gt = binarize(gt_raw, binarize_threshold)
    record, curve = evaluate_pair(pred, gt, image_id=stem, beta2=beta2,
                                  alpha=alpha, metrics=metrics)
    return record, curve


def evaluate_directory(pred_dir, gt_dir, method=None, workers=1,
                       resize=False, skip_unpaired=False,
                       binarize_threshold=BINARIZE_THRESHOLD,
                       beta2=BETA2, alpha=ALPHA, metrics=METRIC_NAMES):
    """Score every paired PNG under pred_dir/gt_dir into an EvalReport."""
    if workers < 1:
        raise ValueError("worker count must be >= 1, got %r" % workers)
    if method is None:
        method = os.path.basename(os.path.normpath(pred_dir))
    pairs, n_unpaired = pair_stems(pred_dir, gt_dir, skip_unpaired)
    tasks = [(stem, pp, gp, resize, binarize_threshold, beta2, alpha,
              tuple(metrics)) for stem, pp, gp in pairs]
    if workers == 1 or len(tasks) == 1:
        results = [_score_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_score_one, tasks))
    records = [r for r, _ in results]
    curves = [c for _, c in results]
    report = aggregate(records, curves, method=method, beta2=beta2,
                       metrics=metrics)
    if n_unpaired:
        report.footnotes = ("skipped %d unpaired file(s)" % n_unpaired,)
    return report
