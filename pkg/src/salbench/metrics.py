"""Evaluation metrics for saliency maps against binary ground truth.

Six scores are produced per prediction/mask pair:

* ``mae``             mean absolute error
* ``max_f``/``ave_f`` max and mean of the F-beta curve over all 256
                      byte thresholds (beta^2 = 0.3)
* ``fbw``             weighted F-beta with distance-dependent error
                      weighting (beta^2 = 1)
* ``s_measure``       structure measure, object/region mix (alpha = 0.5)
* ``e_measure``       enhanced-alignment measure at the adaptive
                      2*mean threshold

All scores lie in [0, 1], higher is better except ``mae``.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate

from .validation import check_pair

# defaults shared across the package
BETA2 = 0.3            # beta^2 of the thresholded F-measure
ALPHA = 0.5            # object/region mix of the structure measure
NUM_THRESHOLDS = 256   # one byte threshold per gray level
FBW_BETA2 = 1.0        # the weighted F-measure uses beta = 1
FBW_SIGMA2 = 5.0       # variance of the Gaussian error-spread kernel
FBW_KERNEL = 7         # kernel window width
FBW_NU = 0.5           # dependency decay constant

_EPS = np.finfo(np.float64).eps

METRIC_NAMES = ("max_f", "ave_f", "fbw", "mae", "s_measure", "e_measure")
# metrics where smaller values are better
LOWER_IS_BETTER = ("mae",)


# ---------------------------------------------------------------------------
# per-pair records

@dataclass
class MetricRecord:
    """Scores of one prediction/ground-truth pair."""
    image_id: str
    max_f: float = 0.0
    ave_f: float = 0.0
    fbw: float = 0.0
    mae: float = 0.0
    s_measure: float = 0.0
    e_measure: float = 0.0

    def as_dict(self):
        return {
            "image_id": self.image_id,
            "max_f": self.max_f,
            "ave_f": self.ave_f,
            "fbw": self.fbw,
            "mae": self.mae,
            "s_measure": self.s_measure,
            "e_measure": self.e_measure,
        }


@dataclass
class EvalReport:
    """Aggregate of one method over a dataset.

    ``dataset`` holds the headline numbers: max_f / ave_f come from the
    dataset-mean precision-recall curve, the other four are arithmetic
    means of the per-image scores.  Per-image means of max_f / ave_f are
    kept as well under ``*_image_mean``.
    """
    method: str
    records: list = field(default_factory=list)
    dataset: dict = field(default_factory=dict)
    curve: np.ndarray = None  # (256, 3) mean precision / recall / F
    footnotes: tuple = ()     # free-text remarks carried into reports

    @property
    def image_ids(self):
        return [r.image_id for r in self.records]


# ---------------------------------------------------------------------------
# mean absolute error

def mae(pred, gt):
    pred, gt = check_pair(pred, gt)
    return float(np.abs(pred - gt).mean())


# ---------------------------------------------------------------------------
# thresholded F-measure

def _f_from_pr(precision, recall, beta2):
    denom = beta2 * precision + recall
    if denom <= 0.0:
        return 0.0
    return (1.0 + beta2) * precision * recall / denom


def confusion_at_threshold(pred, gt, threshold):
    """Hard confusion counts with the positive test  round(pred*255) > t.

    `threshold` is the byte level in 0..255.  Returns (tp, fp, fn, tn)
    as ints.
    """
    pred, gt = check_pair(pred, gt)
    t = int(threshold)
    if t < 0 or t > 255:
        raise ValueError("byte threshold must lie in 0..255, got %r" % threshold)
    pos = np.rint(pred * 255.0) > t
    fg = gt == 1.0
    tp = int(np.count_nonzero(pos & fg))
    fp = int(np.count_nonzero(pos & ~fg))
    fn = int(np.count_nonzero(~pos & fg))
    tn = int(np.count_nonzero(~pos & ~fg))
    return tp, fp, fn, tn


def fbeta_curve(pred, gt, beta2=BETA2):
    """Precision, recall and F-beta at each byte threshold 0..255.

    Returns a (256, 3) float array with columns (precision, recall, f).
    A pixel counts as positive at threshold t when its byte value
    round(pred*255) is strictly greater than t.  Division conventions:
    empty ground truth gives recall 1, and precision/F are 1 when the
    prediction is also empty at that threshold, else 0; with non-empty
    ground truth an empty prediction gives precision 0 and F falls back
    to 0 when its denominator vanishes.
    """
    pred, gt = check_pair(pred, gt)
    bytes_ = np.rint(pred * 255.0).astype(np.int64)
    fg = gt == 1.0
    n_fg = int(np.count_nonzero(fg))

    hist_fg = np.bincount(bytes_[fg], minlength=256)
    hist_all = np.bincount(bytes_.ravel(), minlength=256)
    # suffix[v] = number of pixels with byte value >= v, so
    # count(byte > t) = suffix[t + 1]
    suffix_fg = np.concatenate([np.cumsum(hist_fg[::-1])[::-1], [0]])
    suffix_all = np.concatenate([np.cumsum(hist_all[::-1])[::-1], [0]])
    tp = suffix_fg[1:257].astype(np.float64)
    npos = suffix_all[1:257].astype(np.float64)

    out = np.zeros((NUM_THRESHOLDS, 3), dtype=np.float64)
    if n_fg == 0:
        empty = npos == 0.0
        out[:, 0] = np.where(empty, 1.0, 0.0)
        out[:, 1] = 1.0
        out[:, 2] = np.where(empty, 1.0, 0.0)
        return out

    recall = tp / float(n_fg)
    precision = np.divide(tp, npos, out=np.zeros_like(tp), where=npos > 0)
    denom = beta2 * precision + recall
    f = np.divide((1.0 + beta2) * precision * recall, denom,
                  out=np.zeros_like(tp), where=denom > 0)
    out[:, 0] = precision
    out[:, 1] = recall
    out[:, 2] = f
    return out


def max_ave_f(curve):
    """Max and mean of the F column of a (256, 3) threshold curve."""
    curve = np.asarray(curve, dtype=np.float64)
    if curve.shape != (NUM_THRESHOLDS, 3):
        raise ValueError("expected a (256, 3) curve, got %s" % (curve.shape,))
    f = curve[:, 2]
    return float(f.max()), float(f.mean())


# ---------------------------------------------------------------------------
# weighted F-measure

def _gauss_kernel(size=FBW_KERNEL, sigma2=FBW_SIGMA2):
    half = (size - 1) / 2.0
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1]
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma2))
    return k / k.sum()


# nearest-foreground geometry depends only on the mask, so cache the tie
# structure; scoring many predictions against one ground truth (training
# traces, threshold sweeps) then pays the quadratic search once
_TIE_CACHE_LIMIT = 8
_tie_cache = OrderedDict()


def _nearest_foreground_structure(fg):
    """Per background pixel (in `np.argwhere(~fg)` order): distance to the
    nearest foreground pixel and the set of foreground pixels attaining it.

    Returns (dist, indptr, ties, counts) where ties[indptr[i]:indptr[i+1]]
    are positions into the row-major foreground pixel list, and counts is
    the tie-set size as float64.  Squared distances are compared in integer
    arithmetic so the tie sets are exact.
    """
    key = (fg.shape, fg.tobytes())
    hit = _tie_cache.get(key)
    if hit is not None:
        _tie_cache.move_to_end(key)
        return hit
    fg_pos = np.argwhere(fg)
    bg_pos = np.argwhere(~fg)
    # int32 holds d^2 for any realistic mask size
    coord = np.int32 if max(fg.shape) < 20000 else np.int64
    fy = np.ascontiguousarray(fg_pos[:, 0], dtype=coord)
    fx = np.ascontiguousarray(fg_pos[:, 1], dtype=coord)
    by = np.ascontiguousarray(bg_pos[:, 0], dtype=coord)
    bx = np.ascontiguousarray(bg_pos[:, 1], dtype=coord)
    n_bg = len(bg_pos)
    dist = np.empty(n_bg, dtype=np.float64)
    counts = np.empty(n_bg, dtype=np.int64)
    tie_chunks = []
    # chunk the (n_bg, n_fg) distance matrix to bound memory
    chunk = max(1, 4_000_000 // max(1, len(fg_pos)))
    for start in range(0, n_bg, chunk):
        stop = start + chunk
        d2 = by[start:stop, None] - fy[None, :]
        d2 *= d2
        dx = bx[start:stop, None] - fx[None, :]
        dx *= dx
        d2 += dx
        best = d2.min(axis=1)
        rows, cols = np.nonzero(d2 == best[:, None])
        counts[start:stop] = np.bincount(rows, minlength=len(best))
        tie_chunks.append(cols)
        dist[start:stop] = np.sqrt(best.astype(np.float64))
    ties = np.concatenate(tie_chunks) if tie_chunks else np.empty(0, np.intp)
    indptr = np.zeros(n_bg + 1, dtype=np.intp)
    np.cumsum(counts, out=indptr[1:])
    value = (dist, indptr, ties, counts.astype(np.float64))
    _tie_cache[key] = value
    if len(_tie_cache) > _TIE_CACHE_LIMIT:
        _tie_cache.popitem(last=False)
    return value


def _nearest_foreground_errors(err, fg):
    """Distance to the nearest foreground pixel and the mean of `err`
    over all foreground pixels attaining that distance.

    Equidistant nearest neighbours are averaged rather than broken by an
    arbitrary scan order, which keeps the result invariant under
    transposition and flips of the input.  Returns (dist, err_nearest)
    arrays for the background pixels (in `np.argwhere(~fg)` order).
    """
    dist, indptr, ties, counts = _nearest_foreground_structure(fg)
    err_fg = err[fg]
    # every background pixel has at least one nearest neighbour, so no
    # segment is empty and reduceat sums exactly the tie sets
    nearest = np.add.reduceat(err_fg[ties], indptr[:-1]) / counts
    return dist, nearest


def weighted_fbeta(pred, gt, beta2=FBW_BETA2):
    """Weighted F-beta: pixel errors are spread by a Gaussian around the
    object and discounted in the background by distance to it.

    Background errors are first replaced by the error at the nearest
    foreground pixel, smoothed with a 7x7 Gaussian (variance 5), and the
    smoothed value substitutes the raw error on foreground pixels where
    it is smaller.  Background pixels additionally get the weight
    2 - exp(log(1 - nu) / 5 * dist) with nu = 0.5.  Empty ground truth
    scores 1 for an all-zero prediction and 0 otherwise.
    """
    pred, gt = check_pair(pred, gt)
    fg = gt == 1.0
    n_fg = int(np.count_nonzero(fg))
    if n_fg == 0:
        return 1.0 if float(pred.sum()) == 0.0 else 0.0

    err = np.abs(pred - gt)
    err_t = err.copy()
    if n_fg < err.size:
        dist_bg, nearest_bg = _nearest_foreground_errors(err, fg)
        err_t[~fg] = nearest_bg
    smoothed = correlate(err_t, _gauss_kernel(), mode="constant", cval=0.0)
    min_err = err.copy()
    take = fg & (smoothed < err)
    min_err[take] = smoothed[take]

    weight = np.ones_like(err)
    if n_fg < err.size:
        weight[~fg] = 2.0 - np.exp(np.log(1.0 - FBW_NU) / 5.0 * dist_bg)
    weighted_err = min_err * weight

    tpw = float(n_fg) - float(weighted_err[fg].sum())
    fpw = float(weighted_err[~fg].sum())
    recall = 1.0 - float(weighted_err[fg].mean())
    precision = tpw / (_EPS + tpw + fpw)
    return float((1.0 + beta2) * recall * precision
                 / (_EPS + recall + beta2 * precision))


# ---------------------------------------------------------------------------
# structure measure

def _object_score(values):
    """Score of one region: 2m / (m^2 + 1 + s + eps) with sample std s."""
    m = float(values.mean())
    s = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * m / (m * m + 1.0 + s + _EPS)


def _centroid(gt):
    """1-based centroid of the foreground, rounded half away from zero.

    Matches the rounding of the reference implementation; an empty mask
    never reaches this point.
    """
    rows, cols = gt.shape
    total = gt.sum()
    col_sum = gt.sum(axis=0)
    row_sum = gt.sum(axis=1)
    x = int(np.floor(np.dot(np.arange(1, cols + 1), col_sum) / total + 0.5))
    y = int(np.floor(np.dot(np.arange(1, rows + 1), row_sum) / total + 0.5))
    return x, y


def _block_ssim(x, y):
    """SSIM-style similarity of one region block (means over the block).

    Two constant blocks compare as 1: that is the exact-arithmetic
    content of the reference rule "alpha == 0 and beta == 0", and with
    values in [0, 1] it cannot arise any other way, so the branch is
    taken on the order-independent max == min test instead of on
    rounded variances.
    """
    n = x.size
    if n == 0:
        return 0.0
    if x.max() == x.min() and y.max() == y.min():
        return 1.0
    mx = float(x.mean())
    my = float(y.mean())
    # sample statistics with the original's epsilon-guarded N-1 divisor
    sx = float(((x - mx) ** 2).sum() / (n - 1 + _EPS))
    sy = float(((y - my) ** 2).sum() / (n - 1 + _EPS))
    sxy = float(((x - mx) * (y - my)).sum() / (n - 1 + _EPS))
    alpha = 4.0 * mx * my * sxy
    beta = (mx * mx + my * my) * (sx + sy)
    if alpha != 0.0:
        return alpha / (beta + _EPS)
    return 0.0


def _s_object(pred, gt):
    fg = gt == 1.0
    mu = float(gt.mean())
    o_fg = _object_score(pred[fg])
    o_bg = _object_score(1.0 - pred[~fg])
    return mu * o_fg + (1.0 - mu) * o_bg


def _s_region(pred, gt):
    x, y = _centroid(gt)
    rows, cols = gt.shape
    area = float(rows * cols)
    # block weights are the ground-truth areas of the four quadrants
    w1 = (x * y) / area
    w2 = ((cols - x) * y) / area
    w3 = (x * (rows - y)) / area
    w4 = 1.0 - w1 - w2 - w3
    blocks = (
        (pred[:y, :x], gt[:y, :x], w1),
        (pred[:y, x:], gt[:y, x:], w2),
        (pred[y:, :x], gt[y:, :x], w3),
        (pred[y:, x:], gt[y:, x:], w4),
    )
    score = 0.0
    for pb, gb, w in blocks:
        if pb.size == 0:
            continue  # centroid on the border leaves a zero-weight block
        score += w * _block_ssim(pb, gb)
    return score


def s_measure(pred, gt, alpha=ALPHA):
    """Structure measure: alpha * object score + (1-alpha) * region score.

    Degenerate masks fall back to intensity agreement: an empty mask
    scores 1 - mean(pred), a full mask scores mean(pred).  The combined
    score is clamped at 0 from below.
    """
    pred, gt = check_pair(pred, gt)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1], got %r" % alpha)
    mu = float(gt.mean())
    if mu == 0.0:
        return 1.0 - float(pred.mean())
    if mu == 1.0:
        return float(pred.mean())
    score = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return float(max(score, 0.0))


# ---------------------------------------------------------------------------
# enhanced-alignment measure

def e_measure(pred, gt):
    """Enhanced-alignment measure at the adaptive threshold 2*mean(pred).

    The prediction is binarised at min(2*mean, 1), the binary map and the
    ground truth are mean-centred, and the alignment of the two is pushed
    through the quadratic enhancement ((align + 1)^2) / 4; the score is
    the plain mean of this map.  Degenerate masks reduce to counting
    agreement with the binarised map.
    """
    pred, gt = check_pair(pred, gt)
    thr = min(2.0 * float(pred.mean()), 1.0)
    fm = (pred >= thr).astype(np.float64)
    mu = float(gt.mean())
    if mu == 0.0:
        enhanced = 1.0 - fm
    elif mu == 1.0:
        enhanced = fm
    else:
        dgt = gt - mu
        dfm = fm - fm.mean()
        align = 2.0 * dgt * dfm / (dgt * dgt + dfm * dfm + _EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


# ---------------------------------------------------------------------------
# pair and dataset evaluation

def evaluate_pair(pred, gt, image_id="", beta2=BETA2, alpha=ALPHA,
                  metrics=METRIC_NAMES):
    """All requested scores of one pair; returns (MetricRecord, curve).

    `curve` is None when neither max_f nor ave_f was requested.
    """
    pred, gt = check_pair(pred, gt)
    record = MetricRecord(image_id=image_id)
    curve = None
    if "max_f" in metrics or "ave_f" in metrics:
        curve = fbeta_curve(pred, gt, beta2)
        record.max_f, record.ave_f = max_ave_f(curve)
    if "fbw" in metrics:
        record.fbw = weighted_fbeta(pred, gt)
    if "mae" in metrics:
        record.mae = mae(pred, gt)
    if "s_measure" in metrics:
        record.s_measure = s_measure(pred, gt, alpha)
    if "e_measure" in metrics:
        record.e_measure = e_measure(pred, gt)
    return record, curve


def aggregate(records, curves, method="", beta2=BETA2, metrics=METRIC_NAMES):
    """Fold per-image records into an EvalReport.

    The dataset F numbers come from the mean precision/recall curve over
    images (F recomputed from the means at each threshold); the remaining
    metrics are arithmetic means.  Records are sorted by image id first
    so the result does not depend on evaluation order.
    """
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    order = np.argsort([r.image_id for r in records], kind="stable")
    records = [records[i] for i in order]
    report = EvalReport(method=method, records=records)

    want_curve = "max_f" in metrics or "ave_f" in metrics
    if want_curve:
        curves = [curves[i] for i in order]
        if any(c is None for c in curves):
            raise ValueError("missing threshold curves for dataset F scores")
        mean_curve = np.mean(np.stack(curves), axis=0)
        denom = beta2 * mean_curve[:, 0] + mean_curve[:, 1]
        f = np.divide((1.0 + beta2) * mean_curve[:, 0] * mean_curve[:, 1],
                      denom, out=np.zeros(NUM_THRESHOLDS), where=denom > 0)
        mean_curve[:, 2] = f
        report.curve = mean_curve
        if "max_f" in metrics:
            report.dataset["max_f"] = float(f.max())
            report.dataset["max_f_image_mean"] = float(
                np.mean([r.max_f for r in records]))
        if "ave_f" in metrics:
            report.dataset["ave_f"] = float(f.mean())
            report.dataset["ave_f_image_mean"] = float(
                np.mean([r.ave_f for r in records]))
    for name in ("fbw", "mae", "s_measure", "e_measure"):
        if name in metrics:
            report.dataset[name] = float(
                np.mean([getattr(r, name) for r in records]))
    return report
