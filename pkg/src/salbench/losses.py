"""Training losses over soft saliency predictions, with analytic gradients.

Every loss maps a prediction x in [0,1]^(HxW) and a binary mask y to a
scalar >= 0 together with the exact per-pixel gradient dL/dx.  Region
losses are built on soft confusion counts

    tp = sum x*y   fp = sum x*(1-y)   fn = sum (1-x)*y   tn = sum (1-x)*(1-y)

which conserve tp+fp+fn+tn = W*H for any x.

Available ids:

* ``bce``    mean binary cross-entropy
* ``ct``     cross-entropy with contour-derived pixel weights
* ``dice``   1 - 2*tp / (2*tp + fp + fn)
* ``ssim``   1 - SSIM over the whole image as a single window
* ``iou``    1 - tp / (tp + fp + fn)
* ``fbeta``  1 - soft F-beta from the soft counts
* ``fc``     soft F-beta restricted to the ground-truth contour band
* ``ea``     ct + mix * fc

The contour weights of ``ct`` and ``ea`` are treated as constants of the
current prediction: the gradient does not flow through them.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .masks import extract_contour
from .validation import check_pair


@dataclass
class LossConfig:
    """Shared knobs of the loss family.

    beta2           beta^2 of the soft F losses
    contour_weight  k in the contour amplification gamma = contour*k + 1
    mix             lambda blending fc into ea
    epsilon         clamp distance from {0,1} inside the log terms
    """
    beta2: float = 0.3
    contour_weight: float = 5.0
    mix: float = 1.0
    epsilon: float = 1e-6

    def validate(self):
        if not self.beta2 > 0.0:
            raise ValueError("beta2 must be positive, got %r" % self.beta2)
        if self.contour_weight < 0.0:
            raise ValueError(
                "contour_weight must be >= 0, got %r" % self.contour_weight)
        if self.mix < 0.0:
            raise ValueError("mix must be >= 0, got %r" % self.mix)
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(
                "epsilon must lie in (0, 0.5), got %r" % self.epsilon)
        return self


class LossResult(NamedTuple):
    value: float
    gradient: np.ndarray


class SoftCounts(NamedTuple):
    tp: float
    fp: float
    fn: float
    tn: float


def soft_counts(pred, gt):
    """Soft confusion counts of a prediction against a binary mask."""
    x, y = check_pair(pred, gt)
    tp = float((x * y).sum())
    fp = float((x * (1.0 - y)).sum())
    fn = float(((1.0 - x) * y).sum())
    tn = float(((1.0 - x) * (1.0 - y)).sum())
    return SoftCounts(tp, fp, fn, tn)


def _config(config):
    cfg = LossConfig() if config is None else config
    return cfg.validate()


# ---------------------------------------------------------------------------
# cross-entropy family

def bce_loss(pred, gt, config=None):
    x, y = check_pair(pred, gt)
    cfg = _config(config)
    n = x.size
    xm = np.clip(x, cfg.epsilon, 1.0 - cfg.epsilon)
    term = y * np.log(xm) + (1.0 - y) * np.log(1.0 - xm)
    value = -float(term.mean())
    grad = (xm - y) / (xm * (1.0 - xm)) / n
    return LossResult(value, grad)


def contour_bce_loss(pred, gt, config=None, pred_contour=None,
                     gt_contour=None):
    """Cross-entropy with pixels near either contour amplified.

    gamma = max(contour(x), contour(y)) * k + 1 weighs each pixel's
    cross-entropy term.  gamma is a function of the current prediction
    but is held fixed under differentiation (no gradient flows through
    the contour operator); callers doing finite-difference checks should
    pass the frozen `pred_contour` explicitly.
    """
    x, y = check_pair(pred, gt)
    cfg = _config(config)
    n = x.size
    if pred_contour is None:
        pred_contour = extract_contour(x)
    if gt_contour is None:
        gt_contour = extract_contour(y)
    gamma = np.maximum(pred_contour, gt_contour) * cfg.contour_weight + 1.0
    xm = np.clip(x, cfg.epsilon, 1.0 - cfg.epsilon)
    term = y * np.log(xm) + (1.0 - y) * np.log(1.0 - xm)
    value = -float((gamma * term).mean())
    grad = gamma * ((xm - y) / (xm * (1.0 - xm)) / n)
    return LossResult(value, grad)


# ---------------------------------------------------------------------------
# region overlap family

def dice_loss(pred, gt, config=None):
    x, y = check_pair(pred, gt)
    _config(config)
    tp = float((x * y).sum())
    # 2*tp + fp + fn simplifies to sum(x) + sum(y)
    denom = float(x.sum()) + float(y.sum())
    if denom == 0.0:
        return LossResult(0.0, np.zeros_like(x))
    value = 1.0 - 2.0 * tp / denom
    grad = 2.0 * tp / denom ** 2 - 2.0 * y / denom
    return LossResult(value, grad)


def iou_loss(pred, gt, config=None):
    x, y = check_pair(pred, gt)
    _config(config)
    tp = float((x * y).sum())
    # tp + fp + fn simplifies to sum(x) + sum(y) - tp
    union = float(x.sum()) + float(y.sum()) - tp
    if union == 0.0:
        return LossResult(0.0, np.zeros_like(x))
    value = 1.0 - tp / union
    grad = tp * (1.0 - y) / union ** 2 - y / union
    return LossResult(value, grad)


def fbeta_loss(pred, gt, config=None):
    x, y = check_pair(pred, gt)
    cfg = _config(config)
    b2 = cfg.beta2
    tp = float((x * y).sum())
    # (1+b2)*tp over  b2*(tp+fp) + (tp+fn)  =  b2*sum(x) + sum(y)
    denom = float(y.sum()) + b2 * float(x.sum())
    if denom == 0.0:
        return LossResult(0.0, np.zeros_like(x))
    value = 1.0 - (1.0 + b2) * tp / denom
    grad = (1.0 + b2) * (b2 * tp / denom ** 2 - y / denom)
    return LossResult(value, grad)


def contour_fbeta_loss(pred, gt, config=None, gt_contour=None):
    """Soft F-beta evaluated only inside the ground-truth contour band.

    The band m = contour(y) depends on the mask alone, so the gradient is
    exact (simply masked by m).  A mask without any contour response
    gives loss 0 with a zero gradient.
    """
    x, y = check_pair(pred, gt)
    cfg = _config(config)
    b2 = cfg.beta2
    if gt_contour is None:
        gt_contour = extract_contour(y)
    m = gt_contour
    tp = float((m * x * y).sum())
    denom = float((m * y).sum()) + b2 * float((m * x).sum())
    if denom == 0.0:
        return LossResult(0.0, np.zeros_like(x))
    value = 1.0 - (1.0 + b2) * tp / denom
    grad = m * ((1.0 + b2) * (b2 * tp / denom ** 2 - y / denom))
    return LossResult(value, grad)


# ---------------------------------------------------------------------------
# structural similarity

# stability constants (0.01^2 and 0.03^2 of the unit dynamic range)
SSIM_C1 = 1e-4
SSIM_C2 = 9e-4


def ssim_loss(pred, gt, config=None):
    """1 - SSIM with the whole image as a single window.

    Means, variances and the covariance are population statistics
    (divisor N).  Two constant images, whatever the constant, compare as
    perfectly similar.
    """
    x, y = check_pair(pred, gt)
    _config(config)
    n = x.size
    mx = float(x.mean())
    my = float(y.mean())
    dx = x - mx
    dy = y - my
    vx = float((dx * dx).mean())
    vy = float((dy * dy).mean())
    cxy = float((dx * dy).mean())
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * cxy + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = vx + vy + SSIM_C2
    ssim = (a1 * a2) / (b1 * b2)
    value = 1.0 - ssim
    # quotient rule; dmx = 1/n, dvx = 2*dx/n, dcxy = dy/n per pixel
    dssim = ((2.0 * my / n) * a2 + a1 * (2.0 * dy / n)) / (b1 * b2) \
        - ssim * ((2.0 * mx / n) / b1 + (2.0 * dx / n) / b2)
    return LossResult(value, -dssim)


# ---------------------------------------------------------------------------
# combined losses

def edge_aware_loss(pred, gt, config=None, pred_contour=None,
                    gt_contour=None):
    """Contour-weighted cross-entropy plus mix * contour-band F-beta."""
    cfg = _config(config)
    ct = contour_bce_loss(pred, gt, cfg, pred_contour=pred_contour,
                          gt_contour=gt_contour)
    fc = contour_fbeta_loss(pred, gt, cfg, gt_contour=gt_contour)
    value = ct.value + cfg.mix * fc.value
    grad = ct.gradient + cfg.mix * fc.gradient
    return LossResult(value, grad)


# ---------------------------------------------------------------------------
# registry and gradient checking

LOSSES = {
    "bce": bce_loss,
    "ct": contour_bce_loss,
    "dice": dice_loss,
    "ssim": ssim_loss,
    "iou": iou_loss,
    "fbeta": fbeta_loss,
    "fc": contour_fbeta_loss,
    "ea": edge_aware_loss,
}


def get_loss(loss_id):
    try:
        return LOSSES[loss_id]
    except KeyError:
        raise KeyError(
            "unknown loss %r, expected one of %s"
            % (loss_id, sorted(LOSSES))) from None


def frozen_value_fn(loss_id, pred0, gt, config=None):
    """Scalar loss as a function of the prediction alone, with every
    quantity that the gradient treats as constant frozen at `pred0`.

    For ``ct`` and ``ea`` this pins the prediction contour, matching the
    stop-gradient semantics of their analytic gradients.
    """
    fn = get_loss(loss_id)
    cfg = _config(config)
    if loss_id in ("ct", "ea"):
        frozen = extract_contour(np.asarray(pred0, dtype=np.float64))
        return lambda p: fn(p, gt, cfg, pred_contour=frozen).value
    return lambda p: fn(p, gt, cfg).value


def finite_difference_check(loss_id, pred, gt, config=None, step=1e-6,
                            scale_component=None, scale_factor=1.0):
    """Largest relative error between the analytic gradient and central
    finite differences.

    The prediction must keep step-room inside (epsilon, 1-epsilon) so the
    clamped losses stay smooth at the probe points.  `scale_component`
    deliberately corrupts one flat-index gradient entry by
    `scale_factor`; a checker that still passes with a corrupted gradient
    is broken, so the self-test path scales a component and expects a
    large error.
    """
    if not step > 0.0:
        raise ValueError("step must be positive, got %r" % step)
    x, y = check_pair(pred, gt)
    cfg = _config(config)
    lo = x.min()
    hi = x.max()
    if lo < cfg.epsilon + step or hi > 1.0 - cfg.epsilon - step:
        raise ValueError(
            "prediction values must lie in (epsilon + step, 1 - epsilon - "
            "step) for a meaningful check, got range [%g, %g]" % (lo, hi))
    analytic = get_loss(loss_id)(x, y, cfg).gradient.copy()
    if scale_component is not None:
        analytic.flat[scale_component] *= scale_factor
    value_of = frozen_value_fn(loss_id, x, gt, cfg)
    worst = 0.0
    flat = x.ravel()
    for i in range(flat.size):
        xp = x.copy()
        xp.flat[i] = flat[i] + step
        xm = x.copy()
        xm.flat[i] = flat[i] - step
        numeric = (value_of(xp) - value_of(xm)) / (2.0 * step)
        denom = max(abs(numeric), abs(analytic.flat[i]))
        if denom < 1e-8:
            err = abs(numeric - analytic.flat[i])
        else:
            err = abs(numeric - analytic.flat[i]) / denom
        worst = max(worst, err)
    return worst
