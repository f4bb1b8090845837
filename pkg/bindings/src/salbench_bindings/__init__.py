"""Array-in/array-out front door to the saliency toolkit.

A thin delegating layer for embedding the losses and metrics in
external training loops: plain buffers in, a (value, gradient) pair or
a name -> value mapping out.  Nothing is recomputed here, so every
result matches the core library bit for bit, and errors raised by the
core propagate unchanged.

No training-framework integration is provided; callers wrap the raw
value/gradient pair themselves.  All functions are re-entrant and hold
no state across calls.
"""

import numpy as np

import salbench
from salbench.losses import LossConfig, get_loss
from salbench.metrics import ALPHA, BETA2, METRIC_NAMES, evaluate_pair

__version__ = salbench.__version__

__all__ = ["loss", "metrics", "__version__"]


def _view(data, shape):
    """2-D float64 view of `data`.

    Contiguous float64 input is wrapped without copying; `shape` turns a
    flat buffer into a (height, width) view.
    """
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        arr = arr.reshape(tuple(shape))
    return arr


def loss(loss_id, pred, gt, config=None, shape=None):
    """Loss value and gradient of a (prediction, ground truth) pair.

    `loss_id` is a registry id ("bce", "ct", "dice", "ssim", "iou",
    "fbeta", "fc", "ea"); `config` maps LossConfig field names to
    overrides; `shape` reshapes flat buffers.  Returns (value, gradient)
    where the gradient is a fresh float64 array owned by the caller.
    """
    fn = get_loss(loss_id)
    if config is None or isinstance(config, LossConfig):
        cfg = config
    else:
        cfg = LossConfig(**dict(config))
    result = fn(_view(pred, shape), _view(gt, shape), cfg)
    return result.value, result.gradient


def metrics(pred, gt, options=None, shape=None):
    """The saliency scores of one pair as a name -> value mapping.

    `options` may select a subset ("metrics": iterable of names) and
    override "beta2" or "alpha"; unknown keys are rejected.  The default
    is all six scores: max_f, ave_f, fbw, mae, s_measure, e_measure.
    """
    opts = dict(options) if options else {}
    names = tuple(opts.pop("metrics", METRIC_NAMES))
    beta2 = float(opts.pop("beta2", BETA2))
    alpha = float(opts.pop("alpha", ALPHA))
    if opts:
        raise TypeError("unknown options: %s" % sorted(opts))
    for name in names:
        if name not in METRIC_NAMES:
            raise ValueError(
                "unknown metric %r, expected a subset of %s"
                % (name, list(METRIC_NAMES)))
    record, _ = evaluate_pair(_view(pred, shape), _view(gt, shape),
                              beta2=beta2, alpha=alpha, metrics=names)
    return {name: getattr(record, name) for name in names}
