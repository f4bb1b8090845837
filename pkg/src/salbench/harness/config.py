"""Run configuration: defaults, TOML loading and CLI-flag merging.

The config file mirrors RunConfig with an optional [loss] table:

    pred_dirs = ["out/methodA"]
    gt_dir = "data/gt"
    workers = 4
    metrics = ["max_f", "ave_f", "mae"]

    [loss]
    id = "ea"
    beta2 = 0.3
    contour_weight = 5.0
    mix = 1.0
    epsilon = 1e-6

CLI flags always override file values.
"""

import sys
from dataclasses import dataclass, field, fields

from ..losses import LOSSES, LossConfig
from ..masks import BINARIZE_THRESHOLD
from ..metrics import METRIC_NAMES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class RunConfig:
    pred_dirs: list = field(default_factory=list)
    gt_dir: str = ""
    methods: list = field(default_factory=list)  # parallel to pred_dirs
    loss: str = "ea"
    loss_config: LossConfig = field(default_factory=LossConfig)
    metrics: tuple = METRIC_NAMES
    binarize_threshold: float = BINARIZE_THRESHOLD
    resize: bool = False
    skip_unpaired: bool = False
    workers: int = 1
    seed: int = 0
    out: str = ""

    def validate(self):
        if self.workers < 1:
            raise ValueError("worker count must be >= 1, got %r" % self.workers)
        if self.loss not in LOSSES:
            raise ValueError(
                "unknown loss %r, expected one of %s"
                % (self.loss, sorted(LOSSES)))
        bad = [m for m in self.metrics if m not in METRIC_NAMES]
        if bad:
            raise ValueError(
                "unknown metric %r, expected a subset of %s"
                % (bad[0], list(METRIC_NAMES)))
        if self.methods and len(self.methods) != len(self.pred_dirs):
            raise ValueError(
                "got %d method names for %d prediction directories"
                % (len(self.methods), len(self.pred_dirs)))
        self.loss_config.validate()
        return self


_TOP_KEYS = {f.name for f in fields(RunConfig)} - {"loss_config"} | {"pred_dir"}
_LOSS_KEYS = {"id", "beta2", "contour_weight", "mix", "epsilon"}


def load_config(path):
    """RunConfig from a TOML file; unknown keys are hard errors."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = RunConfig()
    loss_tbl = raw.pop("loss", {})
    for key in raw:
        if key not in _TOP_KEYS:
            raise ValueError("unknown config key %r in %s" % (key, path))
    for key in loss_tbl:
        if key not in _LOSS_KEYS:
            raise ValueError("unknown [loss] config key %r in %s" % (key, path))

    if "pred_dir" in raw:  # singular convenience spelling
        raw.setdefault("pred_dirs", [raw.pop("pred_dir")])
    for key, value in raw.items():
        if key in ("pred_dirs", "methods", "metrics") \
                and isinstance(value, str):
            value = [value]
        if key == "metrics":
            value = tuple(value)
        setattr(cfg, key, value)
    if "id" in loss_tbl:
        cfg.loss = loss_tbl["id"]
    for key in ("beta2", "contour_weight", "mix", "epsilon"):
        if key in loss_tbl:
            setattr(cfg.loss_config, key, float(loss_tbl[key]))
    return cfg.validate()
