"""Batch CLI harness: evaluation runs, report emitters, gradient-check
suites, dataset-protocol commands and the desk-scale demo trainer."""

from .config import RunConfig, load_config
from .evaluate import evaluate_directory, pair_stems, resize_nearest
from .reports import (DropReport, compare_reports, drop_report,
                      format_delta, load_report_csv, report_to_csv,
                      report_to_markdown, write_eval_report)
from .synth import SynthScene, synth_dataset
from .train import PixelLogisticModel, TrainRun, micro_train

__all__ = [
    "RunConfig", "load_config",
    "evaluate_directory", "pair_stems", "resize_nearest",
    "DropReport", "compare_reports", "drop_report", "format_delta",
    "load_report_csv", "report_to_csv", "report_to_markdown",
    "write_eval_report",
    "SynthScene", "synth_dataset",
    "PixelLogisticModel", "TrainRun", "micro_train",
]
