"""salbench: saliency-map evaluation metrics, boundary-aware training
losses with analytic gradients, and benchmark dataset protocols.

The three layers:

* metrics / masks: the six evaluation scores (MAE, max/ave F-beta,
  weighted F-beta, S-measure, E-measure) over PNG saliency maps.
* losses: eight training losses ("bce", "ct", "dice", "ssim", "iou",
  "fbeta", "fc", "ea") returning (value, per-pixel gradient), plus a
  finite-difference gradient verifier.
* protocols / harness: dataset manifests, dedup, objectness splits,
  and the `salbench` CLI for batch evaluation and reports.
"""

from .masks import (binarize, extract_contour, load_binary_mask,
                    load_saliency_map, save_saliency_map)
from .metrics import (EvalReport, MetricRecord, aggregate,
                      confusion_at_threshold, e_measure, evaluate_pair,
                      fbeta_curve, mae, max_ave_f, s_measure,
                      weighted_fbeta)
from .losses import (LOSSES, LossConfig, LossResult, SoftCounts,
                     bce_loss, contour_bce_loss, contour_fbeta_loss,
                     dice_loss, edge_aware_loss, fbeta_loss,
                     finite_difference_check, get_loss, iou_loss,
                     soft_counts, ssim_loss)
from .protocols import (DatasetManifest, DownscaleEmbedder, DuplicatePair,
                        ManifestEntry, SplitSpec, apply_review,
                        embed_image, find_duplicates, load_manifest,
                        objectness_score, read_scores_file, save_manifest,
                        split_fewshot, split_objectness, split_standard)

__version__ = "0.1.0"

__all__ = [
    "binarize", "extract_contour", "load_binary_mask", "load_saliency_map",
    "save_saliency_map",
    "EvalReport", "MetricRecord", "aggregate", "confusion_at_threshold",
    "e_measure", "evaluate_pair", "fbeta_curve", "mae", "max_ave_f",
    "s_measure", "weighted_fbeta",
    "LOSSES", "LossConfig", "LossResult", "SoftCounts", "bce_loss",
    "contour_bce_loss", "contour_fbeta_loss", "dice_loss",
    "edge_aware_loss", "fbeta_loss", "finite_difference_check", "get_loss",
    "iou_loss", "soft_counts", "ssim_loss",
    "DatasetManifest", "DownscaleEmbedder", "DuplicatePair",
    "ManifestEntry", "SplitSpec", "apply_review", "embed_image",
    "find_duplicates", "load_manifest", "objectness_score",
    "read_scores_file", "save_manifest", "split_fewshot",
    "split_objectness", "split_standard",
    "__version__",
]
