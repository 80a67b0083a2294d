"""Calibration evaluation for object detectors.

The package measures how well detection confidence scores track the
conditional probability that a detection is correct. The headline
estimator is a leave-one-out kernel regression with a boundary-corrected
Beta kernel; binned baselines, COCO-style matching, a synthetic
convergence benchmark, and a CLI round it out.
"""

from ._backend import BACKEND_NAME
from .binned import (BinningConfig, apply_temperature, d_cls, d_det, d_ece,
                     fit_temperature, la_ece, scaled_nll)
from .coco_io import (DatasetBundle, DatasetError, load_dataset,
                      load_detections, load_ground_truth)
from .geometry import Box, area, dice, intersection_area, iou
from .kde import (CeEstimate, KdeConfig, beta_kernel, clamp_scores,
                  conditional_expectation, estimate_ce, estimate_ce_detailed,
                  estimate_ce_gradient, loo_mle_bandwidth)
from .links import (LinkSpec, apply_link, hinge, identity, parse_link, ramp,
                    threshold)
from .matching import (Detection, GroundTruthBox, MatchConfig, MatchedSample,
                       MatchingError, match_detections, partition_by_size,
                       size_class_of)
from .report import (CalibrationReport, ReportConfig, evaluate_report,
                     report_from_json, report_to_csv, report_to_json,
                     sweep_gamma)
from .synth import (SynthConfig, convergence_experiment, generate,
                    ground_truth_ce, temperature_scale, true_conditional)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "BinningConfig",
    "Box",
    "CalibrationReport",
    "CeEstimate",
    "DatasetBundle",
    "DatasetError",
    "Detection",
    "GroundTruthBox",
    "KdeConfig",
    "LinkSpec",
    "MatchConfig",
    "MatchedSample",
    "MatchingError",
    "ReportConfig",
    "SynthConfig",
    "__version__",
    "apply_link",
    "apply_temperature",
    "area",
    "beta_kernel",
    "clamp_scores",
    "conditional_expectation",
    "convergence_experiment",
    "d_cls",
    "d_det",
    "d_ece",
    "dice",
    "estimate_ce",
    "estimate_ce_detailed",
    "estimate_ce_gradient",
    "evaluate_report",
    "fit_temperature",
    "generate",
    "ground_truth_ce",
    "hinge",
    "identity",
    "intersection_area",
    "iou",
    "la_ece",
    "load_dataset",
    "load_detections",
    "load_ground_truth",
    "loo_mle_bandwidth",
    "match_detections",
    "parse_link",
    "partition_by_size",
    "ramp",
    "report_from_json",
    "report_to_csv",
    "report_to_json",
    "scaled_nll",
    "size_class_of",
    "sweep_gamma",
    "temperature_scale",
    "threshold",
    "true_conditional",
]
