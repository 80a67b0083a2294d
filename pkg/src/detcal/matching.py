"""Greedy matching of detections to annotations, producing calibration samples.

Matching runs independently per (image, category) group. Within a group,
detections are visited in descending score order (ties broken by input
order) and each one claims the unmatched annotation with the highest
similarity, provided that similarity reaches the matching threshold. Ignore
annotations participate in the same pool; a detection that lands on one is
dropped from the output and the annotation is consumed.

The output is canonicalized (sorted by image, category, descending score,
then input order) so the result is reproducible no matter how the work is
scheduled internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .geometry import Box, area, dice, iou
from .links import LinkSpec, apply_link, threshold

SMALL = "small"
MEDIUM = "medium"
LARGE = "large"
SIZE_CLASSES = (SMALL, MEDIUM, LARGE)

SMALL_MAX_AREA = 32.0 ** 2
MEDIUM_MAX_AREA = 96.0 ** 2

_SIMILARITIES = {"iou": iou, "dice": dice}


class MatchingError(ValueError):
    """Raised when inputs are inconsistent with the configured vocabulary."""


@dataclass(frozen=True)
class Detection:
    """A scored box prediction for one image."""

    image_id: Hashable
    category_id: int
    box: Box
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must lie in [0, 1], got {self.score!r}")


@dataclass(frozen=True)
class GroundTruthBox:
    """An annotated box. Ignore regions take part in matching but yield no sample."""

    image_id: Hashable
    category_id: int
    box: Box
    ignore: bool = False


@dataclass(frozen=True)
class MatchedSample:
    """One detection after matching: the unit every estimator consumes."""

    score: float
    similarity: float
    correctness: float
    category_id: int
    image_id: Hashable
    matched: bool
    size_class: str


@dataclass(frozen=True)
class MatchConfig:
    """Knobs for one matching pass.

    match_iou is the similarity floor for accepting a pair; score_threshold
    discards detections below it before matching.
    """

    match_iou: float = 0.5
    score_threshold: float = 0.5
    link: LinkSpec = field(default_factory=lambda: threshold(0.5))
    similarity: str = "iou"

    def __post_init__(self) -> None:
        if not 0.0 < self.match_iou <= 1.0:
            raise ValueError(f"match_iou must lie in (0, 1], got {self.match_iou!r}")
        if not 0.0 <= self.score_threshold < 1.0:
            raise ValueError(f"score_threshold must lie in [0, 1), got {self.score_threshold!r}")
        if self.similarity not in _SIMILARITIES:
            raise ValueError(f"similarity must be one of {sorted(_SIMILARITIES)}, got {self.similarity!r}")


def size_class_of(box_area: float) -> str:
    """Size bucket for a box area: small below 32^2, large from 96^2 up."""
    if box_area < SMALL_MAX_AREA:
        return SMALL
    if box_area < MEDIUM_MAX_AREA:
        return MEDIUM
    return LARGE


def _id_sort_key(image_id: Hashable):
    # Images may be keyed by ints or strings in the same dataset; sort each
    # kind internally and ints before everything else.
    if isinstance(image_id, int):
        return (0, "", image_id)
    return (1, str(image_id), 0)


def match_detections(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthBox],
    config: MatchConfig,
    categories: Iterable[int] | Mapping[int, str] | None = None,
) -> list[MatchedSample]:
    """Run greedy matching and return one sample per surviving detection.

    When ``categories`` is given, a detection whose category is absent from
    it raises :class:`MatchingError`.
    """
    if categories is not None:
        known = set(categories)
        for index, det in enumerate(detections):
            if det.category_id not in known:
                raise MatchingError(
                    f"detection {index} has category {det.category_id} "
                    f"which is absent from the category set"
                )

    sim_fn = _SIMILARITIES[config.similarity]

    kept: list[tuple[int, Detection]] = [
        (index, det)
        for index, det in enumerate(detections)
        if det.score >= config.score_threshold
    ]

    gt_groups: dict[tuple, list[GroundTruthBox]] = {}
    for gt in ground_truth:
        gt_groups.setdefault((gt.image_id, gt.category_id), []).append(gt)

    det_groups: dict[tuple, list[tuple[int, Detection]]] = {}
    for index, det in kept:
        det_groups.setdefault((det.image_id, det.category_id), []).append((index, det))

    out: list[tuple[tuple, int, float, MatchedSample]] = []
    for key, group in det_groups.items():
        gts = gt_groups.get(key, [])
        taken = [False] * len(gts)
        for index, det in sorted(group, key=lambda item: (-item[1].score, item[0])):
            best_j = -1
            best_sim = 0.0
            for j, gt in enumerate(gts):
                if taken[j]:
                    continue
                sim = sim_fn(det.box, gt.box)
                if sim > best_sim:
                    best_sim = sim
                    best_j = j
            if best_j >= 0 and best_sim >= config.match_iou:
                taken[best_j] = True
                gt = gts[best_j]
                if gt.ignore:
                    continue
                sample = MatchedSample(
                    score=det.score,
                    similarity=best_sim,
                    correctness=apply_link(config.link, best_sim),
                    category_id=det.category_id,
                    image_id=det.image_id,
                    matched=True,
                    size_class=size_class_of(area(gt.box)),
                )
            else:
                sample = MatchedSample(
                    score=det.score,
                    similarity=0.0,
                    correctness=apply_link(config.link, 0.0),
                    category_id=det.category_id,
                    image_id=det.image_id,
                    matched=False,
                    size_class=size_class_of(area(det.box)),
                )
            out.append((_id_sort_key(det.image_id), det.category_id, -det.score, index, sample))

    out.sort(key=lambda item: item[:4])
    return [item[4] for item in out]


def partition_by_size(samples: Iterable[MatchedSample]) -> dict[str, list[MatchedSample]]:
    """Split samples into the three size buckets; every bucket key is present."""
    buckets: dict[str, list[MatchedSample]] = {name: [] for name in SIZE_CLASSES}
    for sample in samples:
        buckets[sample.size_class].append(sample)
    return buckets
