"""Ingestion of COCO-convention JSON files.

Detections arrive as a flat JSON array of result records; ground truth
arrives in the COCO annotation schema (the subset listed in
load_ground_truth). Both use corner-plus-size bounding boxes, converted
here to the corner form the rest of the package works with. All
validation failures raise DatasetError naming the record at fault.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from numbers import Real
from typing import Union

from .geometry import Box
from .matching import Detection, GroundTruthBox

logger = logging.getLogger(__name__)

ImageId = Union[int, str]


class DatasetError(ValueError):
    """A dataset file is malformed; the message names the offending record."""


@dataclass(frozen=True)
class DatasetBundle:
    """A detection file and an annotation file loaded and cross-checked."""

    detections: list[Detection]
    ground_truth: list[GroundTruthBox]
    categories: dict[int, str]


def _read_json(path: str, what: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{what} file {path!r} is not valid JSON: {exc}") from exc


def _field(record: dict, key: str, where: str):
    if not isinstance(record, dict):
        raise DatasetError(f"{where} must be a JSON object, got {type(record).__name__}")
    if key not in record:
        raise DatasetError(f"{where} is missing required field {key!r}")
    return record[key]


def _number(value, key: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise DatasetError(f"{where} field {key!r} must be a number, got {value!r}")
    return float(value)


def _image_id(value, where: str) -> ImageId:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise DatasetError(
            f"{where} field 'image_id' must be an integer or string, got {value!r}")
    return value


def _category_id(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetError(f"{where} field 'category_id' must be an integer, got {value!r}")
    return value


def _box_from_xywh(bbox, where: str) -> Box:
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        raise DatasetError(f"{where} field 'bbox' must be [x, y, width, height], got {bbox!r}")
    x, y, w, h = (_number(v, "bbox", where) for v in bbox)
    if w < 0.0 or h < 0.0:
        raise DatasetError(f"{where} has negative bbox width or height ({w}, {h})")
    try:
        return Box(x, y, x + w, y + h)
    except ValueError as exc:
        raise DatasetError(f"{where} has an invalid bbox: {exc}") from exc


def load_detections(path: str) -> list[Detection]:
    """Parse a JSON array of detection results.

    Each record is {image_id, category_id, bbox: [x, y, width, height],
    score}. Scores outside [0, 1] are clamped; the number of clamped
    records is emitted as a single warning through the module logger.
    """
    data = _read_json(path, "detections")
    if not isinstance(data, list):
        raise DatasetError(f"detections file {path!r} must contain a JSON array")
    out: list[Detection] = []
    clamped = 0
    for index, record in enumerate(data):
        where = f"detection record {index}"
        image_id = _image_id(_field(record, "image_id", where), where)
        category_id = _category_id(_field(record, "category_id", where), where)
        box = _box_from_xywh(_field(record, "bbox", where), where)
        score = _number(_field(record, "score", where), "score", where)
        if score < 0.0 or score > 1.0:
            score = min(max(score, 0.0), 1.0)
            clamped += 1
        out.append(Detection(image_id=image_id, category_id=category_id,
                             box=box, score=score))
    if clamped:
        logger.warning("clamped %d detection score(s) into [0, 1] while loading %s",
                       clamped, path)
    return out


def load_ground_truth(path: str) -> tuple[list[GroundTruthBox], dict[int, str]]:
    """Parse a COCO-schema annotation file.

    Uses the subset {images: [{id}], annotations: [{image_id, category_id,
    bbox, iscrowd}], categories: [{id, name}]}. iscrowd = 1 maps to the
    ignore flag. Annotations referencing an image or category not declared
    in the file are rejected.
    """
    data = _read_json(path, "ground-truth")
    if not isinstance(data, dict):
        raise DatasetError(f"ground-truth file {path!r} must contain a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in data or not isinstance(data[key], list):
            raise DatasetError(f"ground-truth file {path!r} must contain a {key!r} array")

    image_ids: set[ImageId] = set()
    for index, record in enumerate(data["images"]):
        where = f"image record {index}"
        image_ids.add(_image_id(_field(record, "id", where), where))

    categories: dict[int, str] = {}
    for index, record in enumerate(data["categories"]):
        where = f"category record {index}"
        cat_id = _category_id(_field(record, "id", where), where)
        name = _field(record, "name", where)
        if not isinstance(name, str):
            raise DatasetError(f"{where} field 'name' must be a string, got {name!r}")
        if cat_id in categories:
            raise DatasetError(f"{where} repeats category id {cat_id}")
        categories[cat_id] = name
    if not categories:
        raise DatasetError(f"ground-truth file {path!r} declares no categories")

    boxes: list[GroundTruthBox] = []
    for index, record in enumerate(data["annotations"]):
        where = f"annotation record {index}"
        image_id = _image_id(_field(record, "image_id", where), where)
        if image_id not in image_ids:
            raise DatasetError(f"{where} references unknown image id {image_id!r}")
        cat_id = _category_id(_field(record, "category_id", where), where)
        if cat_id not in categories:
            raise DatasetError(f"{where} references unknown category id {cat_id}")
        box = _box_from_xywh(_field(record, "bbox", where), where)
        iscrowd = record.get("iscrowd", 0)
        if iscrowd not in (0, 1):
            raise DatasetError(f"{where} field 'iscrowd' must be 0 or 1, got {iscrowd!r}")
        boxes.append(GroundTruthBox(image_id=image_id, category_id=cat_id,
                                    box=box, ignore=bool(iscrowd)))
    return boxes, categories


def load_dataset(detections_path: str, ground_truth_path: str) -> DatasetBundle:
    """Load both files and check every detection against the vocabulary."""
    ground_truth, categories = load_ground_truth(ground_truth_path)
    detections = load_detections(detections_path)
    for index, det in enumerate(detections):
        if det.category_id not in categories:
            raise DatasetError(
                f"detection record {index} references unknown category id {det.category_id}")
    return DatasetBundle(detections=detections, ground_truth=ground_truth,
                         categories=categories)
