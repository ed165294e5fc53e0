"""Parsers for the two real-data interchange schemas.

Scene-graph schema (one JSON object per line):
    {image_id, view, width, height, regions: [{name, bbox: [x1,y1,x2,y2]}]}

Phrase-box schema (one JSON object per line):
    {image_id, width, height, phrase, category, bbox_xywh: [x,y,w,h]}

Both parsers are total on their schemas: every input entry either becomes a
GroundingRecord or increments a named rejection counter, and the counts
reconcile exactly with the input size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from medground.data.lexicon import SynonymLexicon
from medground.data.records import (
    PATHOLOGY_NAMES,
    TASK_ANATOMY,
    TASK_FINDING,
    DatasetManifest,
    GroundingRecord,
    ImageInfo,
)
from medground.geometry import MIN_AREA, BoxXYXY


class ParseError(ValueError):
    """Malformed document; message carries line and field context."""


@dataclass
class ParseStats:
    """Per-category acceptance/rejection counters; they reconcile exactly."""

    accepted: int = 0
    skipped_non_frontal: int = 0
    skipped_unknown_structure: int = 0
    dropped_box_outside_image: int = 0
    rejected_unknown_category: int = 0
    rejected_degenerate_box: int = 0

    def total_seen(self) -> int:
        return (
            self.accepted
            + self.skipped_non_frontal
            + self.skipped_unknown_structure
            + self.dropped_box_outside_image
            + self.rejected_unknown_category
            + self.rejected_degenerate_box
        )


def _iter_lines(document: str | Path | Iterable[str]) -> Iterable[tuple[int, str]]:
    if isinstance(document, (str, Path)) and Path(document).exists():
        with open(document, encoding="utf-8") as f:
            for i, line in enumerate(f, start=1):
                yield i, line
        return
    if isinstance(document, str):
        lines = document.splitlines()
    else:
        lines = list(document)
    for i, line in enumerate(lines, start=1):
        yield i, line


def _load_line(lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"line {lineno}: expected an object, got {type(obj).__name__}")
    return obj


def _require(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise ParseError(f"line {lineno}: missing field {key!r}")
    return obj[key]


def _box_inside(box: BoxXYXY, width: int, height: int, tol: float = 1e-6) -> bool:
    return (
        box.x1 >= -tol and box.y1 >= -tol and box.x2 <= width + tol and box.y2 <= height + tol
    )


def parse_imagenome(
    document: str | Path | Iterable[str],
    lexicon: SynonymLexicon,
) -> tuple[list[GroundingRecord], dict[str, ImageInfo], ParseStats]:
    """Parse scene-graph lines into anatomy records.

    Only frontal-view images contribute records; structure names outside the
    lexicon's canonical vocabulary are skipped and counted, as are boxes that
    fall outside their image or have degenerate extent.
    """
    records: list[GroundingRecord] = []
    images: dict[str, ImageInfo] = {}
    stats = ParseStats()

    for lineno, line in _iter_lines(document):
        if not line.strip():
            continue
        obj = _load_line(lineno, line)
        image_id = _require(obj, "image_id", lineno)
        view = _require(obj, "view", lineno)
        width = _require(obj, "width", lineno)
        height = _require(obj, "height", lineno)
        regions = _require(obj, "regions", lineno)
        if not isinstance(regions, list):
            raise ParseError(f"line {lineno}: field 'regions' must be a list")

        if view != "frontal":
            stats.skipped_non_frontal += len(regions)
            continue

        images[image_id] = ImageInfo(
            path=obj.get("path", ""), width=int(width), height=int(height)
        )
        for region in regions:
            name = _require(region, "name", lineno)
            bbox = _require(region, "bbox", lineno)
            if not (isinstance(bbox, list) and len(bbox) == 4):
                raise ParseError(f"line {lineno}: field 'bbox' must be [x1,y1,x2,y2]")
            if name not in lexicon:
                stats.skipped_unknown_structure += 1
                continue
            x1, y1, x2, y2 = (float(v) for v in bbox)
            if x2 - x1 <= 0 or y2 - y1 <= 0 or (x2 - x1) * (y2 - y1) < MIN_AREA:
                stats.rejected_degenerate_box += 1
                continue
            box = BoxXYXY(x1, y1, x2, y2)
            if not _box_inside(box, int(width), int(height)):
                stats.dropped_box_outside_image += 1
                continue
            records.append(
                GroundingRecord(
                    record_id=f"{image_id}/{name}",
                    image_id=image_id,
                    image_path=images[image_id].path,
                    text=name,
                    box=box,
                    task=TASK_ANATOMY,
                    category=name,
                    canonical_term=name,
                )
            )
            stats.accepted += 1

    return records, images, stats


def parse_mscxr(
    document: str | Path | Iterable[str],
) -> tuple[list[GroundingRecord], dict[str, ImageInfo], ParseStats]:
    """Parse phrase-box lines into finding records.

    Boxes arrive as (x, y, w, h) and are converted to corner form here so
    everything downstream sees a single convention.
    """
    records: list[GroundingRecord] = []
    images: dict[str, ImageInfo] = {}
    stats = ParseStats()
    counter_per_image: dict[str, int] = {}

    for lineno, line in _iter_lines(document):
        if not line.strip():
            continue
        obj = _load_line(lineno, line)
        image_id = _require(obj, "image_id", lineno)
        width = int(_require(obj, "width", lineno))
        height = int(_require(obj, "height", lineno))
        phrase = _require(obj, "phrase", lineno)
        category = _require(obj, "category", lineno)
        bbox = _require(obj, "bbox_xywh", lineno)
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise ParseError(f"line {lineno}: field 'bbox_xywh' must be [x,y,w,h]")

        if category not in PATHOLOGY_NAMES:
            stats.rejected_unknown_category += 1
            continue
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0 or h <= 0 or w * h < MIN_AREA:
            stats.rejected_degenerate_box += 1
            continue
        box = BoxXYXY(x, y, x + w, y + h)
        if not _box_inside(box, width, height):
            stats.dropped_box_outside_image += 1
            continue

        images.setdefault(image_id, ImageInfo(path=obj.get("path", ""), width=width, height=height))
        index = counter_per_image.get(image_id, 0)
        counter_per_image[image_id] = index + 1
        records.append(
            GroundingRecord(
                record_id=f"{image_id}/finding-{index}",
                image_id=image_id,
                image_path=images[image_id].path,
                text=phrase,
                box=box,
                task=TASK_FINDING,
                category=category,
            )
        )
        stats.accepted += 1

    return records, images, stats


def manifest_from_imagenome(
    document: str | Path | Iterable[str], lexicon: SynonymLexicon
) -> tuple[DatasetManifest, ParseStats]:
    records, images, stats = parse_imagenome(document, lexicon)
    return DatasetManifest(records=records, images=images, provenance="imagenome"), stats


def manifest_from_mscxr(
    document: str | Path | Iterable[str],
) -> tuple[DatasetManifest, ParseStats]:
    records, images, stats = parse_mscxr(document)
    return DatasetManifest(records=records, images=images, provenance="mscxr"), stats
