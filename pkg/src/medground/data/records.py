"""Core supervision records and the dataset manifest.

A :class:`GroundingRecord` is one (image, text, box) triple; ``task``
distinguishes anatomical-structure records (pre-training supervision) from
finding records (the downstream phrase grounding task).

The on-disk interchange format is a manifest JSON file next to a
line-delimited ``records.jsonl`` (one record object per line).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from medground.geometry import BoxXYXY

TASK_ANATOMY = "anatomy"
TASK_FINDING = "finding"

PATHOLOGY_NAMES = (
    "cardiomegaly",
    "lung opacity",
    "edema",
    "consolidation",
    "pneumonia",
    "atelectasis",
    "pneumothorax",
    "pleural effusion",
)


class ManifestError(ValueError):
    """Raised for manifests that violate referential integrity."""


@dataclass(frozen=True)
class GroundingRecord:
    record_id: str
    image_id: str
    image_path: str
    text: str
    box: BoxXYXY
    task: str  # TASK_ANATOMY or TASK_FINDING
    category: str
    canonical_term: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"record {self.record_id}: empty text")
        if self.task not in (TASK_ANATOMY, TASK_FINDING):
            raise ValueError(f"record {self.record_id}: unknown task {self.task!r}")

    def to_json_obj(self) -> dict:
        return {
            "record_id": self.record_id,
            "image_id": self.image_id,
            "image_path": self.image_path,
            "text": self.text,
            "box": list(self.box.as_tuple()),
            "task": self.task,
            "category": self.category,
            "canonical_term": self.canonical_term,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GroundingRecord":
        return cls(
            record_id=obj["record_id"],
            image_id=obj["image_id"],
            image_path=obj["image_path"],
            text=obj["text"],
            box=BoxXYXY(*obj["box"]),
            task=obj["task"],
            category=obj["category"],
            canonical_term=obj.get("canonical_term"),
        )


@dataclass(frozen=True)
class ImageInfo:
    path: str
    width: int
    height: int


@dataclass
class DatasetManifest:
    records: list[GroundingRecord]
    images: dict[str, ImageInfo]
    provenance: str  # "imagenome" | "mscxr" | "synthetic"

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.record_id in seen:
                raise ManifestError(f"duplicate record_id {rec.record_id!r}")
            seen.add(rec.record_id)
            if rec.image_id not in self.images:
                raise ManifestError(
                    f"record {rec.record_id} references unknown image {rec.image_id!r}"
                )

    def anatomy_records(self) -> list[GroundingRecord]:
        return [r for r in self.records if r.task == TASK_ANATOMY]

    def finding_records(self) -> list[GroundingRecord]:
        return [r for r in self.records if r.task == TASK_FINDING]

    def records_by_id(self) -> dict[str, GroundingRecord]:
        return {r.record_id: r for r in self.records}

    def image_size(self, image_id: str) -> tuple[int, int]:
        info = self.images[image_id]
        return (info.width, info.height)

    def data_hash(self) -> str:
        """Stable content hash over records and image metadata."""
        h = hashlib.sha256()
        for rec in self.records:
            h.update(json.dumps(rec.to_json_obj(), sort_keys=True).encode())
        for image_id in sorted(self.images):
            info = self.images[image_id]
            h.update(f"{image_id}|{info.width}|{info.height}".encode())
        return h.hexdigest()

    # -- on-disk form -----------------------------------------------------

    def save(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        header = {
            "provenance": self.provenance,
            "images": {
                image_id: {"path": info.path, "width": info.width, "height": info.height}
                for image_id, info in sorted(self.images.items())
            },
        }
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(header, f, sort_keys=True, indent=2)
            f.write("\n")
        with open(out_dir / "records.jsonl", "w", encoding="utf-8") as f:
            for rec in self.records:
                f.write(json.dumps(rec.to_json_obj(), sort_keys=True))
                f.write("\n")

    @classmethod
    def load(cls, in_dir: str | Path) -> "DatasetManifest":
        in_dir = Path(in_dir)
        with open(in_dir / "manifest.json", encoding="utf-8") as f:
            header = json.load(f)
        images = {
            image_id: ImageInfo(path=o["path"], width=o["width"], height=o["height"])
            for image_id, o in header["images"].items()
        }
        records = []
        with open(in_dir / "records.jsonl", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(GroundingRecord.from_json_obj(json.loads(line)))
        return cls(records=records, images=images, provenance=header["provenance"])


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/val/test record-id sets, a pure function of its inputs."""

    train: frozenset[str]
    val: frozenset[str]
    test: frozenset[str]
    seed: int

    def __post_init__(self) -> None:
        if self.train & self.val or self.train & self.test or self.val & self.test:
            raise ValueError("split partitions overlap")

    def partition(self, name: str) -> frozenset[str]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]

    def to_json_obj(self) -> dict:
        return {
            "train": sorted(self.train),
            "val": sorted(self.val),
            "test": sorted(self.test),
            "seed": self.seed,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SplitSpec":
        return cls(
            train=frozenset(obj["train"]),
            val=frozenset(obj["val"]),
            test=frozenset(obj["test"]),
            seed=obj["seed"],
        )
