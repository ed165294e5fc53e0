"""Grounding evaluation: per-sample IoU, per-category aggregation, significance.

A prediction counts as a hit when its IoU with the ground truth is strictly
greater than 0.5; the boundary value is a miss. Overall mIoU is the
unweighted mean over samples, never the mean of category means. Every
evaluation hands back the full per-sample results, sufficient to recompute
each reported aggregate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from medground.data.records import DatasetManifest, GroundingRecord
from medground.geometry import BoxXYXY, iou
from medground.model.checkpoint import Checkpoint, model_from_checkpoint
from medground.model.inference import load_image_array, predict_boxes_batched
from medground.model.network import GroundingNet
from medground.significance import mcnemar_exact_p, paired_permutation_p

HIT_THRESHOLD = 0.5


@dataclass(frozen=True)
class SampleResult:
    record_id: str
    category: str
    iou: float
    hit: bool
    pred_box: tuple[float, float, float, float]
    gt_box: tuple[float, float, float, float]

    def to_json_obj(self) -> dict:
        return {
            "record_id": self.record_id,
            "category": self.category,
            "iou": self.iou,
            "hit": self.hit,
            "pred_box": list(self.pred_box),
            "gt_box": list(self.gt_box),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SampleResult":
        return cls(
            record_id=obj["record_id"],
            category=obj["category"],
            iou=obj["iou"],
            hit=obj["hit"],
            pred_box=tuple(obj["pred_box"]),
            gt_box=tuple(obj["gt_box"]),
        )


@dataclass(frozen=True)
class CategoryMetrics:
    miou: float
    acc: float
    n: int


@dataclass
class EvalReport:
    per_category: dict[str, CategoryMetrics]
    overall: CategoryMetrics
    model_id: str
    split_id: str
    significance: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "model_id": self.model_id,
            "split_id": self.split_id,
            "overall": {"miou": self.overall.miou, "acc": self.overall.acc, "n": self.overall.n},
            "per_category": {
                cat: {"miou": m.miou, "acc": m.acc, "n": m.n}
                for cat, m in sorted(self.per_category.items())
            },
            "significance": {
                baseline: {"p_miou": p[0], "p_acc": p[1]}
                for baseline, p in sorted(self.significance.items())
            },
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EvalReport":
        return cls(
            per_category={
                cat: CategoryMetrics(m["miou"], m["acc"], m["n"])
                for cat, m in obj["per_category"].items()
            },
            overall=CategoryMetrics(
                obj["overall"]["miou"], obj["overall"]["acc"], obj["overall"]["n"]
            ),
            model_id=obj["model_id"],
            split_id=obj["split_id"],
            significance={
                baseline: (p["p_miou"], p["p_acc"])
                for baseline, p in obj.get("significance", {}).items()
            },
        )


class MissingImagesError(FileNotFoundError):
    def __init__(self, paths: list[str]):
        super().__init__(f"{len(paths)} image file(s) missing: {paths}")
        self.paths = paths


def sample_result(record: GroundingRecord, pred: tuple[float, float, float, float]) -> SampleResult:
    value = iou(BoxXYXY(*pred), record.box)
    return SampleResult(
        record_id=record.record_id,
        category=record.category,
        iou=value,
        hit=value > HIT_THRESHOLD,
        pred_box=pred,
        gt_box=record.box.as_tuple(),
    )


def evaluate_records(
    model: GroundingNet,
    manifest: DatasetManifest,
    records: list[GroundingRecord],
    root: str | Path,
    batch_size: int = 32,
) -> list[SampleResult]:
    """Ground every record and score it in the original pixel frame."""
    root = Path(root)
    missing = sorted(
        {str(root / r.image_path) for r in records if not (root / r.image_path).exists()}
    )
    if missing:
        raise MissingImagesError(missing)

    image_ids: list[str] = []
    for rec in records:
        if rec.image_id not in image_ids:
            image_ids.append(rec.image_id)
    row_of = {image_id: i for i, image_id in enumerate(image_ids)}
    images = [
        load_image_array(root / manifest.images[image_id].path) for image_id in image_ids
    ]
    texts = [r.text for r in records]
    index = [row_of[r.image_id] for r in records]

    boxes = predict_boxes_batched(model, images, texts, index, batch_size=batch_size)
    return [sample_result(rec, box) for rec, box in zip(records, boxes)]


def aggregate_results(
    results: list[SampleResult], model_id: str, split_id: str
) -> EvalReport:
    """Fold per-sample results into per-category and overall metrics.

    Sums use exact float summation, so aggregation is independent of sample
    order.
    """
    if not results:
        raise ValueError("no results to aggregate")
    by_cat: dict[str, list[SampleResult]] = {}
    for r in results:
        by_cat.setdefault(r.category, []).append(r)

    def metrics(rs: list[SampleResult]) -> CategoryMetrics:
        n = len(rs)
        return CategoryMetrics(
            miou=math.fsum(r.iou for r in rs) / n,
            acc=sum(1 for r in rs if r.hit) / n,
            n=n,
        )

    return EvalReport(
        per_category={cat: metrics(rs) for cat, rs in by_cat.items()},
        overall=metrics(results),
        model_id=model_id,
        split_id=split_id,
    )


def evaluate(
    checkpoint: Checkpoint | GroundingNet,
    manifest: DatasetManifest,
    record_ids: frozenset[str] | set[str] | None,
    root: str | Path,
    model_id: str = "model",
    split_id: str = "all",
    batch_size: int = 32,
    dump_path: str | Path | None = None,
) -> tuple[EvalReport, list[SampleResult]]:
    """Evaluate a checkpoint on the finding records of a partition.

    ``record_ids=None`` evaluates every finding record in the manifest;
    otherwise the partition is intersected with the finding records (anatomy
    records are pre-training supervision, not phrase-grounding targets). The
    per-sample results are returned and, when ``dump_path`` is given, written
    as line-delimited JSON.
    """
    model = (
        checkpoint
        if isinstance(checkpoint, GroundingNet)
        else model_from_checkpoint(checkpoint)
    )
    records = manifest.finding_records()
    if record_ids is not None:
        wanted = set(record_ids)
        records = [r for r in records if r.record_id in wanted]
    if not records:
        raise ValueError("evaluation partition has no finding records")

    results = evaluate_records(model, manifest, records, root, batch_size=batch_size)
    report = aggregate_results(results, model_id=model_id, split_id=split_id)
    if dump_path is not None:
        write_sample_dump(results, dump_path)
    return report, results


def write_sample_dump(results: list[SampleResult], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in results:
            f.write(json.dumps(r.to_json_obj(), sort_keys=True))
            f.write("\n")


def read_sample_dump(path: str | Path) -> list[SampleResult]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(SampleResult.from_json_obj(json.loads(line)))
    return out


def significance_paired(
    results_a: list[SampleResult],
    results_b: list[SampleResult],
    n_permutations: int = 10_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Paired (p_miou, p_acc) over two result sets on identical records."""
    ids_a = [r.record_id for r in results_a]
    ids_b = [r.record_id for r in results_b]
    if set(ids_a) != set(ids_b) or len(ids_a) != len(set(ids_a)):
        raise ValueError("result sets must cover identical record ids exactly once")
    b_by_id = {r.record_id: r for r in results_b}
    aligned_b = [b_by_id[r.record_id] for r in results_a]

    import numpy as np

    ious_a = np.array([r.iou for r in results_a])
    ious_b = np.array([r.iou for r in aligned_b])
    hits_a = np.array([r.hit for r in results_a])
    hits_b = np.array([r.hit for r in aligned_b])

    p_miou = paired_permutation_p(ious_a, ious_b, n_permutations=n_permutations, seed=seed)
    p_acc = mcnemar_exact_p(hits_a, hits_b)
    return p_miou, p_acc
