"""Deterministic train/val/test splitting, grouped by image to prevent leakage."""

from __future__ import annotations

import numpy as np

from medground.data.records import DatasetManifest, SplitSpec


def split_dataset(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> SplitSpec:
    """Split records into train/val/test by image_id.

    All records of one image land in the same partition. Partition sizes
    follow cumulative rounding of the ratios over the image count, so e.g.
    10 images at (0.7, 0.1, 0.2) give exactly 7/1/2.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if not manifest.records:
        raise ValueError("cannot split an empty manifest")

    image_ids = sorted({r.image_id for r in manifest.records})
    rng = np.random.default_rng(seed)
    rng.shuffle(image_ids)

    n = len(image_ids)
    cut1 = round(n * ratios[0])
    cut2 = round(n * (ratios[0] + ratios[1]))
    groups = {
        "train": set(image_ids[:cut1]),
        "val": set(image_ids[cut1:cut2]),
        "test": set(image_ids[cut2:]),
    }

    def record_ids(images: set[str]) -> frozenset[str]:
        return frozenset(r.record_id for r in manifest.records if r.image_id in images)

    return SplitSpec(
        train=record_ids(groups["train"]),
        val=record_ids(groups["val"]),
        test=record_ids(groups["test"]),
        seed=seed,
    )
