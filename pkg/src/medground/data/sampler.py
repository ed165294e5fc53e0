"""Pre-training batch sampler: images paired with sampled anatomical regions.

Under defaults every batch carries 8 distinct images x 5 regions = 40
text-region pairs. Regions are sampled without replacement per image; images
with fewer annotated structures than requested fall back to sampling with
replacement so the pair count per batch never varies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from medground.data.augment import augment_synonym
from medground.data.lexicon import SynonymLexicon
from medground.data.records import DatasetManifest, GroundingRecord


@dataclass(frozen=True)
class PretrainPair:
    image_id: str
    text: str
    record: GroundingRecord  # source anatomy record (box, category, image path)


@dataclass(frozen=True)
class PretrainBatch:
    pairs: tuple[PretrainPair, ...]

    @property
    def image_ids(self) -> tuple[str, ...]:
        seen: list[str] = []
        for p in self.pairs:
            if p.image_id not in seen:
                seen.append(p.image_id)
        return tuple(seen)


def build_pretrain_batches(
    manifest: DatasetManifest,
    lexicon: SynonymLexicon | None,
    images_per_batch: int = 8,
    regions_per_image: int = 5,
    rng: np.random.Generator | None = None,
    image_ids: list[str] | None = None,
):
    """Yield one epoch of pre-training batches over shuffled images.

    ``lexicon=None`` disables synonym augmentation (canonical text only),
    which is the ablation arm. The final partial batch is dropped.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    by_image: dict[str, list[GroundingRecord]] = {}
    for rec in manifest.anatomy_records():
        by_image.setdefault(rec.image_id, []).append(rec)
    if not by_image:
        raise ValueError("manifest contains no anatomy records")

    ids = sorted(by_image) if image_ids is None else [i for i in image_ids if i in by_image]
    ids = list(ids)
    rng.shuffle(ids)

    for start in range(0, len(ids) - images_per_batch + 1, images_per_batch):
        pairs: list[PretrainPair] = []
        for image_id in ids[start : start + images_per_batch]:
            region_records = by_image[image_id]
            n = len(region_records)
            if n >= regions_per_image:
                chosen = rng.choice(n, size=regions_per_image, replace=False)
            else:
                chosen = rng.integers(n, size=regions_per_image)
            for idx in chosen:
                rec = region_records[int(idx)]
                text = rec.text
                if lexicon is not None:
                    text = augment_synonym(rec, lexicon, rng).text
                pairs.append(PretrainPair(image_id=image_id, text=text, record=rec))
        yield PretrainBatch(pairs=tuple(pairs))
