from __future__ import annotations

import numpy as np
import pytest

from medground.data.records import DatasetManifest, GroundingRecord, ImageInfo, TASK_ANATOMY
from medground.data.sampler import build_pretrain_batches
from medground.data.splits import split_dataset
from medground.geometry import BoxXYXY


def make_manifest(n_images=16, regions_per_image=6):
    records = []
    images = {}
    names = [f"region {k}" for k in range(regions_per_image)]
    for i in range(n_images):
        image_id = f"img{i:03d}"
        images[image_id] = ImageInfo(path=f"{image_id}.png", width=100, height=100)
        for k, name in enumerate(names):
            records.append(
                GroundingRecord(
                    record_id=f"{image_id}/{name}",
                    image_id=image_id,
                    image_path=f"{image_id}.png",
                    text=name,
                    box=BoxXYXY(1 + k, 1 + k, 20 + k, 20 + k),
                    task=TASK_ANATOMY,
                    category=name,
                    canonical_term=name,
                )
            )
    return DatasetManifest(records=records, images=images, provenance="synthetic")


def test_every_batch_has_40_pairs_from_8_images(rng):
    manifest = make_manifest(n_images=20)
    batches = list(build_pretrain_batches(manifest, None, rng=rng))
    assert len(batches) == 2  # 20 images -> 2 full batches, partial dropped
    for batch in batches:
        assert len(batch.pairs) == 40
        assert len(batch.image_ids) == 8
        per_image = {}
        for p in batch.pairs:
            per_image[p.image_id] = per_image.get(p.image_id, 0) + 1
        assert set(per_image.values()) == {5}


def test_exact_fit_gives_single_batch(rng):
    manifest = make_manifest(n_images=8)
    batches = list(build_pretrain_batches(manifest, None, rng=rng))
    assert len(batches) == 1
    assert len(batches[0].pairs) == 40


def test_regions_sampled_without_replacement_when_possible(rng):
    manifest = make_manifest(n_images=8, regions_per_image=6)
    (batch,) = build_pretrain_batches(manifest, None, rng=rng)
    for image_id in batch.image_ids:
        cats = [p.record.category for p in batch.pairs if p.image_id == image_id]
        assert len(set(cats)) == 5


def test_sparse_image_falls_back_to_replacement(rng):
    manifest = make_manifest(n_images=8, regions_per_image=3)
    (batch,) = build_pretrain_batches(manifest, None, rng=rng)
    assert len(batch.pairs) == 40  # 3 structures still yield 5 pairs per image
    for image_id in batch.image_ids:
        cats = [p.record.category for p in batch.pairs if p.image_id == image_id]
        assert len(cats) == 5
        assert len(set(cats)) <= 3


def test_anatomy_only_and_augmented_text(lexicon, rng):
    manifest = make_manifest(n_images=8, regions_per_image=5)
    # rename categories to lexicon terms so augmentation can fire
    renamed = []
    terms = lexicon.canonical_terms[:5]
    for rec in manifest.records:
        k = int(rec.record_id.split("region ")[1])
        renamed.append(
            GroundingRecord(
                record_id=rec.record_id,
                image_id=rec.image_id,
                image_path=rec.image_path,
                text=terms[k],
                box=rec.box,
                task=TASK_ANATOMY,
                category=terms[k],
                canonical_term=terms[k],
            )
        )
    manifest = DatasetManifest(records=renamed, images=manifest.images, provenance="synthetic")
    (batch,) = build_pretrain_batches(manifest, lexicon, rng=rng)
    allowed = {v for t in terms for v in lexicon.variants(t)}
    assert all(p.text in allowed for p in batch.pairs)
    assert any(p.text != p.record.canonical_term for p in batch.pairs)


def test_fixed_seed_gives_identical_batch_sequence():
    manifest = make_manifest(n_images=24)
    def run():
        rng = np.random.default_rng(5)
        return [
            [(p.image_id, p.text, p.record.record_id) for p in b.pairs]
            for b in build_pretrain_batches(manifest, None, rng=rng)
        ]
    assert run() == run()


def test_no_anatomy_records_raises(rng):
    manifest = DatasetManifest(records=[], images={}, provenance="synthetic")
    with pytest.raises(ValueError):
        list(build_pretrain_batches(manifest, None, rng=rng))


# ---------------------------------------------------------------------------
# splits


def test_ten_images_split_7_1_2():
    manifest = make_manifest(n_images=10)
    split = split_dataset(manifest, (0.7, 0.1, 0.2), seed=3)
    def images_of(ids):
        return {r.image_id for r in manifest.records if r.record_id in ids}
    assert len(images_of(split.train)) == 7
    assert len(images_of(split.val)) == 1
    assert len(images_of(split.test)) == 2


def test_split_deterministic():
    manifest = make_manifest(n_images=10)
    a = split_dataset(manifest, seed=11)
    b = split_dataset(manifest, seed=11)
    assert (a.train, a.val, a.test) == (b.train, b.val, b.test)
    c = split_dataset(manifest, seed=12)
    assert (a.train, a.val, a.test) != (c.train, c.val, c.test)


def test_no_image_leaks_across_partitions():
    manifest = make_manifest(n_images=13)
    split = split_dataset(manifest, seed=0)
    by_id = manifest.records_by_id()
    seen: dict[str, str] = {}
    for part in ("train", "val", "test"):
        for record_id in split.partition(part):
            image_id = by_id[record_id].image_id
            assert seen.setdefault(image_id, part) == part
    total = len(split.train) + len(split.val) + len(split.test)
    assert total == len(manifest.records)


def test_bad_ratios_rejected():
    manifest = make_manifest(n_images=4)
    with pytest.raises(ValueError):
        split_dataset(manifest, (0.5, 0.2, 0.2), seed=0)


def test_empty_manifest_rejected():
    manifest = DatasetManifest(records=[], images={}, provenance="synthetic")
    with pytest.raises(ValueError):
        split_dataset(manifest, seed=0)
