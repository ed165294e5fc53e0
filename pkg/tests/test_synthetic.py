from __future__ import annotations

import numpy as np
from PIL import Image

from medground.data.records import DatasetManifest
from medground.data.synthetic import (
    REGION_LAYOUT,
    SyntheticConfig,
    generate_synthetic_corpus,
)


def test_layout_has_29_regions_inside_unit_square():
    assert len(REGION_LAYOUT) == 29
    for name, (x1, y1, x2, y2) in REGION_LAYOUT.items():
        assert 0 < x1 < x2 < 1, name
        assert 0 < y1 < y2 < 1, name


def test_smallest_corpus_shape(tmp_path):
    config = SyntheticConfig(n_images=1, findings_per_image=3)
    manifest = generate_synthetic_corpus(config, seed=0, out_dir=tmp_path)
    assert len(manifest.images) == 1
    assert len(manifest.anatomy_records()) == 29
    assert len(manifest.finding_records()) == 3
    png = tmp_path / "images" / "synth-00000.png"
    assert png.exists()
    with Image.open(png) as img:
        assert img.mode == "L"
        assert img.size == (160, 160)


def test_same_seed_byte_identical(tmp_path):
    config = SyntheticConfig(n_images=3, findings_per_image=2)
    generate_synthetic_corpus(config, seed=9, out_dir=tmp_path / "a")
    generate_synthetic_corpus(config, seed=9, out_dir=tmp_path / "b")
    for rel in ("manifest.json", "records.jsonl", "images/synth-00001.png"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_different_seed_differs(tmp_path):
    config = SyntheticConfig(n_images=2)
    generate_synthetic_corpus(config, seed=1, out_dir=tmp_path / "a")
    generate_synthetic_corpus(config, seed=2, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "records.jsonl").read_bytes() != (
        tmp_path / "b" / "records.jsonl"
    ).read_bytes()


def test_finding_box_inside_host_anatomy_box(unit_corpus):
    manifest, _ = unit_corpus
    anatomy = {r.record_id: r for r in manifest.anatomy_records()}
    findings = manifest.finding_records()
    assert findings
    for rec in findings:
        host = anatomy[f"{rec.image_id}/{rec.canonical_term}"]
        assert rec.box.x1 >= host.box.x1 - 1e-9
        assert rec.box.y1 >= host.box.y1 - 1e-9
        assert rec.box.x2 <= host.box.x2 + 1e-9
        assert rec.box.y2 <= host.box.y2 + 1e-9


def test_finding_text_mentions_anatomy_phrase(unit_corpus, lexicon):
    manifest, _ = unit_corpus
    for rec in manifest.finding_records():
        variants = lexicon.variants(rec.canonical_term)
        assert any(rec.text.endswith(f"in {v}") for v in variants), rec.text


def test_manifest_round_trip(unit_corpus):
    manifest, out = unit_corpus
    loaded = DatasetManifest.load(out)
    assert loaded.provenance == "synthetic"
    assert len(loaded.records) == len(manifest.records)
    assert loaded.data_hash() == manifest.data_hash()


def test_blob_is_high_contrast(tmp_path):
    config = SyntheticConfig(n_images=1, findings_per_image=1, blob_fill=(0.7, 0.9))
    manifest = generate_synthetic_corpus(config, seed=4, out_dir=tmp_path)
    (finding,) = manifest.finding_records()
    arr = np.asarray(Image.open(tmp_path / finding.image_path), dtype=np.float32) / 255.0
    x1, y1, x2, y2 = (int(round(v)) for v in finding.box.as_tuple())
    cx, cy = (x1 + x2) // 2, (y1 + y2) // 2
    assert arr[cy, cx] > 0.85
