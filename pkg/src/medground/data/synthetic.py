"""Deterministic synthetic grounding corpus.

Each image renders a fixed 29-region chest-like template (lung zones, heart,
mediastinum, ...) under a small per-image geometric perturbation, with one
distinct texture per region. Anatomy records are emitted per region; finding
records place a bright elliptical blob strictly inside a host region, with
text "<adjective> <noun> in <anatomy phrase>" where the anatomy phrase may be
any lexicon variant of the host term.

Everything is a pure function of (config, seed): a second run produces
byte-identical manifests and images.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from medground.data.lexicon import SynonymLexicon, load_default_lexicon
from medground.data.records import (
    TASK_ANATOMY,
    TASK_FINDING,
    DatasetManifest,
    GroundingRecord,
    ImageInfo,
)
from medground.geometry import BoxXYXY

# Nominal unit-square layout; image-left is the subject's right side.
REGION_LAYOUT: dict[str, tuple[float, float, float, float]] = {
    "right lung": (0.06, 0.16, 0.44, 0.78),
    "left lung": (0.56, 0.16, 0.94, 0.78),
    "right upper lung zone": (0.06, 0.16, 0.44, 0.36),
    "left upper lung zone": (0.56, 0.16, 0.94, 0.36),
    "right mid lung zone": (0.06, 0.36, 0.44, 0.56),
    "left mid lung zone": (0.56, 0.36, 0.94, 0.56),
    "right lung base": (0.06, 0.56, 0.44, 0.78),
    "left lung base": (0.56, 0.56, 0.94, 0.78),
    "right apical zone": (0.10, 0.10, 0.40, 0.22),
    "left apical zone": (0.60, 0.10, 0.90, 0.22),
    "right hilar structures": (0.32, 0.38, 0.46, 0.58),
    "left hilar structures": (0.54, 0.38, 0.68, 0.58),
    "right costophrenic angle": (0.06, 0.68, 0.20, 0.80),
    "left costophrenic angle": (0.80, 0.68, 0.94, 0.80),
    "right hemidiaphragm": (0.06, 0.66, 0.44, 0.80),
    "left hemidiaphragm": (0.56, 0.66, 0.94, 0.80),
    "right clavicle": (0.06, 0.08, 0.42, 0.16),
    "left clavicle": (0.58, 0.08, 0.94, 0.16),
    "trachea": (0.46, 0.08, 0.54, 0.28),
    "carina": (0.44, 0.26, 0.56, 0.34),
    "spine": (0.44, 0.08, 0.56, 0.92),
    "aortic arch": (0.40, 0.30, 0.54, 0.40),
    "mediastinum": (0.36, 0.16, 0.64, 0.70),
    "upper mediastinum": (0.36, 0.16, 0.64, 0.40),
    "cardiac silhouette": (0.34, 0.48, 0.70, 0.78),
    "svc": (0.38, 0.28, 0.48, 0.48),
    "right atrium": (0.36, 0.52, 0.50, 0.68),
    "cavoatrial junction": (0.38, 0.46, 0.50, 0.56),
    "abdomen": (0.06, 0.80, 0.94, 0.98),
}

FINDING_ADJECTIVES = (
    "small", "large", "mild", "moderate", "severe", "subtle", "focal", "diffuse",
)
FINDING_NOUNS = (
    "opacity", "consolidation", "lesion", "shadowing",
    "density", "nodule", "infiltrate", "effusion",
)


@dataclass(frozen=True)
class SyntheticConfig:
    n_images: int
    image_width: int = 160
    image_height: int = 160
    findings_per_image: int = 1
    finding_fraction: float = 1.0  # fraction of images that carry findings
    paraphrase_rate: float = 0.5   # P(finding text uses a non-canonical variant)
    perturbation: float = 0.05     # global affine jitter, unit-frame fractions
    region_jitter: float = 0.015   # extra per-region corner jitter
    blob_fill: tuple[float, float] = (0.55, 0.9)  # blob extent / host extent
    texture_strength: float = 0.22
    background_noise: float = 0.03

    def __post_init__(self) -> None:
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self.image_width < 32 or self.image_height < 32:
            raise ValueError("image sides must be >= 32 px")
        if not 0.0 <= self.finding_fraction <= 1.0:
            raise ValueError("finding_fraction must lie in [0, 1]")
        if not 0.0 <= self.paraphrase_rate <= 1.0:
            raise ValueError("paraphrase_rate must lie in [0, 1]")
        lo, hi = self.blob_fill
        if not 0.1 <= lo <= hi < 1.0:
            raise ValueError("blob_fill must satisfy 0.1 <= lo <= hi < 1")


def _perturbed_layout(
    rng: np.random.Generator, config: SyntheticConfig
) -> dict[str, tuple[float, float, float, float]]:
    p = config.perturbation
    sx = 1.0 + rng.uniform(-p, p)
    sy = 1.0 + rng.uniform(-p, p)
    tx = rng.uniform(-p / 2, p / 2)
    ty = rng.uniform(-p / 2, p / 2)
    out: dict[str, tuple[float, float, float, float]] = {}
    for name, (x1, y1, x2, y2) in REGION_LAYOUT.items():
        j = config.region_jitter
        jit = rng.uniform(-j, j, size=4)
        nx1 = 0.5 + (x1 - 0.5) * sx + tx + jit[0]
        ny1 = 0.5 + (y1 - 0.5) * sy + ty + jit[1]
        nx2 = 0.5 + (x2 - 0.5) * sx + tx + jit[2]
        ny2 = 0.5 + (y2 - 0.5) * sy + ty + jit[3]
        nx1, nx2 = min(nx1, nx2), max(nx1, nx2)
        ny1, ny2 = min(ny1, ny2), max(ny1, ny2)
        nx1 = float(np.clip(nx1, 0.005, 0.97))
        ny1 = float(np.clip(ny1, 0.005, 0.97))
        nx2 = float(np.clip(nx2, nx1 + 0.02, 0.995))
        ny2 = float(np.clip(ny2, ny1 + 0.02, 0.995))
        out[name] = (nx1, ny1, nx2, ny2)
    return out


def _render_image(
    layout: dict[str, tuple[float, float, float, float]],
    rng: np.random.Generator,
    config: SyntheticConfig,
) -> np.ndarray:
    w, h = config.image_width, config.image_height
    img = 0.08 + config.background_noise * rng.random((h, w))
    ys = (np.arange(h) + 0.5) / h
    xs = (np.arange(w) + 0.5) / w

    names = list(REGION_LAYOUT.keys())
    # Larger regions first so small structures stay visible on top.
    order = sorted(layout.items(), key=lambda kv: -(kv[1][2] - kv[1][0]) * (kv[1][3] - kv[1][1]))
    for name, (x1, y1, x2, y2) in order:
        k = names.index(name)
        c0 = int(np.searchsorted(xs, x1))
        c1 = int(np.searchsorted(xs, x2))
        r0 = int(np.searchsorted(ys, y1))
        r1 = int(np.searchsorted(ys, y2))
        if c1 <= c0 or r1 <= r0:
            continue
        base = 0.22 + 0.55 * ((k * 7) % 29) / 28.0
        fx = 2.0 + (k % 5) * 2.0
        fy = 2.0 + ((k // 5) % 5) * 2.0
        gy, gx = np.meshgrid(ys[r0:r1], xs[c0:c1], indexing="ij")
        stripes = np.sin(2 * np.pi * (fx * gx + fy * gy) + 0.7 * k)
        img[r0:r1, c0:c1] = base + config.texture_strength * 0.5 * stripes
    return np.clip(img, 0.0, 1.0)


def _draw_blob(img: np.ndarray, box: BoxXYXY) -> None:
    h, w = img.shape
    cy = (box.y1 + box.y2) / 2.0
    cx = (box.x1 + box.x2) / 2.0
    ry = (box.y2 - box.y1) / 2.0
    rx = (box.x2 - box.x1) / 2.0
    yy = np.arange(h) + 0.5
    xx = np.arange(w) + 0.5
    gy, gx = np.meshgrid(yy, xx, indexing="ij")
    d = ((gx - cx) / max(rx, 1e-6)) ** 2 + ((gy - cy) / max(ry, 1e-6)) ** 2
    inside = d <= 1.0
    img[inside] = np.maximum(img[inside], 0.97 - 0.25 * d[inside])


def generate_synthetic_corpus(
    config: SyntheticConfig,
    seed: int,
    out_dir: str | Path,
    lexicon: SynonymLexicon | None = None,
) -> DatasetManifest:
    """Render the corpus under ``out_dir`` and return its manifest.

    Images land in ``out_dir/images`` as 8-bit grayscale PNG; the manifest
    (header + records.jsonl) is written to ``out_dir`` as well.
    """
    lexicon = lexicon or load_default_lexicon()
    missing = [n for n in REGION_LAYOUT if n not in lexicon]
    if missing:
        raise ValueError(f"lexicon is missing layout terms: {missing}")

    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    records: list[GroundingRecord] = []
    images: dict[str, ImageInfo] = {}
    region_names = list(REGION_LAYOUT.keys())
    w, h = config.image_width, config.image_height

    for i in range(config.n_images):
        image_id = f"synth-{i:05d}"
        rel_path = f"images/{image_id}.png"
        layout = _perturbed_layout(rng, config)
        img = _render_image(layout, rng, config)

        for name in region_names:
            x1, y1, x2, y2 = layout[name]
            box = BoxXYXY(x1 * w, y1 * h, x2 * w, y2 * h)
            records.append(
                GroundingRecord(
                    record_id=f"{image_id}/{name}",
                    image_id=image_id,
                    image_path=rel_path,
                    text=name,
                    box=box,
                    task=TASK_ANATOMY,
                    category=name,
                    canonical_term=name,
                )
            )

        if rng.random() < config.finding_fraction:
            for j in range(config.findings_per_image):
                host = region_names[int(rng.integers(len(region_names)))]
                hx1, hy1, hx2, hy2 = layout[host]
                hx1, hy1, hx2, hy2 = hx1 * w, hy1 * h, hx2 * w, hy2 * h
                lo, hi = config.blob_fill
                bw = rng.uniform(lo, hi) * (hx2 - hx1)
                bh = rng.uniform(lo, hi) * (hy2 - hy1)
                bcx = rng.uniform(hx1 + bw / 2, hx2 - bw / 2)
                bcy = rng.uniform(hy1 + bh / 2, hy2 - bh / 2)
                box = BoxXYXY(
                    max(bcx - bw / 2, hx1),
                    max(bcy - bh / 2, hy1),
                    min(bcx + bw / 2, hx2),
                    min(bcy + bh / 2, hy2),
                )
                _draw_blob(img, box)

                adjective = FINDING_ADJECTIVES[int(rng.integers(len(FINDING_ADJECTIVES)))]
                noun = FINDING_NOUNS[int(rng.integers(len(FINDING_NOUNS)))]
                variants = lexicon.variants(host)
                if rng.random() < config.paraphrase_rate:
                    phrase = variants[1 + int(rng.integers(len(variants) - 1))]
                else:
                    phrase = variants[0]
                records.append(
                    GroundingRecord(
                        record_id=f"{image_id}/finding-{j}",
                        image_id=image_id,
                        image_path=rel_path,
                        text=f"{adjective} {noun} in {phrase}",
                        box=box,
                        task=TASK_FINDING,
                        category=noun,
                        canonical_term=host,
                    )
                )

        arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(image_dir / f"{image_id}.png")
        images[image_id] = ImageInfo(path=rel_path, width=w, height=h)

    manifest = DatasetManifest(records=records, images=images, provenance="synthetic")
    manifest.save(out_dir)
    return manifest
