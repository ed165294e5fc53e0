"""Text and pixel augmentations used during pre-training."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from medground.data.lexicon import SynonymLexicon
from medground.data.records import TASK_ANATOMY, GroundingRecord


def augment_synonym(
    record: GroundingRecord,
    lexicon: SynonymLexicon,
    rng: np.random.Generator,
) -> GroundingRecord:
    """Replace an anatomy record's text with a uniformly drawn variant.

    Box, image, and category are untouched. A term missing from the lexicon
    falls back to the unchanged record.
    """
    if record.task != TASK_ANATOMY:
        raise ValueError(f"synonym augmentation requires an anatomy record, got {record.task}")
    term = record.canonical_term or record.text
    if term not in lexicon:
        return record
    variants = lexicon.variants(term)
    choice = variants[int(rng.integers(len(variants)))]
    if choice == record.text:
        return record
    return replace(record, text=choice)


def pixel_augment(
    image: np.ndarray,
    rng: np.random.Generator,
    jitter_strength: float = 0.2,
    noise_sigma: float = 0.02,
) -> np.ndarray:
    """Brightness/contrast jitter plus additive Gaussian noise, clamped to [0,1].

    Purely photometric: geometry (and therefore every box) is unchanged.
    """
    out = image
    if jitter_strength > 0.0:
        contrast = 1.0 + rng.uniform(-jitter_strength, jitter_strength)
        brightness = rng.uniform(-jitter_strength, jitter_strength)
        out = (out - 0.5) * contrast + 0.5 + brightness
    if noise_sigma > 0.0:
        out = out + rng.normal(0.0, noise_sigma, size=image.shape)
    if out is image:
        return image.copy()
    return np.clip(out, 0.0, 1.0)
