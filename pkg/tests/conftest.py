from __future__ import annotations

import numpy as np
import pytest
import torch

from medground.data.lexicon import load_default_lexicon
from medground.data.synthetic import SyntheticConfig, generate_synthetic_corpus
from medground.model.config import ModelConfig
from medground.model.tokenizer import build_vocab

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def lexicon():
    return load_default_lexicon()


@pytest.fixture(scope="session")
def unit_corpus(tmp_path_factory):
    """Small deterministic corpus shared by unit tests (12 images, 128 px)."""
    out = tmp_path_factory.mktemp("unit_corpus")
    config = SyntheticConfig(
        n_images=12, image_width=128, image_height=128, findings_per_image=2
    )
    manifest = generate_synthetic_corpus(config, seed=7, out_dir=out)
    return manifest, out


@pytest.fixture(scope="session")
def tiny_model_config(unit_corpus, lexicon):
    manifest, _ = unit_corpus
    vocab = build_vocab([r.text for r in manifest.records] + lexicon.all_texts())
    return ModelConfig(
        vocab=vocab,
        image_size=64,
        patch_grid=4,
        embed_dim=32,
        fusion_layers=1,
        fusion_heads=4,
        text_layers=1,
        max_text_len=12,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
