from __future__ import annotations

import pytest
import torch

from medground.model.checkpoint import (
    STAGE_ANATOMICAL,
    STAGE_GENERAL,
    Checkpoint,
    CheckpointError,
    checkpoint_from_model,
    load_checkpoint,
    model_from_checkpoint,
    new_general_checkpoint,
    save_checkpoint,
)
from medground.model.config import LoraConfig, ModelConfig
from medground.model.lora import apply_lora, has_lora
from medground.model.network import build_model
from medground.model.tokenizer import build_vocab, tokenize


def small_config(lora=None):
    return ModelConfig(
        vocab=build_vocab(["left lung base"]),
        image_size=64,
        patch_grid=4,
        embed_dim=32,
        fusion_layers=1,
        fusion_heads=4,
        text_layers=1,
        max_text_len=8,
        lora=lora,
    )


def test_save_load_save_bit_exact(tmp_path):
    ckpt = new_general_checkpoint(small_config(), seed=1)
    path_a = tmp_path / "a.ckpt"
    path_b = tmp_path / "b.ckpt"
    save_checkpoint(ckpt, path_a)
    save_checkpoint(load_checkpoint(path_a), path_b)
    assert path_a.read_bytes() == path_b.read_bytes()


def test_round_trip_preserves_weights_and_metadata(tmp_path):
    ckpt = new_general_checkpoint(small_config(), seed=2)
    path = tmp_path / "m.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    assert loaded.stage == STAGE_GENERAL
    assert loaded.weight_hash() == ckpt.weight_hash()
    assert loaded.config.to_json_obj() == ckpt.config.to_json_obj()
    assert loaded.provenance == ckpt.provenance


def test_model_round_trips_through_checkpoint(tmp_path):
    model = build_model(small_config(), seed=3).eval()
    ckpt = checkpoint_from_model(model, STAGE_GENERAL, {"seed": 3})
    save_checkpoint(ckpt, tmp_path / "m.ckpt")
    restored = model_from_checkpoint(load_checkpoint(tmp_path / "m.ckpt"))
    g = torch.Generator().manual_seed(0)
    img = torch.rand(1, 1, 64, 64, generator=g)
    ids, mask = tokenize("left lung base", model.config.vocab, 8)
    with torch.no_grad():
        a = model(img, torch.tensor([ids]), torch.tensor([mask]))
        b = restored(img, torch.tensor([ids]), torch.tensor([mask]))
    assert torch.equal(a, b)


def test_lora_attachment_round_trips(tmp_path):
    lora = LoraConfig(rank=4)
    model = build_model(small_config(lora=lora), seed=4)
    torch.manual_seed(5)
    apply_lora(model, lora)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "lora_b" in name:
                p.normal_(std=0.02)
    ckpt = checkpoint_from_model(model, STAGE_ANATOMICAL, {"seed": 4})
    assert ckpt.lora_attached
    save_checkpoint(ckpt, tmp_path / "l.ckpt")
    restored = model_from_checkpoint(load_checkpoint(tmp_path / "l.ckpt"))
    assert has_lora(restored)
    g = torch.Generator().manual_seed(1)
    img = torch.rand(1, 1, 64, 64, generator=g)
    ids, mask = tokenize("left lung base", model.config.vocab, 8)
    with torch.no_grad():
        a = model.eval()(img, torch.tensor([ids]), torch.tensor([mask]))
        b = restored(img, torch.tensor([ids]), torch.tensor([mask]))
    assert torch.equal(a, b)


def test_unknown_stage_rejected():
    with pytest.raises(CheckpointError):
        Checkpoint(weights={}, config=small_config(), stage="warmup", provenance={})


def test_missing_file_rejected(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_non_checkpoint_zip_rejected(tmp_path):
    import zipfile

    path = tmp_path / "junk.ckpt"
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("hello.txt", "hi")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_extra_arrays_and_trainer_state_round_trip(tmp_path):
    import numpy as np

    ckpt = new_general_checkpoint(small_config(), seed=6)
    ckpt.extra_arrays = {"opt::head.0.weight::exp_avg": np.ones((3, 2), dtype=np.float32)}
    ckpt.trainer_state = {"stage": "anatomical_pretrain", "epoch": 1, "step": 7}
    save_checkpoint(ckpt, tmp_path / "s.ckpt")
    loaded = load_checkpoint(tmp_path / "s.ckpt")
    assert loaded.trainer_state["step"] == 7
    np.testing.assert_array_equal(
        loaded.extra_arrays["opt::head.0.weight::exp_avg"],
        ckpt.extra_arrays["opt::head.0.weight::exp_avg"],
    )
