from __future__ import annotations

import numpy as np
import pytest
import torch

from medground.model.config import ModelConfig
from medground.model.network import build_model
from medground.model.tokenizer import EmptyTextError, build_vocab, tokenize


def small_config(**overrides):
    fields = dict(
        vocab=build_vocab(["left lung base", "small opacity in the heart shadow"]),
        image_size=64,
        patch_grid=4,
        embed_dim=32,
        fusion_layers=1,
        fusion_heads=4,
        text_layers=1,
        max_text_len=8,
    )
    fields.update(overrides)
    return ModelConfig(**fields)


def tokens_for(model, text):
    ids, mask = tokenize(text, model.config.vocab, model.config.max_text_len)
    return torch.tensor([ids]), torch.tensor([mask])


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(embed_dim=30)  # not divisible by heads
    with pytest.raises(ValueError):
        small_config(patch_grid=9)  # > image_size / 16
    with pytest.raises(ValueError):
        small_config(vocab={})


def test_visual_token_count_shape():
    cfg = ModelConfig(
        vocab={"x": 2}, image_size=640, patch_grid=20, embed_dim=32,
        fusion_layers=1, fusion_heads=4, text_layers=1, max_text_len=4,
    )
    model = build_model(cfg, seed=0)
    tokens = model.visual(torch.zeros(2, 1, 640, 640))
    assert tokens.shape == (2, 400, 32)


def test_visual_rejects_wrong_size():
    model = build_model(small_config(), seed=0)
    with pytest.raises(ValueError):
        model.visual(torch.zeros(1, 1, 32, 32))


def test_identical_images_identical_tokens():
    model = build_model(small_config(), seed=0).eval()
    img = torch.rand(1, 1, 64, 64, generator=torch.Generator().manual_seed(1))
    a = model.visual(torch.cat([img, img]))
    assert torch.equal(a[0], a[1])


def test_blob_shift_moves_peak_token():
    # Translation sanity: moving a bright blob one patch to the right moves
    # the most-activated visual token one grid column to the right.
    cfg = small_config(image_size=128, patch_grid=8)
    model = build_model(cfg, seed=0).eval()
    stride = 128 // 8
    base = torch.zeros(1, 1, 128, 128)
    shifted = torch.zeros(1, 1, 128, 128)
    base[0, 0, 48:64, 32:48] = 1.0
    shifted[0, 0, 48:64, 32 + stride : 48 + stride] = 1.0
    with torch.no_grad():
        # subtract positional encodings to compare content energy only
        pos = (model.visual.row_pos[:, None, :] + model.visual.col_pos[None, :, :]).reshape(64, -1)
        t_base = model.visual(base)[0] - pos
        t_shift = model.visual(shifted)[0] - pos
    peak_base = int(t_base.norm(dim=-1).argmax())
    peak_shift = int(t_shift.norm(dim=-1).argmax())
    assert peak_shift == peak_base + 1


def test_text_encoder_shape_and_mask():
    model = build_model(small_config(), seed=0).eval()
    ids, mask = tokens_for(model, "left lung base")
    out = model.text(ids, mask)
    assert out.shape == (1, 8, 32)


def test_padding_content_does_not_affect_unmasked_outputs():
    # Mask-correctness oracle: rewriting token ids at masked positions must
    # leave every unmasked position's encoding unchanged.
    model = build_model(small_config(), seed=0).eval()
    ids, mask = tokens_for(model, "left lung")
    ids_b = ids.clone()
    ids_b[0, 5] = 3  # arbitrary junk in the padded tail
    ids_b[0, 6] = 4
    with torch.no_grad():
        fused_a = model(torch.rand(1, 1, 64, 64), ids, mask)
        fused_b = model(torch.rand(1, 1, 64, 64) * 0 + 0.5, ids_b, mask)
        # compare text encodings directly (images differ above on purpose
        # for the fused path, so re-run the text encoder alone)
        text_a = model.text(ids, mask)
        text_b = model.text(ids_b, mask)
    assert torch.equal(text_a[0, :2], text_b[0, :2])


def test_prediction_satisfies_norm_bounds():
    model = build_model(small_config(), seed=3).eval()
    g = torch.Generator().manual_seed(0)
    for _ in range(8):
        img = torch.rand(1, 1, 64, 64, generator=g)
        ids, mask = tokens_for(model, "left lung base")
        with torch.no_grad():
            box = model(img, ids, mask)[0]
        assert all(0.0 < float(v) < 1.0 for v in box)


def test_untrained_model_reproducible_box():
    imgs = torch.rand(1, 1, 64, 64, generator=torch.Generator().manual_seed(9))
    boxes = []
    for _ in range(2):
        model = build_model(small_config(), seed=11).eval()
        with torch.no_grad():
            ids, mask = tokens_for(model, "left lung base")
            boxes.append(model(imgs, ids, mask)[0])
    assert torch.equal(boxes[0], boxes[1])


def test_ground_rejects_all_padding_text():
    model = build_model(small_config(), seed=0)
    with pytest.raises(EmptyTextError):
        model.ground(torch.zeros(64, 64), "?!.")


def test_ground_returns_norm_box():
    model = build_model(small_config(), seed=0)
    box = model.ground(torch.zeros(64, 64), "left lung base")
    assert len(box) == 4
    assert all(0.0 < v < 1.0 for v in box)


def test_image_index_pairs_one_image_with_many_texts():
    model = build_model(small_config(), seed=0).eval()
    imgs = torch.rand(2, 1, 64, 64, generator=torch.Generator().manual_seed(2))
    ids1, mask1 = tokens_for(model, "left lung base")
    ids2, mask2 = tokens_for(model, "small opacity")
    ids = torch.cat([ids1, ids2, ids1])
    mask = torch.cat([mask1, mask2, mask1])
    with torch.no_grad():
        out = model(imgs, ids, mask, image_index=torch.tensor([0, 0, 1]))
        solo = model(imgs[0:1], ids1, mask1)
    assert out.shape == (3, 4)
    assert torch.allclose(out[0], solo[0], atol=1e-6)


def test_mismatched_rows_without_index_rejected():
    model = build_model(small_config(), seed=0)
    ids, mask = tokens_for(model, "left lung base")
    with pytest.raises(ValueError):
        model(torch.zeros(2, 1, 64, 64), ids, mask)
