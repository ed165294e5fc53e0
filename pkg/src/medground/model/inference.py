"""Image preparation and box-space plumbing around the network.

The prediction pipeline is: letterbox the source image to the model's input
square, run the network, convert the normalized output box to letterbox-frame
corners, invert the letterbox back to the source frame, and clamp to the
image bounds.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from medground.geometry import (
    BoxNorm,
    BoxXYXY,
    LetterboxRecord,
    clamp_to_image,
    invert_letterbox,
    letterbox,
    to_xyxy,
)
from medground.model.network import GroundingNet
from medground.model.tokenizer import tokenize_checked

_MIN_EXTENT = 1e-3  # px; keeps fully-clamped predictions representable


def load_image_array(path: str | Path) -> np.ndarray:
    """Load an image file as float32 grayscale in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float32)
    return arr / 255.0


def letterbox_image(arr: np.ndarray, target: int) -> tuple[np.ndarray, LetterboxRecord]:
    """Resize-and-pad a [H, W] unit-range array into a target square."""
    h, w = arr.shape
    record = letterbox((w, h), target)
    content_w = max(1, round(w * record.scale))
    content_h = max(1, round(h * record.scale))
    img = Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L")
    resized = np.asarray(
        img.resize((content_w, content_h), Image.BILINEAR), dtype=np.float32
    ) / 255.0
    out = np.zeros((target, target), dtype=np.float32)
    out[:content_h, :content_w] = resized
    return out, record


def norm_to_source_box(
    norm_box: tuple[float, float, float, float],
    record: LetterboxRecord,
) -> tuple[tuple[float, float, float, float], bool]:
    """Map a normalized letterbox-frame box to clamped source-frame corners."""
    target = record.target_size
    box = to_xyxy(BoxNorm(*norm_box), (target, target))
    source = invert_letterbox(box, record)
    w, h = record.source_size
    (x1, y1, x2, y2), clamped = clamp_to_image(source.as_tuple(), (w, h))
    if x2 - x1 < _MIN_EXTENT:
        x1 = min(x1, w - _MIN_EXTENT)
        x2 = x1 + _MIN_EXTENT
    if y2 - y1 < _MIN_EXTENT:
        y1 = min(y1, h - _MIN_EXTENT)
        y2 = y1 + _MIN_EXTENT
    return (x1, y1, x2, y2), clamped


def predict_box(
    model: GroundingNet, image: np.ndarray, text: str
) -> tuple[tuple[float, float, float, float], bool]:
    """Ground ``text`` in a source-frame image array; returns (box, clamped)."""
    lb, record = letterbox_image(image, model.config.image_size)
    norm = model.ground(torch.from_numpy(lb), text)
    return norm_to_source_box(norm, record)


@torch.no_grad()
def predict_boxes_batched(
    model: GroundingNet,
    images: list[np.ndarray],
    texts: list[str],
    image_index: list[int],
    batch_size: int = 32,
) -> list[tuple[float, float, float, float]]:
    """Batched grounding of many (image, text) pairs sharing decoded images.

    ``image_index[i]`` names the row of ``images`` paired with ``texts[i]``.
    Returns clamped source-frame boxes in input order.
    """
    model.eval()
    target = model.config.image_size
    prepared = [letterbox_image(arr, target) for arr in images]
    tensors = torch.from_numpy(np.stack([p[0] for p in prepared]))[:, None]

    boxes: list[tuple[float, float, float, float]] = []
    for start in range(0, len(texts), batch_size):
        chunk_idx = image_index[start : start + batch_size]
        chunk_texts = texts[start : start + batch_size]
        unique = sorted(set(chunk_idx))
        remap = {orig: i for i, orig in enumerate(unique)}
        ids, masks = [], []
        for text in chunk_texts:
            i, m = tokenize_checked(text, model.config.vocab, model.config.max_text_len)
            ids.append(i)
            masks.append(m)
        preds = model(
            tensors[unique],
            torch.tensor(ids, dtype=torch.long),
            torch.tensor(masks, dtype=torch.long),
            image_index=torch.tensor([remap[i] for i in chunk_idx], dtype=torch.long),
        )
        for row, orig in zip(preds, chunk_idx):
            norm = tuple(float(v) for v in row)
            box, _ = norm_to_source_box(norm, prepared[orig][1])
            boxes.append(box)
    return boxes


def make_constant_box_model(model: GroundingNet, norm_box: tuple[float, float, float, float]):
    """Rewire the head to emit one fixed normalized box for every input.

    Zeroing the final layer and setting its bias to the logit of the target
    makes the output input-independent; used for oracle fixtures in tests and
    service checks.
    """
    final = model.head[-1]
    with torch.no_grad():
        final.weight.zero_()
        final.bias.copy_(torch.logit(torch.tensor(norm_box, dtype=torch.float32)))
    return model
