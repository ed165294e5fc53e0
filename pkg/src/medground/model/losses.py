"""Grounding loss: L1 plus a generalized-IoU term on normalized boxes."""

from __future__ import annotations

import torch

_EPS = 1e-12


def box_cxcywh_to_xyxy(boxes: torch.Tensor) -> torch.Tensor:
    """Convert (..., 4) center-form boxes to corner form."""
    cx, cy, w, h = boxes.unbind(-1)
    return torch.stack(
        [cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], dim=-1
    )


def giou_tensor(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise generalized IoU of aligned corner-form boxes (..., 4)."""
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])

    lt = torch.maximum(a[..., :2], b[..., :2])
    rb = torch.minimum(a[..., 2:], b[..., 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a + area_b - inter

    lt_enc = torch.minimum(a[..., :2], b[..., :2])
    rb_enc = torch.maximum(a[..., 2:], b[..., 2:])
    wh_enc = rb_enc - lt_enc
    enclosing = wh_enc[..., 0] * wh_enc[..., 1]

    return inter / (union + _EPS) - (enclosing - union) / (enclosing + _EPS)


def grounding_loss(
    pred: torch.Tensor, target: torch.Tensor, giou_weight: float = 1.0
) -> torch.Tensor:
    """Mean over the batch of ``L1(pred, target) + w * (1 - GIoU)``.

    Both inputs are center-form normalized boxes, shape (..., 4); the L1 term
    sums over the four coordinates.
    """
    if pred.ndim == 1:
        pred = pred[None]
        target = target[None]
    l1 = (pred - target).abs().sum(-1)
    g = giou_tensor(box_cxcywh_to_xyxy(pred), box_cxcywh_to_xyxy(target))
    return (l1 + giou_weight * (1.0 - g)).mean()
