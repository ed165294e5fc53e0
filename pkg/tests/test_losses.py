from __future__ import annotations

import numpy as np
import pytest
import torch

from medground.model.losses import box_cxcywh_to_xyxy, giou_tensor, grounding_loss


def finite_difference_grad(fn, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Central-difference gradient, the independent oracle for autograd."""
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        up = fn(x).item()
        flat[i] = orig - h
        down = fn(x).item()
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return grad


def rel_err(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = torch.maximum(a.abs(), b.abs()).clamp(min=1e-8)
    return float(((a - b).abs() / denom).max())


def test_identical_boxes_zero_loss():
    box = torch.tensor([0.4, 0.6, 0.2, 0.3])
    assert float(grounding_loss(box, box)) == pytest.approx(0.0, abs=1e-7)


def test_analytic_value_disjoint_at_corner():
    # L1 = |0.25-0.75|*2 = 1.0. Corner forms (0,0,.5,.5) vs (.5,.5,1,1):
    # intersection 0, union 0.5, enclosing 1.0 -> GIoU = -0.5
    # total = 1.0 + 1 * (1 - (-0.5)) = 2.5
    pred = torch.tensor([0.25, 0.25, 0.5, 0.5])
    target = torch.tensor([0.75, 0.75, 0.5, 0.5])
    assert float(grounding_loss(pred, target)) == pytest.approx(2.5, abs=1e-6)


def test_loss_nonnegative_and_bounded():
    g = torch.Generator().manual_seed(0)
    for _ in range(100):
        pred = torch.rand(4, generator=g).clamp(0.05, 0.95)
        target = torch.rand(4, generator=g).clamp(0.05, 0.95)
        value = float(grounding_loss(pred, target))
        assert 0.0 <= value <= 4 + 2 * 1.0


def test_cxcywh_to_xyxy():
    out = box_cxcywh_to_xyxy(torch.tensor([[0.5, 0.5, 0.5, 0.25]]))
    assert torch.allclose(out, torch.tensor([[0.25, 0.375, 0.75, 0.625]]))


def test_giou_tensor_matches_scalar_geometry():
    from medground.geometry import BoxXYXY, giou

    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.uniform(0.05, 0.4, size=4)
        b = rng.uniform(0.05, 0.4, size=4)
        box_a = (a[0], a[1], a[0] + a[2], a[1] + a[3])
        box_b = (b[0], b[1], b[0] + b[2], b[1] + b[3])
        want = giou(BoxXYXY(*box_a), BoxXYXY(*box_b))
        got = float(giou_tensor(torch.tensor([box_a]), torch.tensor([box_b]))[0])
        assert got == pytest.approx(want, abs=1e-6)


def test_gradient_matches_central_differences():
    # 100 random configurations in double precision; analytic vs central FD.
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        pred = rng.uniform(0.1, 0.9, size=4)
        target = rng.uniform(0.1, 0.9, size=4)
        # stay away from the L1 kink and degenerate overlaps
        if np.any(np.abs(pred - target) < 1e-3):
            continue
        x = torch.tensor(pred, dtype=torch.float64, requires_grad=True)
        t = torch.tensor(target, dtype=torch.float64)
        loss = grounding_loss(x, t)
        loss.backward()
        analytic = x.grad.detach().clone()
        fd = finite_difference_grad(
            lambda v: grounding_loss(v, t), x.detach().clone()
        )
        worst = max(worst, rel_err(analytic, fd))
    assert worst < 1e-4
