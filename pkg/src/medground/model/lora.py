"""Low-rank adapters over the fusion attention projections.

An adapted projection computes ``W x + (alpha/rank) * B A x`` with ``A``
initialized from a small Gaussian and ``B`` at zero, so a freshly applied
adapter leaves model outputs exactly unchanged. The base weight is never
modified until :func:`merge_lora` materializes ``W + (alpha/rank) B A``.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from medground.model.config import LoraConfig
from medground.model.network import GroundingNet

_TARGET_ATTR = {
    "fusion_q": "q_proj",
    "fusion_k": "k_proj",
    "fusion_v": "v_proj",
    "fusion_o": "o_proj",
}


class LoraError(RuntimeError):
    pass


class LoraLinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: float):
        super().__init__()
        out_features, in_features = base.weight.shape
        if rank >= min(in_features, out_features):
            raise LoraError(
                f"rank {rank} must be smaller than weight dims "
                f"({out_features}x{in_features})"
            )
        self.base = base
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(torch.randn(rank, in_features) * 0.02)
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + F.linear(F.linear(x, self.lora_a), self.lora_b) * self.scaling

    def merged_weight(self) -> torch.Tensor:
        return self.base.weight + self.scaling * (self.lora_b @ self.lora_a)


def apply_lora(model: GroundingNet, config: LoraConfig) -> GroundingNet:
    """Wrap the configured fusion attention projections with adapters."""
    if has_lora(model):
        raise LoraError("model already has adapters attached")
    attrs = [_TARGET_ATTR[t] for t in config.targets]
    for block in model.fusion.blocks:
        for attr in attrs:
            base = getattr(block.attn, attr)
            setattr(block.attn, attr, LoraLinear(base, config.rank, config.alpha))
    return model


def merge_lora(model: GroundingNet) -> GroundingNet:
    """Fold every adapter into its base weight and drop the adapter modules."""
    merged_any = False
    for block in model.fusion.blocks:
        for attr in ("q_proj", "k_proj", "v_proj", "o_proj"):
            module = getattr(block.attn, attr)
            if isinstance(module, LoraLinear):
                with torch.no_grad():
                    module.base.weight.copy_(module.merged_weight())
                setattr(block.attn, attr, module.base)
                merged_any = True
    if not merged_any:
        raise LoraError("no adapter attached")
    return model


def has_lora(model: GroundingNet) -> bool:
    return any(isinstance(m, LoraLinear) for m in model.modules())


def lora_parameter_names(model: GroundingNet) -> set[str]:
    names: set[str] = set()
    for name, module in model.named_modules():
        if isinstance(module, LoraLinear):
            names.add(f"{name}.lora_a")
            names.add(f"{name}.lora_b")
    return names
