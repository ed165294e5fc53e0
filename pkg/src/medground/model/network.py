"""Single-box cross-modal grounding network.

A small strided-convolution visual encoder and a small transformer text
encoder feed a fusion transformer that attends over
``[box-query token ++ visual tokens ++ text tokens]``; the fused query token
is decoded by a 3-layer MLP with a sigmoid squash, so predictions satisfy
the normalized-box bounds by construction.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from medground.model.config import ModelConfig
from medground.model.tokenizer import tokenize_checked


class SelfAttention(nn.Module):
    """Multi-head self-attention with separate q/k/v/o projections.

    Projections are individual Linear modules so adapter wrapping can target
    them by name.
    """

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.o_proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, key_padding_mask: torch.Tensor | None = None):
        b, n, d = x.shape
        q = self.q_proj(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if key_padding_mask is not None:
            scores = scores.masked_fill(
                key_padding_mask[:, None, None, :], float("-inf")
            )
        attn = scores.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.o_proj(out)


class TransformerBlock(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float = 2.0):
        super().__init__()
        hidden = int(dim * mlp_ratio)
        self.ln1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor, key_padding_mask: torch.Tensor | None = None):
        x = x + self.attn(self.ln1(x), key_padding_mask)
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x


class VisualEncoder(nn.Module):
    """Four strided conv stages (x16 downsample) pooled to a token grid."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.embed_dim
        chans = [16, 32, 64, d]
        layers: list[nn.Module] = []
        prev = 1
        for c in chans:
            layers += [nn.Conv2d(prev, c, 3, stride=2, padding=1), nn.GroupNorm(4, c), nn.GELU()]
            prev = c
        self.stem = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(config.patch_grid)
        self.row_pos = nn.Parameter(torch.zeros(config.patch_grid, d))
        self.col_pos = nn.Parameter(torch.zeros(config.patch_grid, d))
        nn.init.normal_(self.row_pos, std=0.02)
        nn.init.normal_(self.col_pos, std=0.02)
        self.image_size = config.image_size
        self.grid = config.patch_grid

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 1:
            raise ValueError(f"expected images of shape (B, 1, S, S), got {tuple(images.shape)}")
        if images.shape[2] != self.image_size or images.shape[3] != self.image_size:
            raise ValueError(
                f"expected {self.image_size}x{self.image_size} input, "
                f"got {images.shape[2]}x{images.shape[3]}"
            )
        feats = self.pool(self.stem(images))  # (B, D, g, g)
        tokens = feats.flatten(2).transpose(1, 2)  # (B, g*g, D)
        pos = (self.row_pos[:, None, :] + self.col_pos[None, :, :]).reshape(
            self.grid * self.grid, -1
        )
        return tokens + pos


class TextEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.embed_dim
        vocab_size = max(config.vocab.values()) + 1 if config.vocab else 2
        self.tok_emb = nn.Embedding(max(vocab_size, 2), d, padding_idx=0)
        self.pos = nn.Parameter(torch.zeros(config.max_text_len, d))
        nn.init.normal_(self.pos, std=0.02)
        self.blocks = nn.ModuleList(
            TransformerBlock(d, config.fusion_heads) for _ in range(config.text_layers)
        )
        self.ln = nn.LayerNorm(d)

    def forward(self, token_ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = self.tok_emb(token_ids) + self.pos[: token_ids.shape[1]]
        key_padding = mask == 0
        for blk in self.blocks:
            x = blk(x, key_padding)
        return self.ln(x)


class FusionEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.embed_dim
        self.reg_token = nn.Parameter(torch.zeros(1, 1, d))
        nn.init.normal_(self.reg_token, std=0.02)
        self.segment = nn.Embedding(3, d)  # 0 = query, 1 = visual, 2 = text
        self.blocks = nn.ModuleList(
            TransformerBlock(d, config.fusion_heads) for _ in range(config.fusion_layers)
        )
        self.ln = nn.LayerNorm(d)

    def forward(
        self, visual: torch.Tensor, text: torch.Tensor, text_mask: torch.Tensor
    ) -> torch.Tensor:
        b = visual.shape[0]
        reg = self.reg_token.expand(b, 1, -1) + self.segment.weight[0]
        seq = torch.cat(
            [reg, visual + self.segment.weight[1], text + self.segment.weight[2]], dim=1
        )
        n_unmasked = 1 + visual.shape[1]
        key_padding = torch.cat(
            [
                torch.zeros(b, n_unmasked, dtype=torch.bool, device=seq.device),
                text_mask == 0,
            ],
            dim=1,
        )
        for blk in self.blocks:
            seq = blk(seq, key_padding)
        return self.ln(seq)


class GroundingNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.embed_dim
        self.visual = VisualEncoder(config)
        self.text = TextEncoder(config)
        self.fusion = FusionEncoder(config)
        self.head = nn.Sequential(
            nn.Linear(d, d), nn.ReLU(), nn.Linear(d, d), nn.ReLU(), nn.Linear(d, 4)
        )

    def forward(
        self,
        images: torch.Tensor,
        token_ids: torch.Tensor,
        text_mask: torch.Tensor,
        image_index: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Predict (cx, cy, w, h) in (0, 1) for each text row.

        ``image_index`` maps text rows onto image rows so each distinct image
        is encoded once per batch (the pre-training batches pair one image
        with several phrases).
        """
        visual = self.visual(images)
        if image_index is not None:
            visual = visual[image_index]
        if visual.shape[0] != token_ids.shape[0]:
            raise ValueError(
                f"{token_ids.shape[0]} text rows for {visual.shape[0]} visual rows; "
                "pass image_index to pair them"
            )
        text = self.text(token_ids, text_mask)
        fused = self.fusion(visual, text, text_mask)
        return torch.sigmoid(self.head(fused[:, 0]))

    @torch.no_grad()
    def ground(self, image: torch.Tensor, text: str) -> tuple[float, float, float, float]:
        """Single-sample inference on a letterboxed image tensor.

        Returns the normalized center-form box. The model is put in eval
        mode; text that tokenizes to all padding is rejected.
        """
        ids, mask = tokenize_checked(text, self.config.vocab, self.config.max_text_len)
        was_training = self.training
        self.eval()
        try:
            if image.ndim == 2:
                image = image[None, None]
            elif image.ndim == 3:
                image = image[None]
            box = self(
                image,
                torch.tensor([ids], dtype=torch.long),
                torch.tensor([mask], dtype=torch.long),
            )[0]
        finally:
            if was_training:
                self.train()
        return tuple(float(v) for v in box)


def build_model(config: ModelConfig, seed: int = 0) -> GroundingNet:
    """Construct a network with seeded initialization."""
    torch.manual_seed(seed)
    return GroundingNet(config)
