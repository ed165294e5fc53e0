"""Model and adapter configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

LORA_TARGET_CHOICES = ("fusion_q", "fusion_k", "fusion_v", "fusion_o")


@dataclass(frozen=True)
class LoraConfig:
    rank: int = 8
    alpha: float = 16.0
    targets: tuple[str, ...] = ("fusion_q", "fusion_v")

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("lora rank must be >= 1")
        unknown = [t for t in self.targets if t not in LORA_TARGET_CHOICES]
        if unknown:
            raise ValueError(f"unknown lora targets {unknown}; choices {LORA_TARGET_CHOICES}")
        if not self.targets:
            raise ValueError("lora targets must not be empty")

    def to_json_obj(self) -> dict:
        return {"rank": self.rank, "alpha": self.alpha, "targets": list(self.targets)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LoraConfig":
        return cls(rank=obj["rank"], alpha=obj["alpha"], targets=tuple(obj["targets"]))


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the single-box grounding network.

    The visual and text encoders are deliberately small, configurable
    stand-ins for large pre-trained backbones; the architecture pattern
    (visual tokens + text tokens + fusion + box query token) is what matters
    at desk scale.
    """

    vocab: dict[str, int]
    image_size: int = 640
    patch_grid: int = 20
    embed_dim: int = 64
    fusion_layers: int = 2
    fusion_heads: int = 4
    text_layers: int = 2
    max_text_len: int = 16
    lora: LoraConfig | None = None

    def __post_init__(self) -> None:
        if self.embed_dim % self.fusion_heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by fusion_heads {self.fusion_heads}"
            )
        if self.embed_dim % 4 != 0:
            raise ValueError("embed_dim must be divisible by 4")
        if self.image_size < 32:
            raise ValueError("image_size must be >= 32")
        if self.patch_grid < 1 or self.patch_grid > self.image_size // 16:
            raise ValueError(
                f"patch_grid must lie in [1, image_size/16], got {self.patch_grid}"
            )
        if self.max_text_len < 1:
            raise ValueError("max_text_len must be >= 1")
        if not self.vocab:
            raise ValueError("vocab must not be empty")

    def to_json_obj(self) -> dict:
        obj = asdict(self)
        obj["lora"] = self.lora.to_json_obj() if self.lora else None
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        lora = obj.pop("lora", None)
        return cls(lora=LoraConfig.from_json_obj(lora) if lora else None, **obj)

    def summary(self) -> dict:
        return {
            "image_size": self.image_size,
            "patch_grid": self.patch_grid,
            "embed_dim": self.embed_dim,
            "fusion_layers": self.fusion_layers,
            "fusion_heads": self.fusion_heads,
            "text_layers": self.text_layers,
            "max_text_len": self.max_text_len,
            "vocab_size": len(self.vocab),
            "lora": self.lora.to_json_obj() if self.lora else None,
        }
