from medground.model.checkpoint import (
    STAGE_ANATOMICAL,
    STAGE_FINETUNED,
    STAGE_GENERAL,
    STAGES,
    Checkpoint,
    CheckpointError,
    checkpoint_from_model,
    load_checkpoint,
    model_from_checkpoint,
    new_general_checkpoint,
    save_checkpoint,
)
from medground.model.config import LoraConfig, ModelConfig
from medground.model.inference import (
    load_image_array,
    letterbox_image,
    make_constant_box_model,
    norm_to_source_box,
    predict_box,
    predict_boxes_batched,
)
from medground.model.lora import (
    LoraError,
    LoraLinear,
    apply_lora,
    has_lora,
    lora_parameter_names,
    merge_lora,
)
from medground.model.losses import box_cxcywh_to_xyxy, giou_tensor, grounding_loss
from medground.model.network import GroundingNet, build_model
from medground.model.tokenizer import (
    PAD_ID,
    UNK_ID,
    EmptyTextError,
    build_vocab,
    normalize_words,
    tokenize,
    tokenize_checked,
    vocab_coverage,
)

__all__ = [
    "STAGE_ANATOMICAL",
    "STAGE_FINETUNED",
    "STAGE_GENERAL",
    "STAGES",
    "Checkpoint",
    "CheckpointError",
    "checkpoint_from_model",
    "load_checkpoint",
    "model_from_checkpoint",
    "new_general_checkpoint",
    "save_checkpoint",
    "LoraConfig",
    "ModelConfig",
    "load_image_array",
    "letterbox_image",
    "make_constant_box_model",
    "norm_to_source_box",
    "predict_box",
    "predict_boxes_batched",
    "LoraError",
    "LoraLinear",
    "apply_lora",
    "has_lora",
    "lora_parameter_names",
    "merge_lora",
    "box_cxcywh_to_xyxy",
    "giou_tensor",
    "grounding_loss",
    "GroundingNet",
    "build_model",
    "PAD_ID",
    "UNK_ID",
    "EmptyTextError",
    "build_vocab",
    "normalize_words",
    "tokenize",
    "tokenize_checked",
    "vocab_coverage",
]
