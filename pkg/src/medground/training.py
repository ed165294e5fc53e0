"""Two-stage training: anatomical pre-training, then phrase-grounding fine-tuning.

Stage 1 consumes anatomy text-region batches (8 images x 5 regions = 40 pairs
under defaults) at lr 1e-4 for 1 epoch; stage 2 trains on finding records in
12-pair batches at lr 1e-5 for 90 epochs and returns the epoch with the best
validation mIoU. Both stages are bit-reproducible under a fixed seed in
single-threaded mode, and per-epoch snapshots carry enough optimizer and RNG
state to resume a run step-for-step.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from medground.data.augment import pixel_augment
from medground.data.lexicon import SynonymLexicon
from medground.data.records import DatasetManifest, GroundingRecord, SplitSpec
from medground.data.sampler import build_pretrain_batches
from medground.evaluation import sample_result
from medground.geometry import apply_letterbox, to_norm
from medground.model.checkpoint import (
    STAGE_ANATOMICAL,
    STAGE_FINETUNED,
    STAGE_GENERAL,
    Checkpoint,
    CheckpointError,
    checkpoint_from_model,
    model_from_checkpoint,
    save_checkpoint,
)
from medground.model.config import LoraConfig
from medground.model.inference import letterbox_image, predict_boxes_batched
from medground.model.lora import apply_lora, lora_parameter_names
from medground.model.losses import grounding_loss
from medground.model.network import GroundingNet
from medground.model.tokenizer import tokenize

STAGE_PRETRAIN = "anatomical_pretrain"
STAGE_FINETUNE = "mpg_finetune"


@dataclass(frozen=True)
class StageConfig:
    stage: str
    learning_rate: float
    epochs: int
    batch_size: int  # images per batch for pre-training, pairs for fine-tuning
    weight_decay: float = 1e-4
    seed: int = 0
    use_lora: bool = False
    jitter_strength: float = 0.2
    noise_sigma: float = 0.02
    eval_every: int = 0  # monitoring validations every N steps; 0 = quarter-epoch
    grad_clip: float = 0.1
    regions_per_image: int = 5
    giou_weight: float = 1.0
    holdout_fraction: float = 0.05  # pre-training monitor slice, by image
    threads: int | None = None  # set to 1 for bit-reproducible runs
    target_val_miou: float | None = None  # optional early stop on validation
    target_val_acc: float | None = None

    def __post_init__(self) -> None:
        if self.stage not in (STAGE_PRETRAIN, STAGE_FINETUNE):
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.holdout_fraction < 0.5:
            raise ValueError("holdout_fraction must lie in [0, 0.5)")

    @classmethod
    def pretrain_defaults(cls, **overrides) -> "StageConfig":
        args = dict(stage=STAGE_PRETRAIN, learning_rate=1e-4, epochs=1, batch_size=8)
        args.update(overrides)
        return cls(**args)

    @classmethod
    def finetune_defaults(cls, **overrides) -> "StageConfig":
        args = dict(stage=STAGE_FINETUNE, learning_rate=1e-5, epochs=90, batch_size=12)
        args.update(overrides)
        return cls(**args)

    def to_json_obj(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "StageConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**obj)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json_obj(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class TrainLog:
    stage: str
    seed: int
    config_hash: str
    step_losses: list[float] = field(default_factory=list)
    val_history: list[dict] = field(default_factory=list)  # one entry per epoch
    monitor: list[dict] = field(default_factory=list)  # step-interval monitoring
    wall_clock_s: float = 0.0

    def val_mious(self) -> list[float]:
        return [entry["miou"] for entry in self.val_history]

    def write_jsonl(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            header = {
                "type": "run",
                "stage": self.stage,
                "seed": self.seed,
                "config_hash": self.config_hash,
                "wall_clock_s": self.wall_clock_s,
            }
            f.write(json.dumps(header, sort_keys=True) + "\n")
            for i, loss in enumerate(self.step_losses, start=1):
                f.write(json.dumps({"type": "step", "step": i, "loss": loss}) + "\n")
            for entry in self.monitor:
                f.write(json.dumps({"type": "monitor", **entry}, sort_keys=True) + "\n")
            for entry in self.val_history:
                f.write(json.dumps({"type": "val", **entry}, sort_keys=True) + "\n")


def select_best_epoch(log: TrainLog | list[float]) -> int:
    """1-based index of the highest validation mIoU; ties go to the earlier epoch."""
    values = log.val_mious() if isinstance(log, TrainLog) else list(log)
    if not values:
        raise ValueError("empty validation history")
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best + 1


# ---------------------------------------------------------------------------
# internals shared by both stages


class _ImageStore:
    """Letterboxed-image cache keyed by image id."""

    def __init__(self, manifest: DatasetManifest, root: Path, target: int):
        from medground.model.inference import load_image_array

        self.manifest = manifest
        self.root = root
        self.target = target
        self._load = load_image_array
        self._cache: dict[str, tuple[np.ndarray, object]] = {}

    def get(self, image_id: str) -> tuple[np.ndarray, object]:
        if image_id not in self._cache:
            arr = self._load(self.root / self.manifest.images[image_id].path)
            self._cache[image_id] = letterbox_image(arr, self.target)
        return self._cache[image_id]

    def raw(self, image_id: str) -> np.ndarray:
        return self._load(self.root / self.manifest.images[image_id].path)


def _trainable_parameters(model: GroundingNet, use_lora: bool) -> list[tuple[str, torch.nn.Parameter]]:
    if not use_lora:
        for p in model.parameters():
            p.requires_grad_(True)
        return list(model.named_parameters())
    adapter_names = lora_parameter_names(model)
    chosen = []
    for name, p in model.named_parameters():
        trainable = name in adapter_names or name.startswith("head.")
        p.requires_grad_(trainable)
        if trainable:
            chosen.append((name, p))
    return chosen


def _optimizer_state_arrays(
    optimizer: torch.optim.Optimizer, named: list[tuple[str, torch.nn.Parameter]]
) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for name, param in named:
        state = optimizer.state.get(param)
        if not state:
            continue
        for key in ("step", "exp_avg", "exp_avg_sq"):
            value = state[key]
            if not torch.is_tensor(value):
                value = torch.tensor(float(value))
            arrays[f"opt::{name}::{key}"] = value.detach().cpu().numpy().astype(np.float32)
    return arrays


def _restore_optimizer_state(
    optimizer: torch.optim.Optimizer,
    named: list[tuple[str, torch.nn.Parameter]],
    arrays: dict[str, np.ndarray],
) -> None:
    for name, param in named:
        step_key = f"opt::{name}::step"
        if step_key not in arrays:
            continue
        optimizer.state[param] = {
            "step": torch.tensor(arrays[step_key].copy().reshape(())),
            "exp_avg": torch.from_numpy(arrays[f"opt::{name}::exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(arrays[f"opt::{name}::exp_avg_sq"].copy()),
        }


def _validate(
    model: GroundingNet,
    records: list[GroundingRecord],
    store: _ImageStore,
) -> tuple[float, float]:
    """Validation mIoU and Acc in the source pixel frame."""
    image_ids: list[str] = []
    for rec in records:
        if rec.image_id not in image_ids:
            image_ids.append(rec.image_id)
    row_of = {image_id: i for i, image_id in enumerate(image_ids)}
    arrays = [store.raw(image_id) for image_id in image_ids]
    was_training = model.training
    boxes = predict_boxes_batched(
        model,
        arrays,
        [r.text for r in records],
        [row_of[r.image_id] for r in records],
    )
    if was_training:
        model.train()
    results = [sample_result(rec, box) for rec, box in zip(records, boxes)]
    n = len(results)
    miou = float(np.mean([r.iou for r in results])) if n else 0.0
    acc = sum(1 for r in results if r.hit) / n if n else 0.0
    return miou, acc


def _forward_pairs(
    model: GroundingNet,
    store: _ImageStore,
    image_ids: list[str],
    texts: list[str],
    boxes,
    image_index: list[int],
    rng: np.random.Generator,
    config: StageConfig,
) -> torch.Tensor:
    target = model.config.image_size
    augmented = []
    lbrecords = []
    for image_id in image_ids:
        arr, record = store.get(image_id)
        augmented.append(
            pixel_augment(arr, rng, config.jitter_strength, config.noise_sigma)
        )
        lbrecords.append(record)
    images = torch.from_numpy(np.stack(augmented).astype(np.float32))[:, None]

    ids, masks, targets = [], [], []
    for text, box, idx in zip(texts, boxes, image_index):
        i, m = tokenize(text, model.config.vocab, model.config.max_text_len)
        ids.append(i)
        masks.append(m)
        norm = to_norm(apply_letterbox(box, lbrecords[idx]), (target, target))
        targets.append(list(norm.as_tuple()))

    pred = model(
        images,
        torch.tensor(ids, dtype=torch.long),
        torch.tensor(masks, dtype=torch.long),
        image_index=torch.tensor(image_index, dtype=torch.long),
    )
    return grounding_loss(pred, torch.tensor(targets, dtype=torch.float32), config.giou_weight)


def _snapshot(
    model: GroundingNet,
    stage_in: str,
    config: StageConfig,
    optimizer,
    named_params,
    rng: np.random.Generator,
    epoch: int,
    step: int,
    val_miou: float,
    out_dir: Path,
) -> None:
    trainer_state = {
        "stage": config.stage,
        "epoch": epoch,
        "step": step,
        "rng_state": rng.bit_generator.state,
        "config": config.to_json_obj(),
    }
    ckpt = checkpoint_from_model(
        model,
        stage_in,
        provenance={"seed": config.seed, "step_count": step, "epoch": epoch},
        extra_arrays=_optimizer_state_arrays(optimizer, named_params),
        trainer_state=trainer_state,
    )
    save_checkpoint(ckpt, out_dir / f"{config.stage}-{epoch}-{val_miou:.4f}.ckpt")


def _is_resume(checkpoint: Checkpoint, config: StageConfig) -> bool:
    return bool(checkpoint.trainer_state) and checkpoint.trainer_state.get("stage") == config.stage


# ---------------------------------------------------------------------------
# stage 1: anatomical pre-training


def pretrain_anatomical(
    checkpoint: Checkpoint,
    manifest: DatasetManifest,
    lexicon: SynonymLexicon | None,
    config: StageConfig,
    root: str | Path,
    out_dir: str | Path | None = None,
) -> tuple[Checkpoint, TrainLog]:
    """Refine a general checkpoint on anatomy text-region pairs.

    With ``use_lora``, only adapter and box-head parameters receive updates;
    every other weight is bitwise-frozen. Passing a mid-run snapshot (one
    written by this function into ``out_dir``) resumes the interrupted run.
    """
    if config.stage != STAGE_PRETRAIN:
        raise ValueError(f"config stage must be {STAGE_PRETRAIN}")
    resume = _is_resume(checkpoint, config)
    if not resume and checkpoint.stage != STAGE_GENERAL:
        raise CheckpointError(
            f"anatomical pre-training requires a general-stage checkpoint, got {checkpoint.stage!r}"
        )
    anatomy = manifest.anatomy_records()
    if not anatomy:
        raise ValueError("manifest has no anatomy records to pre-train on")

    if config.threads:
        torch.set_num_threads(config.threads)
    t0 = time.monotonic()

    model = model_from_checkpoint(checkpoint)
    model.train()
    torch.manual_seed(config.seed)
    if config.use_lora and not checkpoint.lora_attached:
        lora_cfg = model.config.lora or LoraConfig()
        if model.config.lora is None:
            model.config = dataclasses.replace(model.config, lora=lora_cfg)
        apply_lora(model, lora_cfg)
    named_params = _trainable_parameters(model, config.use_lora)
    optimizer = torch.optim.AdamW(
        [p for _, p in named_params], lr=config.learning_rate, weight_decay=config.weight_decay
    )
    rng = np.random.default_rng(config.seed)
    start_epoch = 0
    step = 0
    log = TrainLog(stage=config.stage, seed=config.seed, config_hash=config.config_hash())

    if resume:
        state = checkpoint.trainer_state
        rng.bit_generator.state = state["rng_state"]
        _restore_optimizer_state(optimizer, named_params, checkpoint.extra_arrays)
        start_epoch = state["epoch"]
        step = state["step"]

    # Hold out a deterministic slice of images for monitoring only.
    all_image_ids = sorted({r.image_id for r in anatomy})
    n_holdout = int(len(all_image_ids) * config.holdout_fraction)
    holdout_rng = np.random.default_rng(config.seed ^ 0x5EED)
    holdout_ids = set(
        holdout_rng.permutation(all_image_ids)[:n_holdout].tolist()
    )
    train_image_ids = [i for i in all_image_ids if i not in holdout_ids]
    monitor_records = [r for r in anatomy if r.image_id in holdout_ids][:200]

    store = _ImageStore(manifest, Path(root), model.config.image_size)
    n_batches = max(1, len(train_image_ids) // config.batch_size)
    monitor_every = config.eval_every or max(1, n_batches // 4)

    for epoch in range(start_epoch, config.epochs):
        for batch in build_pretrain_batches(
            manifest,
            lexicon,
            images_per_batch=config.batch_size,
            regions_per_image=config.regions_per_image,
            rng=rng,
            image_ids=train_image_ids,
        ):
            image_ids = list(batch.image_ids)
            row_of = {image_id: i for i, image_id in enumerate(image_ids)}
            loss = _forward_pairs(
                model,
                store,
                image_ids,
                [p.text for p in batch.pairs],
                [p.record.box for p in batch.pairs],
                [row_of[p.image_id] for p in batch.pairs],
                rng,
                config,
            )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_([p for _, p in named_params], config.grad_clip)
            optimizer.step()
            step += 1
            log.step_losses.append(float(loss.detach()))
            if monitor_records and step % monitor_every == 0:
                miou, acc = _validate(model, monitor_records, store)
                log.monitor.append({"step": step, "miou": miou, "acc": acc})

        if monitor_records:
            miou, acc = _validate(model, monitor_records, store)
        else:
            miou, acc = 0.0, 0.0
        log.val_history.append({"epoch": epoch + 1, "miou": miou, "acc": acc})
        if out_dir is not None and epoch + 1 < config.epochs:
            _snapshot(
                model, checkpoint.stage, config, optimizer, named_params,
                rng, epoch + 1, step, miou, Path(out_dir),
            )

    log.wall_clock_s = time.monotonic() - t0
    result = checkpoint_from_model(
        model,
        STAGE_ANATOMICAL,
        provenance={
            "seed": config.seed,
            "data_hash": manifest.data_hash(),
            "step_count": step,
            "stage_config": config.to_json_obj(),
            "metric_history": log.val_history,
        },
    )
    if out_dir is not None:
        final_miou = log.val_history[-1]["miou"] if log.val_history else 0.0
        save_checkpoint(
            result, Path(out_dir) / f"{config.stage}-{config.epochs}-{final_miou:.4f}.ckpt"
        )
    return result, log


# ---------------------------------------------------------------------------
# stage 2: phrase-grounding fine-tuning


def finetune_mpg(
    checkpoint: Checkpoint,
    manifest: DatasetManifest,
    split: SplitSpec,
    config: StageConfig,
    root: str | Path,
    out_dir: str | Path | None = None,
    val_records: list[GroundingRecord] | None = None,
) -> tuple[Checkpoint, TrainLog]:
    """Fine-tune on finding records; returns the best-validation-mIoU epoch.

    Every parameter trains, including any attached adapters. ``val_records``
    overrides the split's validation partition (used e.g. for overfit
    probes that validate on the training set itself).
    """
    if config.stage != STAGE_FINETUNE:
        raise ValueError(f"config stage must be {STAGE_FINETUNE}")
    resume = _is_resume(checkpoint, config)
    if not resume and checkpoint.stage not in (STAGE_GENERAL, STAGE_ANATOMICAL):
        raise CheckpointError(
            f"fine-tuning accepts general or anatomical checkpoints, got {checkpoint.stage!r}"
        )

    by_id = manifest.records_by_id()
    train_records = [by_id[i] for i in sorted(split.train) if by_id[i].task == "finding"]
    if val_records is None:
        val_records = [by_id[i] for i in sorted(split.val) if by_id[i].task == "finding"]
    if not train_records:
        raise ValueError("fine-tuning train partition has no finding records")
    if not val_records:
        raise ValueError("fine-tuning validation partition has no finding records")

    if config.threads:
        torch.set_num_threads(config.threads)
    t0 = time.monotonic()

    model = model_from_checkpoint(checkpoint)
    model.train()
    torch.manual_seed(config.seed)
    named_params = _trainable_parameters(model, use_lora=False)
    optimizer = torch.optim.AdamW(
        [p for _, p in named_params], lr=config.learning_rate, weight_decay=config.weight_decay
    )
    rng = np.random.default_rng(config.seed)
    start_epoch = 0
    step = 0
    log = TrainLog(stage=config.stage, seed=config.seed, config_hash=config.config_hash())
    best_state: dict[str, torch.Tensor] | None = None
    best_miou = -1.0

    if resume:
        state = checkpoint.trainer_state
        rng.bit_generator.state = state["rng_state"]
        _restore_optimizer_state(optimizer, named_params, checkpoint.extra_arrays)
        start_epoch = state["epoch"]
        step = state["step"]
        best_miou = state.get("best_miou", -1.0)

    store = _ImageStore(manifest, Path(root), model.config.image_size)
    stage_in = checkpoint.stage

    for epoch in range(start_epoch, config.epochs):
        order = rng.permutation(len(train_records))
        chunks = [
            order[i : i + config.batch_size]
            for i in range(0, len(order), config.batch_size)
        ]
        if len(chunks) > 1 and len(chunks[-1]) < config.batch_size:
            chunks = chunks[:-1]
        for chunk in chunks:
            records = [train_records[int(i)] for i in chunk]
            image_ids: list[str] = []
            for rec in records:
                if rec.image_id not in image_ids:
                    image_ids.append(rec.image_id)
            row_of = {image_id: i for i, image_id in enumerate(image_ids)}
            loss = _forward_pairs(
                model,
                store,
                image_ids,
                [r.text for r in records],
                [r.box for r in records],
                [row_of[r.image_id] for r in records],
                rng,
                config,
            )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_([p for _, p in named_params], config.grad_clip)
            optimizer.step()
            step += 1
            log.step_losses.append(float(loss.detach()))

        miou, acc = _validate(model, val_records, store)
        log.val_history.append({"epoch": epoch + 1, "miou": miou, "acc": acc})
        if miou > best_miou:
            best_miou = miou
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        if out_dir is not None and epoch + 1 < config.epochs:
            _snapshot(
                model, stage_in, config, optimizer, named_params,
                rng, epoch + 1, step, miou, Path(out_dir),
            )
        if (
            config.target_val_miou is not None
            and miou >= config.target_val_miou
            and (config.target_val_acc is None or acc >= config.target_val_acc)
        ):
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    selected = select_best_epoch(log)
    log.wall_clock_s = time.monotonic() - t0
    result = checkpoint_from_model(
        model,
        STAGE_FINETUNED,
        provenance={
            "seed": config.seed,
            "data_hash": manifest.data_hash(),
            "step_count": step,
            "stage_config": config.to_json_obj(),
            "metric_history": log.val_history,
            "selected_epoch": selected,
        },
    )
    if out_dir is not None:
        save_checkpoint(
            result,
            Path(out_dir) / f"{config.stage}-{selected}-{log.val_history[selected - 1]['miou']:.4f}.ckpt",
        )
    return result, log
