"""Checkpoint archive: config + named float32 arrays + provenance.

The on-disk form is a zip archive with fixed member order, fixed timestamps,
and canonical JSON, so ``save -> load -> save`` is bit-exact. Weight arrays
are stored as raw little-endian float32 in a single blob addressed by an
index of name -> (shape, dtype, offset, nbytes).
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from medground.model.config import ModelConfig
from medground.model.lora import apply_lora, has_lora
from medground.model.network import GroundingNet, build_model

STAGE_GENERAL = "general"
STAGE_ANATOMICAL = "anatomical"
STAGE_FINETUNED = "finetuned"
STAGES = (STAGE_GENERAL, STAGE_ANATOMICAL, STAGE_FINETUNED)

_FORMAT = "medground-checkpoint"
_VERSION = 1
_ZIP_DATE = (2020, 1, 1, 0, 0, 0)


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    weights: dict[str, np.ndarray]
    config: ModelConfig
    stage: str
    provenance: dict
    lora_attached: bool = False
    extra_arrays: dict[str, np.ndarray] = field(default_factory=dict)
    trainer_state: dict | None = None

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise CheckpointError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        if self.lora_attached and self.config.lora is None:
            raise CheckpointError("lora_attached requires config.lora")

    def weight_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.weights):
            h.update(name.encode())
            h.update(_as_le_f32(self.weights[name]).tobytes())
        return h.hexdigest()


def _as_le_f32(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype="<f4")


def _canonical_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _pack_arrays(arrays: dict[str, np.ndarray]) -> tuple[bytes, dict]:
    index: dict[str, dict] = {}
    blob = io.BytesIO()
    offset = 0
    for name in sorted(arrays):
        data = _as_le_f32(arrays[name]).tobytes()
        index[name] = {
            "shape": list(arrays[name].shape),
            "dtype": "float32",
            "offset": offset,
            "nbytes": len(data),
        }
        blob.write(data)
        offset += len(data)
    return blob.getvalue(), index


def _unpack_arrays(blob: bytes, index: dict) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for name, entry in index.items():
        start = entry["offset"]
        raw = blob[start : start + entry["nbytes"]]
        out[name] = (
            np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).astype(np.float32)
        )
    return out


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    weights_blob, weights_index = _pack_arrays(ckpt.weights)
    members: list[tuple[str, bytes]] = [
        (
            "meta.json",
            _canonical_json(
                {
                    "format": _FORMAT,
                    "version": _VERSION,
                    "stage": ckpt.stage,
                    "lora_attached": ckpt.lora_attached,
                }
            ),
        ),
        ("config.json", _canonical_json(ckpt.config.to_json_obj())),
        ("index.json", _canonical_json(weights_index)),
        ("weights.bin", weights_blob),
        ("provenance.json", _canonical_json(ckpt.provenance)),
    ]
    if ckpt.extra_arrays:
        extra_blob, extra_index = _pack_arrays(ckpt.extra_arrays)
        members.append(("extra_index.json", _canonical_json(extra_index)))
        members.append(("extra.bin", extra_blob))
    if ckpt.trainer_state is not None:
        members.append(("trainer_state.json", _canonical_json(ckpt.trainer_state)))

    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, data in members:
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with zipfile.ZipFile(path) as zf:
        names = set(zf.namelist())
        required = {"meta.json", "config.json", "index.json", "weights.bin", "provenance.json"}
        missing = required - names
        if missing:
            raise CheckpointError(f"{path}: missing archive members {sorted(missing)}")
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != _FORMAT:
            raise CheckpointError(f"{path}: not a {_FORMAT} archive")
        config = ModelConfig.from_json_obj(json.loads(zf.read("config.json")))
        weights = _unpack_arrays(zf.read("weights.bin"), json.loads(zf.read("index.json")))
        provenance = json.loads(zf.read("provenance.json"))
        extra_arrays: dict[str, np.ndarray] = {}
        if "extra.bin" in names:
            extra_arrays = _unpack_arrays(
                zf.read("extra.bin"), json.loads(zf.read("extra_index.json"))
            )
        trainer_state = (
            json.loads(zf.read("trainer_state.json")) if "trainer_state.json" in names else None
        )
    return Checkpoint(
        weights=weights,
        config=config,
        stage=meta["stage"],
        provenance=provenance,
        lora_attached=meta["lora_attached"],
        extra_arrays=extra_arrays,
        trainer_state=trainer_state,
    )


def checkpoint_from_model(
    model: GroundingNet,
    stage: str,
    provenance: dict,
    extra_arrays: dict[str, np.ndarray] | None = None,
    trainer_state: dict | None = None,
) -> Checkpoint:
    weights = {
        name: tensor.detach().cpu().numpy().astype(np.float32)
        for name, tensor in model.state_dict().items()
    }
    return Checkpoint(
        weights=weights,
        config=model.config,
        stage=stage,
        provenance=provenance,
        lora_attached=has_lora(model),
        extra_arrays=extra_arrays or {},
        trainer_state=trainer_state,
    )


def model_from_checkpoint(ckpt: Checkpoint) -> GroundingNet:
    model = build_model(ckpt.config, seed=0)
    if ckpt.lora_attached:
        apply_lora(model, ckpt.config.lora)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in ckpt.weights.items()}
    model.load_state_dict(state, strict=True)
    model.eval()
    return model


def new_general_checkpoint(config: ModelConfig, seed: int = 0) -> Checkpoint:
    """A fresh generally-initialized model, the starting point of the pipeline."""
    model = build_model(config, seed=seed)
    return checkpoint_from_model(
        model, STAGE_GENERAL, provenance={"seed": seed, "step_count": 0, "history": []}
    )
