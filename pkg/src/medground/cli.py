"""Command-line entry points for every pipeline stage.

Each subcommand is a thin wrapper over the corresponding library operation;
given the same seed it produces byte-identical artifacts to calling the
library directly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from medground.data.lexicon import load_default_lexicon
from medground.data.records import DatasetManifest
from medground.data.splits import split_dataset
from medground.data.synthetic import SyntheticConfig, generate_synthetic_corpus
from medground.evaluation import evaluate, read_sample_dump, EvalReport
from medground.model.checkpoint import (
    load_checkpoint,
    new_general_checkpoint,
    save_checkpoint,
)
from medground.model.config import ModelConfig
from medground.model.inference import load_image_array, predict_box
from medground.model.checkpoint import model_from_checkpoint
from medground.model.tokenizer import build_vocab
from medground.reports import compare_ablation, render_ablation, render_report
from medground.training import StageConfig, finetune_mpg, pretrain_anatomical

DATA_ROOT_ENV = "MEDGROUND_DATA_ROOT"

# Desk-scale model shape used when no --model-config file is given.
TOY_MODEL_DEFAULTS = {"image_size": 160, "patch_grid": 10, "embed_dim": 64}


def _data_root(args) -> Path:
    if args.data:
        return Path(args.data)
    env = os.environ.get(DATA_ROOT_ENV)
    if env:
        return Path(env)
    raise SystemExit(f"error: --data not given and {DATA_ROOT_ENV} is unset")


def _load_stage_config(path: str | None, stage: str, seed: int | None) -> StageConfig:
    defaults = (
        StageConfig.pretrain_defaults if stage == "anatomical_pretrain"
        else StageConfig.finetune_defaults
    )
    if path is None:
        cfg = defaults()
    else:
        with open(path, encoding="utf-8") as f:
            obj = json.load(f)
        obj.setdefault("stage", stage)
        if obj["stage"] != stage:
            raise ValueError(f"config stage {obj['stage']!r} does not match subcommand {stage!r}")
        base = defaults().to_json_obj()
        base.update(obj)
        cfg = StageConfig.from_json_obj(base)
    if seed is not None:
        cfg = StageConfig.from_json_obj({**cfg.to_json_obj(), "seed": seed})
    return cfg


def _model_config(path: str | None, vocab: dict[str, int]) -> ModelConfig:
    fields = dict(TOY_MODEL_DEFAULTS)
    if path is not None:
        with open(path, encoding="utf-8") as f:
            overrides = json.load(f)
        allowed = {
            "image_size", "patch_grid", "embed_dim", "fusion_layers",
            "fusion_heads", "text_layers", "max_text_len",
        }
        unknown = sorted(set(overrides) - allowed)
        if unknown:
            raise ValueError(f"unknown model config keys: {unknown}")
        fields.update(overrides)
    return ModelConfig(vocab=vocab, **fields)


def _manifest_vocab(manifest: DatasetManifest) -> dict[str, int]:
    lexicon = load_default_lexicon()
    texts = [r.text for r in manifest.records] + lexicon.all_texts()
    return build_vocab(texts)


def cmd_synth(args) -> int:
    config = SyntheticConfig(
        n_images=args.n,
        image_width=args.image_size,
        image_height=args.image_size,
        findings_per_image=args.findings_per_image,
        finding_fraction=args.finding_fraction,
        paraphrase_rate=args.paraphrase_rate,
    )
    manifest = generate_synthetic_corpus(config, seed=args.seed, out_dir=args.out)
    print(
        json.dumps(
            {
                "out": str(args.out),
                "images": len(manifest.images),
                "anatomy_records": len(manifest.anatomy_records()),
                "finding_records": len(manifest.finding_records()),
            }
        )
    )
    return 0


def cmd_pretrain(args) -> int:
    root = _data_root(args)
    manifest = DatasetManifest.load(root)
    config = _load_stage_config(args.config, "anatomical_pretrain", args.seed)
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
    else:
        vocab = _manifest_vocab(manifest)
        ckpt = new_general_checkpoint(_model_config(args.model_config, vocab), seed=config.seed)
    lexicon = None if args.no_synonyms else load_default_lexicon()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result, log = pretrain_anatomical(ckpt, manifest, lexicon, config, root, out_dir=out_dir)
    log.write_jsonl(out_dir / "metrics.jsonl")
    print(json.dumps({"stage": result.stage, "provenance": result.provenance}, sort_keys=True))
    return 0


def cmd_finetune(args) -> int:
    root = _data_root(args)
    manifest = DatasetManifest.load(root)
    config = _load_stage_config(args.config, "mpg_finetune", args.seed)
    ckpt = load_checkpoint(args.checkpoint)
    split = split_dataset(manifest, ratios=tuple(args.ratios), seed=args.split_seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result, log = finetune_mpg(ckpt, manifest, split, config, root, out_dir=out_dir)
    log.write_jsonl(out_dir / "metrics.jsonl")
    print(json.dumps({"stage": result.stage, "provenance": result.provenance}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    root = _data_root(args)
    manifest = DatasetManifest.load(root)
    ckpt = load_checkpoint(args.checkpoint)
    if args.partition == "all":
        record_ids = None
        split_id = "all"
    else:
        split = split_dataset(manifest, ratios=tuple(args.ratios), seed=args.split_seed)
        record_ids = split.partition(args.partition)
        split_id = f"{args.partition}-seed{args.split_seed}"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report, _results = evaluate(
        ckpt,
        manifest,
        record_ids,
        root,
        model_id=args.model_id,
        split_id=split_id,
        dump_path=out_dir / "samples.jsonl",
    )
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(report.to_json_obj(), f, indent=2, sort_keys=True)
        f.write("\n")
    doc = render_report([report], layout=args.layout)
    (out_dir / "report.csv").write_text(doc.csv, encoding="utf-8")
    (out_dir / "report.txt").write_text(doc.text, encoding="utf-8")
    print(json.dumps(report.to_json_obj()["overall"], sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    with open(args.report_with, encoding="utf-8") as f:
        report_with = EvalReport.from_json_obj(json.load(f))
    with open(args.report_without, encoding="utf-8") as f:
        report_without = EvalReport.from_json_obj(json.load(f))
    results_with = read_sample_dump(args.dump_with) if args.dump_with else None
    results_without = read_sample_dump(args.dump_without) if args.dump_without else None
    delta = compare_ablation(
        report_with, report_without, results_with, results_without, seed=args.seed
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = render_ablation(delta)
    (out_dir / "ablation.csv").write_text(doc.csv, encoding="utf-8")
    (out_dir / "ablation.txt").write_text(doc.text, encoding="utf-8")
    print(
        json.dumps(
            {
                "delta_acc": delta.delta_acc,
                "delta_miou": delta.delta_miou,
                "p_acc": delta.p_acc,
                "p_miou": delta.p_miou,
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_ground(args) -> int:
    if not args.text.strip():
        raise ValueError("text must be non-empty")
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    image = load_image_array(args.image)
    box, _clamped = predict_box(model, image, args.text)
    print(json.dumps({"box_xyxy": list(box), "stage": ckpt.stage}, sort_keys=True))
    if args.draw:
        _draw_box(args.image, box, args.draw)
    return 0


def _draw_box(image_path: str, box, out_path: str, thickness: int = 2) -> None:
    """Burn a white box outline into a copy of the image."""
    from PIL import Image

    arr = np.asarray(Image.open(image_path).convert("L")).copy()
    h, w = arr.shape
    x1, y1, x2, y2 = (int(round(v)) for v in box)
    x1, x2 = max(0, min(x1, w - 1)), max(0, min(x2, w - 1))
    y1, y2 = max(0, min(y1, h - 1)), max(0, min(y2, h - 1))
    t = thickness
    arr[y1 : y1 + t, x1 : x2 + 1] = 255
    arr[max(0, y2 - t + 1) : y2 + 1, x1 : x2 + 1] = 255
    arr[y1 : y2 + 1, x1 : x1 + t] = 255
    arr[y1 : y2 + 1, max(0, x2 - t + 1) : x2 + 1] = 255
    Image.fromarray(arr, mode="L").save(out_path)


def cmd_serve(args) -> int:
    from medground.service import serve

    serve(args.registry, bind=args.bind)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medground")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic grounding corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=160)
    p.add_argument("--findings-per-image", type=int, default=1)
    p.add_argument("--finding-fraction", type=float, default=1.0)
    p.add_argument("--paraphrase-rate", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="anatomical grounding pre-training")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--checkpoint", default=None, help="general checkpoint to start from")
    p.add_argument("--model-config", default=None)
    p.add_argument("--no-synonyms", action="store_true")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="phrase grounding fine-tuning")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.7, 0.1, 0.2))
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--model-id", default="model")
    p.add_argument("--partition", choices=("all", "train", "val", "test"), default="all")
    p.add_argument("--ratios", type=float, nargs=3, default=(0.7, 0.1, 0.2))
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--layout", choices=("table1", "table2"), default="table1")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="ablation deltas with significance")
    p.add_argument("--report-with", required=True)
    p.add_argument("--report-without", required=True)
    p.add_argument("--dump-with", default=None)
    p.add_argument("--dump-without", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ground", help="ground one phrase in one image")
    p.add_argument("--image", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--draw", default=None, help="write an annotated copy here")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("serve", help="run the inference service")
    p.add_argument("--registry", required=True, help="directory of *.ckpt files")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
