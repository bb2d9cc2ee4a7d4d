"""Command-line surface: gen, saliency, run, stage, eval.

`gen` materializes a synthetic dataset, `saliency` precomputes maps for
simple images, `run` executes the full three-stage pipeline, `stage` runs a
single stage for debugging, and `eval` scores a checkpoint. All commands
exit 0 on success and nonzero with a message on stderr otherwise.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import data, pipeline
from .imageio import write_saliency_pgm
from .network import NetworkConfig, init_network
from .params import load_params, save_params
from .pipeline import PipelineError, TrainConfig
from .saliency import compute_saliency

_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_RUN_KEYS = _TRAIN_KEYS | {
    "num_classes",
    "simple",
    "complex",
    "eval",
    "channels",
    "include_simple_in_powerful",
    "warm_start",
    "enhance_rounds",
    "data",
    "out",
}
_RUN_DEFAULTS = {
    "num_classes": 4,
    "simple": 200,
    "complex": 100,
    "eval": 50,
    "channels": [16, 32, 64],
    "include_simple_in_powerful": True,
    "warm_start": False,
    "enhance_rounds": 1,
    "data": None,
    "out": None,
}


def load_run_config(path) -> dict:
    """Single JSON document holding TrainConfig fields plus corpus sizes,
    class count and paths; unknown keys are rejected."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = sorted(set(doc) - _RUN_KEYS)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    merged = _default_run_config()
    merged.update(doc)
    return merged


def _default_run_config() -> dict:
    return {
        **{f.name: getattr(TrainConfig(), f.name) for f in dataclasses.fields(TrainConfig)},
        **_RUN_DEFAULTS,
    }


def _train_config_from(cfg: dict, seed_override: int | None) -> TrainConfig:
    kwargs = {k: cfg[k] for k in _TRAIN_KEYS}
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return TrainConfig(**kwargs)


def _resolve_path(flag_value, cfg: dict, key: str):
    value = flag_value or cfg.get(key)
    if value is None:
        raise ValueError(f"--{key} is required (on the command line or in the config file)")
    return value


def cmd_gen(args) -> int:
    if args.simple < 1:
        raise ValueError("--simple must be >= 1: the initial stage trains on simple images")
    if args.complex < 0 or args.eval < 0:
        raise ValueError("--complex and --eval must be >= 0")
    if args.size % 4:
        raise ValueError("--size must be divisible by 4 (network output stride)")
    examples = data.build_dataset(
        args.simple, args.complex, args.eval, args.classes, args.seed, args.size
    )
    data.write_dataset(examples, args.out)
    counts = {s: sum(1 for e in examples if e.split == s) for s in data.SPLITS}
    print(
        f"wrote {len(examples)} records to {args.out} "
        f"({counts['simple']} simple, {counts['complex']} complex, {counts['eval']} eval)"
    )
    return 0


def cmd_saliency(args) -> int:
    manifest = data.read_dataset(args.data)
    root = manifest.root
    (root / "saliency").mkdir(exist_ok=True)
    updated = []
    n = 0
    for rec in manifest.records:
        if rec.split == "simple":
            rel = f"saliency/{Path(rec.image).stem}.pgm"
            write_saliency_pgm(root / rel, compute_saliency(manifest.load_image(rec)))
            rec = dataclasses.replace(rec, saliency=rel)
            n += 1
        updated.append(rec)
    lines = []
    for rec in updated:
        entry = {"image": rec.image, "labels": sorted(rec.labels), "split": rec.split}
        if rec.saliency is not None:
            entry["saliency"] = rec.saliency
        if rec.gt_mask is not None:
            entry["gt_mask"] = rec.gt_mask
        lines.append(json.dumps(entry, separators=(",", ":")))
    (root / "manifest.jsonl").write_text("\n".join(lines) + "\n")
    print(f"wrote saliency maps for {n} simple images under {root / 'saliency'}")
    return 0


def _write_checkpoint(
    out: Path, stage: str, net, num_classes: int, channels, kernel_size: int, seed: int
) -> Path:
    path = out / f"checkpoint_{stage}.stcp"
    save_params(net, path)
    sidecar = {
        "num_classes": num_classes,
        "channels": list(channels),
        "kernel_size": kernel_size,
        "seed": seed,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def cmd_run(args) -> int:
    cfg = load_run_config(args.config) if args.config else _default_run_config()
    manifest = data.read_dataset(_resolve_path(args.data, cfg, "data"))
    out = Path(_resolve_path(args.out, cfg, "out"))
    out.mkdir(parents=True, exist_ok=True)
    config = _train_config_from(cfg, args.seed)
    channels = tuple(cfg["channels"])
    nets, reports = pipeline.run_stc(
        manifest.split("simple"),
        manifest.split("complex"),
        manifest.split("eval"),
        config,
        num_classes=cfg["num_classes"],
        channels=channels,
        include_simple_in_powerful=cfg["include_simple_in_powerful"],
        warm_start=cfg["warm_start"],
        enhance_rounds=cfg["enhance_rounds"],
        out_dir=out,
    )
    for stage in pipeline.STAGES:
        _write_checkpoint(out, stage, nets[stage], cfg["num_classes"], channels, 3, config.seed)
    pipeline.write_report_json(reports, out / "report.json", config.seed)
    pipeline.write_report_csv(reports, out / "report.csv")
    for r in reports:
        print(f"{r.stage}: miou {r.miou:.4f} ({r.seconds:.1f}s)")
    return 0


def cmd_stage(args) -> int:
    cfg = load_run_config(args.config) if args.config else _default_run_config()
    manifest = data.read_dataset(_resolve_path(args.data, cfg, "data"))
    out = Path(_resolve_path(args.out, cfg, "out"))
    out.mkdir(parents=True, exist_ok=True)
    config = _train_config_from(cfg, args.seed)
    num_classes = cfg["num_classes"]
    simple = manifest.split("simple")
    eval_m = manifest.split("eval")

    try:
        if args.stage == "initial":
            pairs = [(simple, r) for r in simple.records]
            maps = [pipeline._saliency_for(simple, r) for r in simple.records]
            net = init_network(
                NetworkConfig(num_classes, tuple(cfg["channels"]), seed=pipeline._derive_seed(config.seed, 1))
            )
            _, losses = pipeline.train_stage(
                net, pairs, pipeline.SUPERVISION_SALIENCY, maps,
                dataclasses.replace(config, seed=pipeline._derive_seed(config.seed, 11)),
                num_classes=num_classes,
            )
        else:
            if not args.params:
                raise ValueError(f"stage {args.stage!r} needs --params from the previous stage")
            prior = load_params(args.params)
            from .pseudolabel import relabel_complex, relabel_simple

            if args.stage == "enhanced":
                src = simple
                pairs = [(src, r) for r in src.records]
                masks = [
                    relabel_simple(prior, src.load_image(r), min(r.labels))
                    for r in src.records
                ]
                salt = (2, 12)
            else:
                src = manifest.split("complex")
                pairs = [(src, r) for r in src.records]
                masks = [
                    relabel_complex(prior, src.load_image(r), r.labels) for r in src.records
                ]
                salt = (3, 13)
            net = init_network(
                NetworkConfig(num_classes, tuple(cfg["channels"]), seed=pipeline._derive_seed(config.seed, salt[0]))
            )
            _, losses = pipeline.train_stage(
                net, pairs, pipeline.SUPERVISION_MASKS, masks,
                dataclasses.replace(config, seed=pipeline._derive_seed(config.seed, salt[1])),
                num_classes=num_classes,
            )
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError(args.stage, e) from e

    ckpt = _write_checkpoint(out, args.stage, net, num_classes, cfg["channels"], 3, config.seed)
    if eval_m.records:
        per_iou, miou = pipeline.evaluate(net, eval_m)
        print(f"{args.stage}: miou {miou:.4f}")
    print(f"wrote {ckpt}")
    return 0


def cmd_eval(args) -> int:
    net = load_params(args.checkpoint)
    manifest = data.read_dataset(args.data)
    eval_m = manifest.split("eval")
    if not eval_m.records:
        raise ValueError(f"no eval records in {args.data}")
    per_iou, miou = pipeline.evaluate(net, eval_m)
    print("class  iou")
    for k, v in enumerate(per_iou):
        print(f"{k:<6d} {v:.6f}")
    print(f"miou   {miou:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--simple", type=int, default=200)
    g.add_argument("--complex", type=int, default=100)
    g.add_argument("--eval", type=int, default=50)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=64)
    g.set_defaults(fn=cmd_gen)

    s = sub.add_parser("saliency", help="precompute saliency maps for simple images")
    s.add_argument("--data", required=True)
    s.set_defaults(fn=cmd_saliency)

    r = sub.add_parser("run", help="run the full three-stage pipeline")
    r.add_argument("--data", help="dataset directory (or `data` in the config)")
    r.add_argument("--out", help="output directory (or `out` in the config)")
    r.add_argument("--config")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.set_defaults(fn=cmd_run)

    st = sub.add_parser("stage", help="run a single stage")
    st.add_argument("--data")
    st.add_argument("--out")
    st.add_argument("--stage", required=True, choices=pipeline.STAGES)
    st.add_argument("--params", help="prior-stage checkpoint (enhanced/powerful)")
    st.add_argument("--config")
    st.add_argument("--seed", type=int, default=None)
    st.set_defaults(fn=cmd_stage)

    e = sub.add_parser("eval", help="evaluate a checkpoint on the eval split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.set_defaults(fn=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
