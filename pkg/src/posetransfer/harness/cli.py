"""Command-line entry point: ``posetransfer <command> ...``.

Exit codes: 0 on success, 1 when inputs or configuration fail validation,
2 for any other runtime failure. Relative output paths resolve against
``$POSETRANSFER_OUTPUT_ROOT`` (default: the working directory).
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .. import gradsuite, metrics, synthdata
from ..nn_core import ShapeError
from .ablation import MATRICES, ablate, ablation_matrix, predict_images
from .config import ConfigError, load_config
from .inference import infer, load_model
from .training import train_inpainting, train_joint, train_predictive

OUTPUT_ROOT_ENV = "POSETRANSFER_OUTPUT_ROOT"
VALIDATION_ERRORS = (ConfigError, ShapeError, synthdata.SpecError, ValueError, FileNotFoundError)

log = logging.getLogger("posetransfer")


def output_path(path):
    if os.path.isabs(path):
        return path
    return os.path.join(os.environ.get(OUTPUT_ROOT_ENV, "."), path)


def _config(args):
    return load_config(args.config, args.set or ())


def _dataset(args, cfg):
    if args.data:
        return synthdata.load_dataset(output_path(args.data))
    return _generate(cfg)


def _generate(cfg):
    template = synthdata.make_spec(
        canvas=(cfg.canvas, cfg.canvas), n_parts=cfg.n_parts, texture_res=cfg.texture_res, n_keypoints=cfg.n_keypoints
    )
    return synthdata.generate_dataset(cfg.data_seed, cfg.n_items, cfg.views_per_item, template)


def _check_data(ds, cfg):
    if ds.n_parts != cfg.n_parts or ds.canvas != (cfg.canvas, cfg.canvas):
        raise ConfigError(
            f"dataset has {ds.n_parts} parts on a {ds.canvas} canvas; "
            f"config expects {cfg.n_parts} parts on {cfg.canvas}x{cfg.canvas}"
        )


def _split(ds, cfg):
    n_test = min(cfg.n_test_items, len(ds.items) - 1)
    return ds.split(n_test)


# -- commands ---------------------------------------------------------------


def cmd_generate_data(args):
    cfg = _config(args)
    ds = _generate(cfg)
    out = output_path(args.out)
    synthdata.save_dataset(ds, out)
    print(f"wrote {len(ds.items)} items x {cfg.views_per_item} views ({len(ds)} pairs) to {out}")


def cmd_train(args):
    cfg = _config(args)
    if args.stage:
        cfg = cfg.replace(stage=args.stage).validate()
    ds = _dataset(args, cfg)
    _check_data(ds, cfg)
    train, _ = _split(ds, cfg)
    out = output_path(args.out)
    t0 = time.perf_counter()
    if cfg.stage == "pretrain_predictive":
        res = train_predictive(cfg, train, out)
    elif cfg.stage == "pretrain_inpainting":
        res = train_inpainting(cfg, train, out)
    else:
        pred = output_path(args.predictive_ckpt) if args.predictive_ckpt else None
        inp = output_path(args.inpainting_ckpt) if args.inpainting_ckpt else None
        res = train_joint(cfg, pred, inp, train, out)
    steps = len(res.log)
    last = res.log[-1]["total"] if res.log else float("nan")
    print(f"{cfg.stage}: {steps} steps in {time.perf_counter() - t0:.1f}s, final loss {last:.5f}, checkpoint {res.checkpoint}")


def _load_pair(args):
    ds = synthdata.load_dataset(output_path(args.data))
    items = {it.item_id: it for it in ds.items}
    if args.item not in items:
        raise ValueError(f"item {args.item} not in dataset (have {sorted(items)})")
    views = items[args.item].views
    for k in (args.source, args.target):
        if not 0 <= k < len(views):
            raise ValueError(f"view index {k} out of range for {len(views)} views")
    return views[args.source], views[args.target]


def cmd_infer(args):
    model = load_model(output_path(args.checkpoint))
    src, tgt = _load_pair(args)
    res = infer(model, src.image, src.iuv, tgt.iuv, src.keypoints, tgt.keypoints)
    out = output_path(args.out)
    os.makedirs(out, exist_ok=True)
    for key in ("blended", "predictive", "warped", "inpainted_warped"):
        synthdata.write_png(os.path.join(out, f"{key}.png"), res[key])
    synthdata.write_png(os.path.join(out, "warp_mask.png"), res["warp_mask"].astype(np.float64)[..., None].repeat(3, -1) * 2 - 1)
    metrics.save_grid(
        os.path.join(out, "infer_grid.png"),
        [[src.image, tgt.image, res["predictive"], res["warped"], res["blended"]]],
        upscale=2,
    )
    print(f"ssim(blended, target) = {metrics.ssim(res['blended'], tgt.image):.4f}; images in {out}")


def cmd_evaluate(args):
    model = load_model(output_path(args.checkpoint))
    cfg = model.config
    ds = synthdata.load_dataset(output_path(args.data))
    _check_data(ds, cfg)
    _, test = _split(ds, cfg)
    samples = test.pairs(cross_only=True)
    if args.max_pairs:
        samples = samples[: args.max_pairs]
    out = output_path(args.out)
    os.makedirs(out, exist_ok=True)
    finals = predict_images(model, samples, "final")
    preds = predict_images(model, samples, "predictive", blocks="predictive")
    warped = predict_images(model, samples, "warped", blocks="full") if cfg.blocks != "predictive" else [
        np.zeros_like(p) for p in preds
    ]
    lookup = {id(s): f for s, f in zip(samples, finals)}
    report = metrics.evaluate(samples, lambda s: lookup[id(s)], label=args.label or os.path.basename(args.checkpoint))
    report.write(os.path.join(out, "metrics"))
    rows = [[s.source.image, s.target.image, p, w, f] for s, p, w, f in zip(samples, preds, warped, finals)]
    for i in range(0, len(rows), 8):
        metrics.save_grid(os.path.join(out, f"grid_{i // 8:02d}.png"), rows[i : i + 8], upscale=2)
    print(report.to_table())
    print(f"{len(samples)} pairs; columns of grids: input | target | predictive | warped | blended; outputs in {out}")


def cmd_ablate(args):
    cfg = _config(args)
    ds = _dataset(args, cfg)
    _check_data(ds, cfg)
    train, test = _split(ds, cfg)
    rows = ablation_matrix(args.table)
    out = output_path(args.out)
    report = ablate(cfg, rows, train, test, args.pretrain_steps, args.inpaint_steps, args.joint_steps, out)
    print(report.to_text())
    failed = [r for r in report.rows if r[2]]
    if failed:
        print(f"{len(failed)} row(s) failed; see the error column", file=sys.stderr)


def cmd_grad_check(args):
    t0 = time.perf_counter()
    results = gradsuite.run(networks=not args.skip_networks, verbose=True)
    n_bad = sum(not r[2].passed for r in results)
    print(f"{len(results) - n_bad}/{len(results)} passed in {time.perf_counter() - t0:.1f}s")
    if args.json:
        with open(output_path(args.json), "w", encoding="utf-8") as fh:
            json.dump([{"check": n, "tolerance": t, "max_rel_error": r.max_rel_error, "seconds": s} for n, t, r, s in results], fh, indent=1)
    return 1 if n_bad else 0


# -- parser -----------------------------------------------------------------


def _config_args(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="posetransfer", description="Two-stream human pose transfer on synthetic figures.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="render a synthetic dataset to disk")
    _config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="run one training stage")
    _config_args(p)
    p.add_argument("--stage", choices=("pretrain_predictive", "pretrain_inpainting", "joint"))
    p.add_argument("--data", help="dataset directory (default: generate from the config)")
    p.add_argument("--out", required=True)
    p.add_argument("--predictive-ckpt")
    p.add_argument("--inpainting-ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="transfer one view of an item to another pose")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--item", type=int, default=0)
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--target", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score a checkpoint on the held-out items")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label")
    p.add_argument("--max-pairs", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and score an ablation matrix")
    _config_args(p)
    p.add_argument("--table", default="all", choices=sorted(MATRICES) + ["all"])
    p.add_argument("--data")
    p.add_argument("--out", required=True)
    p.add_argument("--pretrain-steps", type=int, default=200)
    p.add_argument("--inpaint-steps", type=int, default=200)
    p.add_argument("--joint-steps", type=int, default=100)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("grad-check", help="finite-difference gradient suite")
    p.add_argument("--skip-networks", action="store_true")
    p.add_argument("--json", help="write per-check results here")
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
