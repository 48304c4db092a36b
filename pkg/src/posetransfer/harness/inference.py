"""Checkpoint loading and single-pair inference."""

import numpy as np
import torch

from .. import nn_core
from ..nn_core import ShapeError
from ..synthdata import PairedSample, View
from .config import from_mapping
from .pipeline import PoseTransfer


def load_model(checkpoint):
    """Rebuild a :class:`PoseTransfer` from a checkpoint written by training."""
    state, manifest = nn_core.load_checkpoint(checkpoint)
    if "config" not in manifest:
        raise ShapeError(f"{checkpoint}: manifest lacks a training config")
    config = from_mapping({k: str(v) for k, v in manifest["config"].items()})
    model = PoseTransfer(config)
    model.check_manifest(manifest)
    model.load_streams(state)
    model.eval()
    return model


def _needs_keypoints(mode):
    return mode == "keypoints" or "keypoints" in mode.split(":")[1:]


def infer(checkpoint, source_image, source_iuv, target_iuv, source_keypoints=None, target_keypoints=None):
    """Transfer the source appearance to the target pose.

    Returns a dict of (H, W, 3) arrays: ``blended`` (final output),
    ``predictive``, ``warped`` (raw atlas warp, holes at 0) and
    ``inpainted_warped``, plus the boolean ``warp_mask`` of the raw warp.
    """
    model = checkpoint if isinstance(checkpoint, PoseTransfer) else load_model(checkpoint)
    cfg = model.config
    for name, shape in (("source image", np.shape(source_image)[:2]), ("source IUV", source_iuv.shape), ("target IUV", target_iuv.shape)):
        if tuple(shape) != (cfg.canvas, cfg.canvas):
            raise ShapeError(f"{name} is {shape}, checkpoint expects {cfg.canvas}x{cfg.canvas}")
    for iuv in (source_iuv, target_iuv):
        iuv.validate(cfg.n_parts)
    if _needs_keypoints(cfg.conditioning) and target_keypoints is None:
        raise ShapeError(f"conditioning {cfg.conditioning!r} needs keypoints")
    kp0 = np.zeros((cfg.n_keypoints, 2))
    src = View(None, 0.0, np.asarray(source_image, dtype=np.float64), source_iuv, kp0 if source_keypoints is None else source_keypoints)
    tgt = View(None, 0.0, np.zeros_like(src.image), target_iuv, kp0 if target_keypoints is None else target_keypoints)
    sample = PairedSample(src, tgt, item_id=-1, source_index=0, target_index=1, neighbors=[], n_parts=cfg.n_parts)
    with torch.no_grad():
        batch = model.make_batch([sample])
        out = model(batch, blocks="full")
        final = out["final"] if cfg.blocks == "full" else model(batch)["final"]
        raw, raw_mask, _ = model.warp_stream(batch, inpaint=False)
    to_hwc = lambda t: t[0].permute(1, 2, 0).double().numpy()
    return {
        "blended": to_hwc(final),
        "predictive": to_hwc(out["predictive"]),
        "warped": to_hwc(raw),
        "inpainted_warped": to_hwc(out["warped"]),
        "warp_mask": raw_mask[0, 0].numpy().astype(bool),
    }
