"""The assembled two-stream network and batch preparation."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .. import models, synthdata
from ..losses import FeatureExtractor
from ..nn_core import ShapeError, load_module_state, module_state
from ..warp import TextureAtlas, warp_from_uv, warp_to_uv


def conditioning_planes(mode, n_parts, n_keypoints=18):
    if mode.startswith("cross:"):
        _, src, tgt = mode.split(":")
        return synthdata.cross_plane_count(src, tgt, n_keypoints)
    return synthdata.plane_count(mode, n_parts, n_keypoints)


def encode_planes(sample, mode, sigma=2.0):
    if mode.startswith("cross:"):
        _, src, tgt = mode.split(":")
        return synthdata.encode_cross(sample, src, tgt, sigma)
    return synthdata.encode_conditioning(sample, mode, sigma)


def _dtype(name):
    return torch.float64 if name == "float64" else torch.float32


@dataclass
class Batch:
    samples: list
    cond: torch.Tensor  # (B, C, H, W) predictive input
    source: torch.Tensor  # (B, 3, H, W)
    target: torch.Tensor
    target_iuv: torch.Tensor  # (B, 3, H, W) part/N, u, v
    z: torch.Tensor  # (B, 6, H, W) discriminator conditioning

    def __len__(self):
        return len(self.samples)


def _chw(img, dtype):
    return torch.as_tensor(np.transpose(img, (2, 0, 1)).copy(), dtype=dtype)


class PoseTransfer(nn.Module):
    """Predictive stream, warping stream (with inpainting), blending, discriminator.

    Correspondences enter only as constant tensors built from numpy arrays;
    they never require gradients.
    """

    def __init__(self, config):
        super().__init__()
        self.config = config
        n, res = config.n_parts, config.atlas_res
        self.planes = conditioning_planes(config.conditioning, n, config.n_keypoints)
        self.predictive = models.PredictiveNet(self.planes, config.scale)
        self.inpainting = models.InpaintingNet(n, res, config.scale)
        self.blending = models.BlendingNet(config.scale, with_mask=True)
        self.discriminator = models.PatchDiscriminator(6, 3, config.scale, norm=config.disc_norm)
        self.to(_dtype(config.dtype))
        self._atlas_cache = {}

    @property
    def dtype(self):
        return _dtype(self.config.dtype)

    def manifest(self, **extra):
        c = self.config
        return models.manifest(
            c.conditioning, c.n_parts, c.scale, self.planes, (c.canvas, c.canvas), c.atlas_res,
            n_keypoints=c.n_keypoints, **extra,
        )

    def check_manifest(self, manifest):
        mine = self.manifest()
        keys = ("conditioning_mode", "n_parts", "scale", "predictive_planes", "atlas_res", "canvas")
        bad = [k for k in keys if k in manifest and manifest[k] != mine[k]]
        if bad:
            detail = ", ".join(f"{k}: checkpoint {manifest[k]!r} vs config {mine[k]!r}" for k in bad)
            raise ShapeError(f"checkpoint manifest mismatch ({detail})")

    def state(self):
        return module_state(self)

    def load_streams(self, state, streams=("predictive", "inpainting", "blending", "discriminator")):
        for s in streams:
            load_module_state(getattr(self, s), state, prefix=f"{s}.")
        return self

    # -- inputs ----------------------------------------------------------

    def make_batch(self, samples):
        c, dt = self.config, self.dtype
        h, w = samples[0].target.iuv.shape
        if (h, w) != (c.canvas, c.canvas):
            raise ShapeError(f"sample canvas {h}x{w} does not match configured {c.canvas}x{c.canvas}")
        cond = torch.stack([torch.as_tensor(encode_planes(s, c.conditioning, c.heatmap_sigma), dtype=dt) for s in samples])
        source = torch.stack([_chw(s.source.image, dt) for s in samples])
        target = torch.stack([_chw(s.target.image, dt) for s in samples])
        tiuv = torch.stack([torch.as_tensor(s.target.iuv.planes(c.n_parts), dtype=dt) for s in samples])
        return Batch(list(samples), cond, source, target, tiuv, torch.cat([source, tiuv], dim=1))

    def source_atlas(self, view, key=None):
        """UV atlas of a view's image; cached by ``key`` since correspondences are fixed."""
        if key is not None and key in self._atlas_cache:
            return self._atlas_cache[key]
        with torch.no_grad():
            atlas = warp_to_uv(torch.as_tensor(view.image, dtype=torch.float64), view.iuv, self.config.atlas_res, self.config.n_parts)
        atlas = TextureAtlas(atlas.values.to(self.dtype), atlas.weight.to(self.dtype))
        if key is not None:
            self._atlas_cache[key] = atlas
        return atlas

    def batch_atlases(self, samples):
        return [self.source_atlas(s.source, (s.item_id, s.source_index, id(s.source))) for s in samples]

    # -- streams ---------------------------------------------------------

    def inpaint(self, atlases):
        values = torch.stack([a.values for a in atlases])
        filled = self.inpainting(values)
        if self.config.keep_observed:
            vis = torch.stack([a.visibility for a in atlases]).unsqueeze(-1)
            filled = torch.where(vis, values, filled)
        return filled

    def warp_stream(self, batch, inpaint=True):
        """Warped target-pose images (B, 3, H, W), validity masks (B, 1, H, W), inpainted charts."""
        atlases = self.batch_atlases(batch.samples)
        filled = self.inpaint(atlases) if inpaint else None
        images, masks = [], []
        for b, s in enumerate(batch.samples):
            if inpaint:
                img, m = warp_from_uv(TextureAtlas(filled[b], atlases[b].weight), s.target.iuv, mask_visibility=False)
            else:
                img, m = warp_from_uv(atlases[b], s.target.iuv, mask_visibility=True)
            images.append(img.permute(2, 0, 1))
            masks.append(m)
        warped = torch.stack(images).to(self.dtype)
        mask = torch.stack(masks).unsqueeze(1).to(self.dtype)
        return warped, mask, filled

    def forward(self, batch, blocks=None):
        blocks = blocks or self.config.blocks
        pred = self.predictive(batch.cond)
        out = {"predictive": pred}
        if blocks == "predictive":
            out["final"] = pred
            return out
        if blocks == "predictive+blending":
            warped = torch.zeros_like(pred)
            mask = torch.zeros_like(pred[:, :1])
        else:
            warped, mask, filled = self.warp_stream(batch, inpaint=(blocks == "full"))
            out["inpainted"] = filled
        out["warped"] = warped
        out["mask"] = mask
        out["final"] = self.blending(pred, warped, batch.target_iuv, mask)
        return out

    def extractor(self):
        return default_extractor(self.dtype)


_EXTRACTORS = {}


def default_extractor(dtype=torch.float32):
    # kept outside the module tree so it never lands in checkpoints
    if dtype not in _EXTRACTORS:
        _EXTRACTORS[dtype] = FeatureExtractor().to(dtype)
    return _EXTRACTORS[dtype]
