"""Image <-> UV-atlas warps driven by dense correspondences.

``warp_to_uv`` splats every foreground pixel into its part chart with
bilinear weights and normalises by the accumulated weight (scattered
interpolation). ``warp_from_uv`` bilinearly samples the charts at the target
correspondences. Both are linear in their colour input and differentiable
with respect to it; correspondences are constants.

Texel ``(row, col)`` of chart ``i`` holds surface point ``(u, v) =
(col / (R - 1), row / (R - 1))`` of part ``i + 1``.
"""

from dataclasses import dataclass

import numpy as np
import torch

from . import nn_core
from .kernels import bilinear_taps, gather_weighted, scatter_weighted
from .synthdata import SpecError, write_png

VIS_EPS = 1e-6


@dataclass
class TextureAtlas:
    values: torch.Tensor  # (N, R, R, 3)
    weight: torch.Tensor  # (N, R, R)

    @property
    def visibility(self):
        return self.weight > VIS_EPS

    @property
    def n_parts(self):
        return self.values.shape[0]

    @property
    def resolution(self):
        return self.values.shape[1]

    def coverage(self):
        return float(self.visibility.double().mean())

    def detach(self):
        return TextureAtlas(self.values.detach(), self.weight)


def _as_tensor(x, dtype=None):
    if torch.is_tensor(x):
        return x if dtype is None else x.to(dtype)
    return torch.as_tensor(np.array(x, dtype=np.float64), dtype=dtype or torch.float64)


def _stencil(iuv, res, n_parts):
    iuv.validate(n_parts)
    part = np.asarray(iuv.part)
    fg = np.flatnonzero(part.ravel() > 0)
    chart = part.ravel()[fg] - 1
    rows, cols, w = bilinear_taps(iuv.u.ravel()[fg] * (res - 1), iuv.v.ravel()[fg] * (res - 1), res)
    idx = chart[:, None] * res * res + rows * res + cols
    return fg, idx, w


class _SplatNormalize(torch.autograd.Function):
    @staticmethod
    def forward(ctx, colors, idx, w, total):
        dtype = colors.dtype
        acc = scatter_weighted(total.shape[0], idx, w, colors.detach().cpu().numpy())
        tot = total.numpy()
        vis = tot > VIS_EPS
        inv = np.zeros_like(tot)
        inv[vis] = 1.0 / tot[vis]
        ctx.save_for_backward(torch.from_numpy(inv))
        ctx.idx, ctx.w = idx, w
        return torch.from_numpy(acc * inv[:, None]).to(dtype)

    @staticmethod
    def backward(ctx, grad):
        (inv,) = ctx.saved_tensors
        g = grad.detach().cpu().double().numpy() * inv.numpy()[:, None]
        out = gather_weighted(g, ctx.idx, ctx.w)
        return torch.from_numpy(out).to(grad.dtype), None, None, None


class _Sample(torch.autograd.Function):
    @staticmethod
    def forward(ctx, table, idx, w):
        ctx.idx, ctx.w, ctx.n = idx, w, table.shape[0]
        out = gather_weighted(table.detach().cpu().numpy(), idx, w)
        return torch.from_numpy(out).to(table.dtype)

    @staticmethod
    def backward(ctx, grad):
        out = scatter_weighted(ctx.n, ctx.idx, ctx.w, grad.detach().cpu().double().numpy())
        return torch.from_numpy(out).to(grad.dtype), None, None


def warp_to_uv(image, iuv, res, n_parts=None):
    """Splat an (H, W, 3) image into an N-chart atlas of resolution ``res``."""
    if res < 2:
        raise ValueError("atlas resolution must be >= 2")
    image = _as_tensor(image)
    h, w = iuv.shape
    if tuple(image.shape[:2]) != (h, w) or image.shape[-1] != 3:
        raise nn_core.ShapeError(f"image shape {tuple(image.shape)} does not match IUV map {iuv.shape}")
    if n_parts is None:
        n_parts = int(np.max(iuv.part))
    fg, idx, wts = _stencil(iuv, res, n_parts)
    n_rows = n_parts * res * res
    total = scatter_weighted(n_rows, idx, wts, np.ones(len(fg)))
    colors = image.reshape(h * w, 3)[torch.from_numpy(fg)]
    values = _SplatNormalize.apply(colors, idx, wts, torch.from_numpy(total))
    return TextureAtlas(
        values.reshape(n_parts, res, res, 3),
        torch.from_numpy(total).reshape(n_parts, res, res).to(image.dtype),
    )


def warp_from_uv(atlas, target_iuv, mask_visibility=True):
    """Sample the atlas at ``target_iuv``; return ``(image, mask)``.

    The mask is true on foreground pixels whose four stencil texels are all
    visible (or on every foreground pixel when ``mask_visibility`` is off,
    e.g. for an inpainted atlas). Pixels outside the mask are 0.
    """
    n, res = atlas.n_parts, atlas.resolution
    h, w = target_iuv.shape
    fg, idx, wts = _stencil(target_iuv, res, n)
    values = atlas.values
    table = values.reshape(n * res * res, 3)
    sampled = _Sample.apply(table, idx, wts)
    if mask_visibility:
        vis = atlas.visibility.reshape(-1).cpu().numpy()
        ok = vis[idx].all(axis=1)
    else:
        ok = np.ones(len(fg), dtype=bool)
    okt = torch.from_numpy(ok)
    sampled = sampled * okt.to(values.dtype)[:, None]
    out = torch.zeros(h * w, 3, dtype=values.dtype)
    out = out.index_copy(0, torch.from_numpy(fg), sampled)
    mask = np.zeros(h * w, dtype=bool)
    mask[fg[ok]] = True
    return out.reshape(h, w, 3), torch.from_numpy(mask.reshape(h, w))


def multi_view_targets(sample, res, n_parts=None):
    """UV-warped neighbour views of the sample's source: the inpainting targets."""
    if not sample.neighbors:
        raise ValueError("sample has no neighbour views for multi-view supervision")
    n = n_parts or sample.n_parts
    return [warp_to_uv(vw.image, vw.iuv, res, n) for vw in sample.neighbors]


def union_visibility(atlases):
    vis = atlases[0].visibility.clone()
    for a in atlases[1:]:
        vis |= a.visibility
    return vis


def save_atlas(path, atlas):
    return nn_core.save_checkpoint(
        path, {"values": atlas.values, "weight": atlas.weight}, {"kind": "texture_atlas", "vis_eps": VIS_EPS}
    )


def load_atlas(path):
    state, _ = nn_core.load_checkpoint(path)
    return TextureAtlas(torch.from_numpy(state["values"]).double(), torch.from_numpy(state["weight"]).double())


def atlas_mosaic(values, visibility=None, cols=None):
    """Tile (N, R, R, 3) charts into one uint8 image; invisible texels drawn black."""
    vals = values.detach().cpu().numpy() if torch.is_tensor(values) else np.asarray(values)
    n, res = vals.shape[:2]
    cols = cols or int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    img = np.clip(np.rint((vals + 1) * 127.5), 0, 255).astype(np.uint8)
    if visibility is not None:
        vis = visibility.cpu().numpy() if torch.is_tensor(visibility) else np.asarray(visibility)
        img[~vis] = 0
    out = np.full((rows * (res + 1) + 1, cols * (res + 1) + 1, 3), 255, dtype=np.uint8)
    for i in range(n):
        r, c = divmod(i, cols)
        out[1 + r * (res + 1) : 1 + r * (res + 1) + res, 1 + c * (res + 1) : 1 + c * (res + 1) + res] = img[i]
    return out


def save_atlas_mosaic(path, atlas, show_visibility=True):
    write_png(path, atlas_mosaic(atlas.values, atlas.visibility if show_visibility else None))
    return path
