"""Predictive generator, UV inpainting autoencoder, blending refiner, patch discriminator.

All channel widths are the reference widths multiplied by ``scale``
(``scale=1`` gives the full-size networks; the desk default is 0.5).
"""

import torch
import torch.nn as nn

from .nn_core import Conv, FeatureNorm, ResidualBlock, ShapeError, init_weights
from .warp import TextureAtlas


def width(channels, scale):
    return max(1, int(round(channels * scale)))


def _check_planes(x, expected, name):
    if x.dim() != 4 or x.shape[1] != expected:
        got = x.shape[1] if x.dim() > 1 else None
        raise ShapeError(f"{name}: expected {expected} input planes, got {got}")


class PredictiveNet(nn.Module):
    """Encoder (3 convs) -> 6 residual blocks -> decoder (2 deconvs + conv, tanh)."""

    def __init__(self, in_planes=9, scale=1.0, n_res=6):
        super().__init__()
        c1, c2, c3 = width(64, scale), width(128, scale), width(256, scale)
        self.in_planes = in_planes
        self.encoder = nn.Sequential(Conv(in_planes, c1, 1), Conv(c1, c2, 2), Conv(c2, c3, 2))
        self.blocks = nn.Sequential(*[ResidualBlock(c3) for _ in range(n_res)])
        self.decoder = nn.Sequential(
            Conv(c3, c2, 2, transpose=True),
            Conv(c2, c1, 2, transpose=True),
            Conv(c1, 3, 1, norm=False, act="tanh"),
        )
        init_weights(self)

    def encode(self, x):
        _check_planes(x, self.in_planes, "predictive")
        return self.encoder(x)

    def forward(self, x, return_features=False):
        feats = self.encode(x)
        out = self.decoder(self.blocks(feats))
        return (out, feats) if return_features else out


class InpaintingNet(nn.Module):
    """Per-part conv autoencoders sharing a global context vector.

    Each part chart (3 x R x R) is encoded by its own 4-layer stride-2 encoder
    to ``E_i`` (128 channels at R/16). All ``E_i`` are flattened, concatenated
    and projected to a 256-vector, passed through ReLU and feature
    normalisation and a second linear layer to give ``G``. Part decoder ``i``
    receives ``E_i`` concatenated channel-wise with ``G`` tiled over the
    ``E_i`` grid, and upsamples back to a tanh-ranged chart.
    """

    def __init__(self, n_parts=24, res=256, scale=1.0):
        super().__init__()
        if res % 16:
            raise ShapeError(f"inpainting: chart resolution {res} must be divisible by 16")
        e = [width(c, scale) for c in (32, 32, 64, 128)]
        d = [width(c, scale) for c in (64, 32, 32)]
        ctx = width(256, scale)
        self.n_parts, self.res, self.ctx_dim, self.enc_dim = n_parts, res, ctx, e[3]
        self.grid = res // 16
        self.encoders = nn.ModuleList(
            nn.Sequential(Conv(3, e[0], 2), Conv(e[0], e[1], 2), Conv(e[1], e[2], 2), Conv(e[2], e[3], 2))
            for _ in range(n_parts)
        )
        self.context_in = n_parts * e[3] * self.grid * self.grid
        self.context = nn.Sequential(
            nn.Linear(self.context_in, ctx), nn.ReLU(), FeatureNorm(ctx), nn.Linear(ctx, ctx)
        )
        self.decoders = nn.ModuleList(
            nn.Sequential(
                Conv(e[3] + ctx, d[0], 2, transpose=True),
                Conv(d[0], d[1], 2, transpose=True),
                Conv(d[1], d[2], 2, transpose=True),
                Conv(d[2], 3, 2, transpose=True, norm=False, act="tanh"),
            )
            for _ in range(n_parts)
        )
        init_weights(self)

    def forward(self, charts, return_context=False):
        """``charts``: (B, N, R, R, 3) atlas values; returns the same layout."""
        if charts.dim() != 5 or charts.shape[1] != self.n_parts:
            raise ShapeError(
                f"inpainting: expected (batch, {self.n_parts}, R, R, 3) charts, got {tuple(charts.shape)}"
            )
        if charts.shape[2] != self.res or charts.shape[3] != self.res:
            raise ShapeError(f"inpainting: chart resolution {charts.shape[2]} != configured {self.res}")
        b = charts.shape[0]
        x = charts.permute(0, 1, 4, 2, 3)
        enc = [self.encoders[i](x[:, i]) for i in range(self.n_parts)]
        flat = torch.cat([e.reshape(b, -1) for e in enc], dim=1)
        g = self.context(flat)
        tiled = g[:, :, None, None].expand(b, self.ctx_dim, self.grid, self.grid)
        dec = [self.decoders[i](torch.cat([enc[i], tiled], dim=1)) for i in range(self.n_parts)]
        out = torch.stack(dec, dim=1).permute(0, 1, 3, 4, 2)
        if return_context:
            return out, enc, g
        return out


def inpaint_forward(net, atlas):
    """Fill every texel of a single atlas; visibility passes through for loss masking."""
    if atlas.n_parts != net.n_parts:
        raise ShapeError(f"inpainting: atlas has {atlas.n_parts} charts, network expects {net.n_parts}")
    values = net(atlas.values.unsqueeze(0).to(next(net.parameters()).dtype))[0]
    return TextureAtlas(values, atlas.weight)


class BlendingNet(nn.Module):
    """conv -> 3 residual blocks -> conv producing a residual on the predictive output.

    Input planes: predictive output (3), warped image (3), target IUV (3) and,
    when ``with_mask``, the warp validity mask (1).
    """

    def __init__(self, scale=1.0, with_mask=True, n_res=3):
        super().__init__()
        c = width(64, scale)
        self.in_planes = 10 if with_mask else 9
        self.with_mask = with_mask
        self.head = Conv(self.in_planes, c, 1)
        self.blocks = nn.Sequential(*[ResidualBlock(c) for _ in range(n_res)])
        self.out = nn.Conv2d(c, 3, 3, 1, 1)
        init_weights(self)
        self.zero_residual_()

    def zero_residual_(self):
        with torch.no_grad():
            self.out.weight.zero_()
            self.out.bias.zero_()
        return self

    def residual(self, planes):
        _check_planes(planes, self.in_planes, "blending")
        return self.out(self.blocks(self.head(planes)))

    def forward(self, predicted, warped, target_iuv, mask=None, clamp=True):
        if predicted.shape != warped.shape or predicted.shape[2:] != target_iuv.shape[2:]:
            raise ShapeError(
                f"blending: spatial/shape mismatch {tuple(predicted.shape)}, {tuple(warped.shape)}, "
                f"{tuple(target_iuv.shape)}"
            )
        parts = [predicted, warped, target_iuv]
        if self.with_mask:
            if mask is None:
                raise ShapeError("blending: network configured with a mask plane but none given")
            parts.append(mask.to(predicted.dtype).reshape(predicted.shape[0], 1, *predicted.shape[2:]))
        out = predicted + self.residual(torch.cat(parts, dim=1))
        return out.clamp(-1.0, 1.0) if clamp else out


class PatchDiscriminator(nn.Module):
    """Four stride-2 4x4 convs (64..512) and a 1-channel 3x3 score head.

    Leaky ReLU (0.2) throughout; instance norm on all but the first layer
    unless ``norm=False``. Output is a raw score map, one score per patch.
    """

    def __init__(self, cond_planes=6, image_planes=3, scale=1.0, norm=True):
        super().__init__()
        chans = [width(c, scale) for c in (64, 128, 256, 512)]
        self.cond_planes, self.image_planes = cond_planes, image_planes
        layers, c_in = [], cond_planes + image_planes
        for i, c in enumerate(chans):
            layers.append(Conv(c_in, c, 2, kernel=4, padding=1, norm=norm and i > 0, act="lrelu"))
            c_in = c
        self.features = nn.Sequential(*layers)
        self.head = nn.Conv2d(c_in, 1, 3, 1, 1)
        init_weights(self)

    def forward(self, z, candidate):
        _check_planes(z, self.cond_planes, "discriminator conditioning")
        _check_planes(candidate, self.image_planes, "discriminator candidate")
        return self.head(self.features(torch.cat([z, candidate], dim=1)))


def discriminator_forward(net, z, candidate):
    return net(z, candidate)


def manifest(mode, n_parts, scale, plane_count, canvas, atlas_res, **extra):
    """Self-description stored alongside checkpoints."""
    m = {
        "conditioning_mode": mode,
        "n_parts": int(n_parts),
        "scale": float(scale),
        "predictive_planes": int(plane_count),
        "blending_planes": 10,
        "discriminator_planes": 9,
        "canvas": [int(canvas[0]), int(canvas[1])],
        "atlas_res": int(atlas_res),
    }
    m.update(extra)
    return m
