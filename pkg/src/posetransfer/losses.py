"""Reconstruction, multi-view masked, perceptual, style and LSGAN objectives."""

import math
from dataclasses import astuple, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .nn_core import ShapeError


def _same_shape(a, b, name):
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def l1(yhat, y):
    """Mean absolute difference."""
    _same_shape(yhat, y, "l1")
    return (yhat - y).abs().mean()


def masked_multiview_l1(prediction, targets, visibilities=None):
    """Sum over views of the mean |prediction - target| on that view's visible texels.

    ``targets`` is a list of atlases (objects with ``values`` and
    ``visibility``) or of value tensors paired with ``visibilities``. A view
    with no visible texel contributes 0. Invisible texels are selected out
    with ``torch.where``, so their values cannot affect the result.
    """
    if len(targets) == 0:
        raise ValueError("masked_multiview_l1 needs at least one target view")
    if visibilities is None:
        visibilities = [t.visibility for t in targets]
        targets = [t.values for t in targets]
    total = prediction.new_zeros(())
    for tgt, vis in zip(targets, visibilities):
        _same_shape(prediction, tgt, "masked_multiview_l1")
        mask = vis.unsqueeze(-1).expand_as(prediction) if vis.dim() == prediction.dim() - 1 else vis
        count = int(mask.sum())
        if count == 0:
            continue
        diff = torch.where(mask, (prediction - tgt).abs(), torch.zeros((), dtype=prediction.dtype))
        total = total + diff.sum() / count
    return total


class FeatureExtractor(nn.Module):
    """Fixed five-stage conv pyramid; tap ``v`` is the ReLU output of stage ``v``.

    The default weights are seeded He-normal draws, never trained. Weights of
    a pretrained network can be dropped in with :meth:`load_weights` as long
    as the layer shapes match, or any callable returning a list of feature
    maps can be used wherever an extractor is expected.
    """

    def __init__(self, channels=(16, 32, 64, 64, 64), seed=1234):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.stages = nn.ModuleList()
        c_in = 3
        for i, c in enumerate(channels):
            conv = nn.Conv2d(c_in, c, 3, stride=1 if i == 0 else 2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * math.sqrt(2.0 / (c_in * 9)))
                conv.bias.zero_()
            self.stages.append(conv)
            c_in = c
        self.requires_grad_(False)

    def load_weights(self, state):
        self.load_state_dict({k: torch.as_tensor(v) for k, v in state.items()})
        self.requires_grad_(False)
        return self

    def forward(self, x):
        taps = []
        for conv in self.stages:
            x = F.relu(conv(x))
            taps.append(x)
        return taps


def _taps(extractor, x):
    out = extractor(x)
    return list(out) if isinstance(out, (list, tuple)) else [out]


def perceptual(yhat, y, extractor):
    """Sum over taps of the (unsquared) l2 norm of the feature difference, batch-averaged."""
    _same_shape(yhat, y, "perceptual")
    total = yhat.new_zeros(())
    for fy, fh in zip(_taps(extractor, y), _taps(extractor, yhat)):
        d = (fy - fh).flatten(1)
        total = total + _safe_norm(d).mean()
    return total


def _safe_norm(d):
    # subgradient 0 at d == 0 instead of NaN
    sq = (d * d).sum(dim=1)
    nz = sq > 0
    return torch.where(nz, torch.sqrt(torch.where(nz, sq, torch.ones_like(sq))), torch.zeros_like(sq))


def gram(features, normalize=True):
    """Channel Gram matrix ``sum_hw F_c F_c'``, optionally divided by C*H*W.

    Accepts (C, H, W) or (B, C, H, W); returns (C, C) or (B, C, C).
    """
    squeeze = features.dim() == 3
    f = features.unsqueeze(0) if squeeze else features
    b, c, h, w = f.shape
    flat = f.reshape(b, c, h * w)
    g = flat @ flat.transpose(1, 2)
    if normalize:
        g = g / (c * h * w)
    return g[0] if squeeze else g


def style(yhat, y, extractor, normalize=True):
    """Sum over taps of the Frobenius norm of the Gram difference, batch-averaged."""
    _same_shape(yhat, y, "style")
    total = yhat.new_zeros(())
    for fy, fh in zip(_taps(extractor, y), _taps(extractor, yhat)):
        d = (gram(fy, normalize) - gram(fh, normalize)).flatten(1)
        total = total + _safe_norm(d).mean()
    return total


def lsgan_from_scores(real_scores, fake_scores_for_d, fake_scores_for_g=None):
    if fake_scores_for_g is None:
        fake_scores_for_g = fake_scores_for_d
    d_loss = 0.5 * ((real_scores - 1) ** 2).mean() + 0.5 * (fake_scores_for_d**2).mean()
    g_loss = 0.5 * ((fake_scores_for_g - 1) ** 2).mean()
    return d_loss, g_loss


def lsgan_losses(discriminator, z, y_real, y_fake):
    """Least-squares GAN objectives ``(d_loss, g_loss)``.

    The discriminator term sees ``y_fake`` detached; the generator term keeps
    the graph so gradients reach the generator.
    """
    real = discriminator(z, y_real)
    fake_d = discriminator(z, y_fake.detach())
    fake_g = discriminator(z, y_fake)
    return lsgan_from_scores(real, fake_d, fake_g)


@dataclass(frozen=True)
class LossWeights:
    l1: float = 1.0
    perceptual: float = 0.5
    style: float = 5e5
    gan: float = 0.1

    def __post_init__(self):
        for v in astuple(self):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"loss weights must be finite and >= 0, got {astuple(self)}")

    def active(self):
        return {k: v for k, v in zip(("l1", "perceptual", "style", "gan"), astuple(self)) if v > 0}


PRESETS = {
    "best-structure": LossWeights(1.0, 0.0, 0.0, 0.0),
    "highest-realism": LossWeights(1.0, 0.0, 5e5, 0.0),
    "balanced": LossWeights(1.0, 0.5, 5e5, 0.1),
}


def composite(yhat, y, weights=PRESETS["balanced"], extractor=None, discriminator=None, z=None, normalize_gram=True):
    """Weighted generator objective; returns ``(total, {term: unweighted value})``.

    Terms with zero weight are not evaluated. The adversarial term is the
    LSGAN generator half, which needs ``discriminator`` and ``z``.
    """
    terms = {}
    active = weights.active()
    if "l1" in active:
        terms["l1"] = l1(yhat, y)
    if "perceptual" in active or "style" in active:
        if extractor is None:
            raise ValueError("perceptual/style terms need a feature extractor")
    if "perceptual" in active:
        terms["perceptual"] = perceptual(yhat, y, extractor)
    if "style" in active:
        terms["style"] = style(yhat, y, extractor, normalize_gram)
    if "gan" in active:
        if discriminator is None or z is None:
            raise ValueError("adversarial term needs a discriminator and conditioning z")
        terms["gan"] = 0.5 * ((discriminator(z, yhat) - 1) ** 2).mean()
    total = yhat.new_zeros(())
    for k, v in terms.items():
        total = total + active[k] * v
    return total, terms
