"""Finite-difference gradient checks over every layer, loss, warp and network."""

import time

import numpy as np
import torch

from . import losses, models, nn_core, synthdata, warp

SMOOTH_TOL = 1e-5
NETWORK_TOL = 1e-3


def _toy_views(canvas=16, n_parts=3, seed=0):
    rng = np.random.default_rng(seed)
    spec = synthdata.make_spec(rng, canvas=(canvas, canvas), n_parts=n_parts, texture_res=8, n_keypoints=3 * n_parts)
    a = synthdata.render_figure(spec, synthdata.random_pose(rng, spec), 0.0)
    b = synthdata.render_figure(spec, synthdata.random_pose(rng, spec), 0.3)
    return spec, a, b


def _layer_checks():
    yield "conv2d stride 1", SMOOTH_TOL, lambda: nn_core.grad_check(
        lambda x, w, b: nn_core.conv2d(x, w, b, 1), [(1, 2, 4, 4), (3, 2, 3, 3), (3,)], SMOOTH_TOL
    )
    yield "conv2d stride 2", SMOOTH_TOL, lambda: nn_core.grad_check(
        lambda x, w, b: nn_core.conv2d(x, w, b, 2), [(2, 2, 5, 5), (3, 2, 3, 3), (3,)], SMOOTH_TOL
    )
    yield "deconv2d stride 2", SMOOTH_TOL, lambda: nn_core.grad_check(
        lambda x, w, b: nn_core.deconv2d(x, w, b, 2), [(1, 2, 3, 3), (2, 3, 3, 3), (3,)], SMOOTH_TOL
    )
    yield "instance_norm", SMOOTH_TOL, lambda: nn_core.grad_check(
        nn_core.instance_norm, [(2, 3, 4, 4), (3,), (3,)], SMOOTH_TOL
    )
    yield "relu (away from kink)", SMOOTH_TOL, lambda: nn_core.grad_check(
        nn_core.relu, [(2, 3, 4, 4)], SMOOTH_TOL, kink_margin=1e-2
    )
    yield "tanh", SMOOTH_TOL, lambda: nn_core.grad_check(nn_core.tanh, [(2, 3, 4, 4)], SMOOTH_TOL)
    yield "linear", SMOOTH_TOL, lambda: nn_core.grad_check(nn_core.linear, [(3, 5), (4, 5), (4,)], SMOOTH_TOL)
    yield "conv-norm-relu stack", SMOOTH_TOL, lambda: nn_core.grad_check(
        nn_core.Conv(2, 3, 1), [(2, 2, 4, 4)], SMOOTH_TOL
    )
    yield "residual_block (8 channels)", SMOOTH_TOL, lambda: nn_core.grad_check(
        nn_core.ResidualBlock(8), [(1, 8, 4, 4)], SMOOTH_TOL, max_coords=64
    )


def _warp_checks():
    spec, (img_a, iuv_a, _), (img_b, iuv_b, _) = _toy_views()
    n = spec.n_parts

    def to_uv(image):
        return warp.warp_to_uv(image, iuv_a, 6, n).values

    def from_uv(values):
        atlas = warp.TextureAtlas(values, torch.ones(values.shape[:3], dtype=values.dtype))
        return warp.warp_from_uv(atlas, iuv_b, mask_visibility=True)[0]

    yield "warp_to_uv (w.r.t. image)", SMOOTH_TOL, lambda: nn_core.grad_check(
        to_uv, inputs=[torch.as_tensor(img_a)], tolerance=SMOOTH_TOL
    )
    yield "warp_from_uv (w.r.t. atlas)", SMOOTH_TOL, lambda: nn_core.grad_check(
        from_uv, [(n, 6, 6, 3)], SMOOTH_TOL
    )


def _loss_checks():
    y = torch.randn(2, 3, 16, 16, generator=torch.Generator().manual_seed(5), dtype=torch.float64)
    ext = losses.FeatureExtractor(channels=(4, 4, 4, 4, 4)).double()
    disc = models.PatchDiscriminator(6, 3, scale=1 / 16).double()
    z = torch.randn(2, 6, 16, 16, generator=torch.Generator().manual_seed(6), dtype=torch.float64)
    vis = torch.rand(3, 4, 4, generator=torch.Generator().manual_seed(7)) > 0.4
    tgt = torch.randn(3, 4, 4, 3, generator=torch.Generator().manual_seed(8), dtype=torch.float64)

    yield "l1 (away from kink)", SMOOTH_TOL, lambda: nn_core.grad_check(
        lambda yh: losses.l1(yh, y), inputs=[y + 0.5 + torch.rand_like(y)], tolerance=SMOOTH_TOL
    )
    yield "masked_multiview_l1", SMOOTH_TOL, lambda: nn_core.grad_check(
        lambda p: losses.masked_multiview_l1(p, [tgt, tgt * 0.5], [vis, ~vis]),
        inputs=[tgt + 0.3 + torch.rand_like(tgt)],
        tolerance=SMOOTH_TOL,
    )
    yield "perceptual", NETWORK_TOL, lambda: nn_core.grad_check(
        lambda yh: losses.perceptual(yh, y, ext), [(2, 3, 16, 16)], NETWORK_TOL, max_coords=200
    )
    yield "gram", SMOOTH_TOL, lambda: nn_core.grad_check(losses.gram, [(2, 3, 4, 4)], SMOOTH_TOL)
    yield "style", NETWORK_TOL, lambda: nn_core.grad_check(
        lambda yh: losses.style(yh, y, ext), [(2, 3, 16, 16)], NETWORK_TOL, max_coords=200
    )
    yield "lsgan (scores)", SMOOTH_TOL, lambda: nn_core.grad_check(
        lambda r, f: losses.lsgan_from_scores(r, f), [(2, 1, 3, 3), (2, 1, 3, 3)], SMOOTH_TOL
    )
    yield "composite (all terms)", NETWORK_TOL, lambda: nn_core.grad_check(
        lambda yh: losses.composite(yh, y, losses.LossWeights(), ext, disc, z)[0],
        inputs=[y + 0.5 + torch.rand_like(y)],
        params=[],
        tolerance=NETWORK_TOL,
        max_coords=200,
    )


def _network_checks():
    s = 1 / 16
    # the inpainting encoder halves four times; 32 keeps its deepest norm off a 1x1 map
    yield "PredictiveNet", NETWORK_TOL, lambda: nn_core.grad_check(
        models.PredictiveNet(9, s), [(1, 9, 8, 8)], NETWORK_TOL, max_coords=24
    )
    yield "InpaintingNet", NETWORK_TOL, lambda: nn_core.grad_check(
        models.InpaintingNet(2, 32, s), [(1, 2, 32, 32, 3)], NETWORK_TOL, max_coords=24
    )

    def blend_net():
        net = models.BlendingNet(s)
        torch.nn.init.normal_(net.out.weight, 0, 0.2)  # generic residual head
        return net

    yield "BlendingNet", NETWORK_TOL, lambda: nn_core.grad_check(
        blend_net(), [(1, 3, 8, 8), (1, 3, 8, 8), (1, 3, 8, 8), (1, 1, 8, 8)], NETWORK_TOL, max_coords=24,
        wrt_inputs=[0, 1],
    )
    yield "PatchDiscriminator", NETWORK_TOL, lambda: nn_core.grad_check(
        models.PatchDiscriminator(6, 3, s), [(1, 6, 32, 32), (1, 3, 32, 32)], NETWORK_TOL, max_coords=24
    )


def all_checks(networks=True):
    groups = [_layer_checks(), _warp_checks(), _loss_checks()]
    if networks:
        groups.append(_network_checks())
    for g in groups:
        yield from g


def run(networks=True, verbose=False):
    """Run every check; returns ``[(name, tolerance, report, seconds)]``."""
    torch.manual_seed(0)
    results = []
    for name, tol, fn in all_checks(networks):
        t0 = time.perf_counter()
        rep = fn()
        rep.tolerance = tol
        dt = time.perf_counter() - t0
        results.append((name, tol, rep, dt))
        if verbose:
            print(f"{name:34s} {rep} [{dt:.2f}s]")
    return results
