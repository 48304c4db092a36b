import numpy as np
import pytest
import torch

from posetransfer import models, nn_core, warp
from posetransfer.nn_core import ShapeError


def _meta(*shape):
    return torch.empty(*shape, device="meta")


def test_predictive_full_scale_contract():
    net = models.PredictiveNet(9, 1.0).to("meta")
    out, feats = net(_meta(1, 9, 256, 256), return_features=True)
    assert tuple(feats.shape) == (1, 256, 64, 64)
    assert tuple(out.shape) == (1, 3, 256, 256)
    assert len(net.blocks) == 6
    assert all(tuple(b.body[0].conv.weight.shape) == (256, 256, 3, 3) for b in net.blocks)


@pytest.mark.parametrize("scale, channels", [(1.0, 256), (0.5, 128)])
def test_predictive_desk_scale_contract(scale, channels):
    net = models.PredictiveNet(9, scale).to("meta")
    out, feats = net(_meta(2, 9, 64, 64), return_features=True)
    assert tuple(feats.shape) == (2, channels, 16, 16)
    assert tuple(out.shape) == (2, 3, 64, 64)


def test_predictive_output_range_and_planes():
    net = models.PredictiveNet(9, 0.25).double()
    x = torch.randn(2, 9, 32, 32, dtype=torch.float64) * 10
    y = net(x)
    assert y.abs().max() < 1
    with pytest.raises(ShapeError, match="planes"):
        net(torch.zeros(1, 4, 32, 32, dtype=torch.float64))


def test_inpainting_full_scale_contract():
    net = models.InpaintingNet(24, 256, 1.0).to("meta")
    out, enc, g = net(_meta(1, 24, 256, 256, 3), return_context=True)
    assert len(enc) == 24 and all(tuple(e.shape) == (1, 128, 16, 16) for e in enc)
    assert net.context_in == 24 * 128 * 16 * 16
    assert tuple(net.context[0].weight.shape) == (256, 24 * 128 * 16 * 16)
    assert tuple(g.shape) == (1, 256)
    assert net.decoders[0][0].conv.in_channels == 128 + 256
    assert tuple(out.shape) == (1, 24, 256, 256, 3)
    widths = [net.encoders[0][i].conv.out_channels for i in range(4)]
    assert widths == [32, 32, 64, 128]
    assert [net.decoders[0][i].conv.out_channels for i in range(4)] == [64, 32, 32, 3]


def test_inpainting_desk_scale_contract():
    net = models.InpaintingNet(8, 64, 0.5).to("meta")
    out, enc, g = net(_meta(2, 8, 64, 64, 3), return_context=True)
    assert tuple(enc[0].shape) == (2, 64, 4, 4)
    assert tuple(g.shape) == (2, 128)
    assert tuple(out.shape) == (2, 8, 64, 64, 3)


def test_inpainting_errors():
    net = models.InpaintingNet(3, 32, 0.125)
    with pytest.raises(ShapeError):
        net(torch.zeros(1, 2, 32, 32, 3))
    with pytest.raises(ShapeError):
        net(torch.zeros(1, 3, 16, 16, 3))
    with pytest.raises(ShapeError):
        models.InpaintingNet(3, 40)
    atlas = warp.TextureAtlas(torch.zeros(2, 32, 32, 3), torch.zeros(2, 32, 32))
    with pytest.raises(ShapeError):
        models.inpaint_forward(net, atlas)


def test_inpaint_forward_fills_every_texel():
    net = models.InpaintingNet(3, 32, 0.125)
    weight = torch.zeros(3, 32, 32)
    weight[0, :10] = 1
    atlas = warp.TextureAtlas(torch.rand(3, 32, 32, 3) * 2 - 1, weight)
    filled = models.inpaint_forward(net, atlas)
    assert filled.values.shape == atlas.values.shape
    assert filled.values.abs().max() < 1
    assert torch.equal(filled.visibility, atlas.visibility)


def test_invisible_chart_receives_context_gradient():
    torch.manual_seed(1)
    net = models.InpaintingNet(3, 32, 0.125).double()
    charts = torch.rand(1, 3, 32, 32, 3, dtype=torch.float64) * 2 - 1
    charts[:, 2] = 0  # part 3 never observed
    charts.requires_grad_(True)
    out = net(charts)
    out[:, 2].sum().backward()
    assert charts.grad[:, 0].abs().sum() > 0


def test_context_couples_parts():
    torch.manual_seed(2)
    net = models.InpaintingNet(3, 32, 0.125).double()
    charts = torch.rand(1, 3, 32, 32, 3, dtype=torch.float64) * 2 - 1
    base = net(charts)
    bumped = charts.clone()
    bumped[:, 1, 8:16, 8:16] += 1e-3
    delta = (net(bumped) - base)[:, 0].abs().max()
    assert delta > 1e-9


def test_blending_zero_residual_is_identity():
    net = models.BlendingNet(0.25).double()
    pred = torch.rand(2, 3, 16, 16, dtype=torch.float64) * 1.8 - 0.9
    warped = torch.rand_like(pred)
    iuv = torch.rand_like(pred)
    mask = torch.ones(2, 1, 16, 16, dtype=torch.float64)
    out = net(pred, warped, iuv, mask, clamp=False)
    assert torch.equal(out, pred)
    assert out.shape == pred.shape


def test_blending_gradients_reach_both_streams():
    net = models.BlendingNet(0.25).double()
    torch.nn.init.normal_(net.out.weight, 0, 0.1)
    pred = (torch.rand(1, 3, 16, 16, dtype=torch.float64) * 0.5).requires_grad_(True)
    warped = torch.rand(1, 3, 16, 16, dtype=torch.float64).requires_grad_(True)
    out = net(pred, warped, torch.rand(1, 3, 16, 16, dtype=torch.float64), torch.ones(1, 1, 16, 16, dtype=torch.float64))
    out.sum().backward()
    assert pred.grad.abs().sum() > 0 and warped.grad.abs().sum() > 0


def test_blending_range_and_shapes():
    net = models.BlendingNet(0.25)
    torch.nn.init.normal_(net.out.weight, 0, 1.0)
    x = torch.rand(1, 3, 8, 8)
    out = net(x, x, x, torch.ones(1, 1, 8, 8))
    assert out.abs().max() <= 1
    assert net.in_planes == 10 and models.BlendingNet(0.25, with_mask=False).in_planes == 9
    with pytest.raises(ShapeError):
        net(x, torch.rand(1, 3, 4, 4), x, torch.ones(1, 1, 8, 8))
    with pytest.raises(ShapeError):
        net(x, x, x)


def test_discriminator_shapes():
    net = models.PatchDiscriminator(6, 3, 1.0).to("meta")
    feats = net.features(_meta(1, 9, 64, 64))
    assert tuple(feats.shape) == (1, 512, 4, 4)
    assert tuple(net(_meta(1, 6, 64, 64), _meta(1, 3, 64, 64)).shape) == (1, 1, 4, 4)
    assert [l.conv.out_channels for l in net.features] == [64, 128, 256, 512]
    with pytest.raises(ShapeError):
        models.PatchDiscriminator(6, 3, 0.25)(torch.zeros(1, 5, 64, 64), torch.zeros(1, 3, 64, 64))


def test_discriminator_batch_permutation():
    net = models.PatchDiscriminator(6, 3, 0.125).double()
    z = torch.randn(4, 6, 32, 32, dtype=torch.float64)
    y = torch.randn(4, 3, 32, 32, dtype=torch.float64)
    perm = torch.tensor([2, 0, 3, 1])
    assert torch.allclose(net(z, y)[perm], net(z[perm], y[perm]), rtol=0, atol=1e-14)


def test_discriminator_receptive_field_locality():
    # without instance norm every score sees only its receptive field:
    # output index o covers input [16 o - 31, 16 o + 46]
    net = models.PatchDiscriminator(6, 3, 0.0625, norm=False).double()
    z = torch.randn(1, 6, 256, 256, dtype=torch.float64)
    y = torch.randn(1, 3, 256, 256, dtype=torch.float64)
    y2 = y.clone()
    y2[..., :4, :4] += 0.5
    diff = (net(z, y2) - net(z, y)).abs()[0, 0]
    assert diff.shape == (16, 16)
    changed = diff > 0
    assert changed[:3, :3].any()
    assert not changed[3:, :].any() and not changed[:, 3:].any()


def test_manifest_contents():
    m = models.manifest("iuv", 8, 0.5, 9, (64, 64), 64, stage="joint")
    assert m["conditioning_mode"] == "iuv" and m["predictive_planes"] == 9
    assert m["canvas"] == [64, 64] and m["stage"] == "joint"


def test_scaled_widths():
    assert models.width(64, 0.5) == 32
    assert models.width(3, 0.01) == 1
    assert nn_core.count_parameters(models.PredictiveNet(9, 0.5)) < nn_core.count_parameters(models.PredictiveNet(9, 1.0))
