"""Layer vocabulary, finite-difference gradient checking and checkpoint I/O.

Gradients come from torch autograd; :func:`grad_check` verifies them against
central finite differences independently of autograd.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

INIT_STD = 0.02
NORM_EPS = 1e-5
EPS_FLOOR = 1e-12


class ShapeError(ValueError):
    """Tensor shape incompatible with an operation."""


def _check_input(x, channels, name):
    if x.dim() != 4:
        raise ShapeError(f"{name}: expected a 4-D (batch, channels, height, width) input, got {x.dim()}-D")
    if x.shape[1] != channels:
        raise ShapeError(f"{name}: input channel dimension is {x.shape[1]}, kernel expects {channels}")


def conv_out_size(size, kernel=3, stride=1, padding=1):
    return (size + 2 * padding - kernel) // stride + 1


def deconv_out_size(size, kernel=3, stride=2, padding=1, output_padding=1):
    return (size - 1) * stride - 2 * padding + kernel + output_padding


def conv2d(x, weight, bias=None, stride=1, padding=None):
    """2-D convolution; ``padding=None`` means ``kernel // 2`` ("same" at stride 1)."""
    if stride not in (1, 2):
        raise ShapeError(f"conv2d: stride must be 1 or 2, got {stride}")
    _check_input(x, weight.shape[1], "conv2d")
    k = weight.shape[-1]
    pad = k // 2 if padding is None else padding
    for dim, size in (("height", x.shape[2]), ("width", x.shape[3])):
        if size + 2 * pad < k:
            raise ShapeError(f"conv2d: input {dim} {size} is smaller than the {k}x{k} kernel")
    return F.conv2d(x, weight, bias, stride=stride, padding=pad)


def deconv2d(x, weight, bias=None, stride=2):
    """Transposed 3x3 convolution; stride 2 exactly doubles spatial size."""
    if stride not in (1, 2):
        raise ShapeError(f"deconv2d: stride must be 1 or 2, got {stride}")
    _check_input(x, weight.shape[0], "deconv2d")
    k = weight.shape[-1]
    return F.conv_transpose2d(x, weight, bias, stride=stride, padding=k // 2, output_padding=stride - 1)


def instance_norm(x, weight=None, bias=None, eps=NORM_EPS):
    """Per-sample, per-channel normalisation over the spatial dimensions."""
    if x.dim() != 4:
        raise ShapeError(f"instance_norm: expected 4-D input, got {x.dim()}-D")
    eps = max(eps, EPS_FLOOR)
    mean = x.mean(dim=(2, 3), keepdim=True)
    var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
    y = (x - mean) / torch.sqrt(var + eps)
    if weight is not None:
        y = y * weight.view(1, -1, 1, 1)
    if bias is not None:
        y = y + bias.view(1, -1, 1, 1)
    return y


def relu(x):
    return torch.relu(x)


def tanh(x):
    return torch.tanh(x)


def linear(x, weight, bias=None):
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input feature dimension is {x.shape[-1]}, weight expects {weight.shape[1]}")
    return F.linear(x, weight, bias)


# -- modules -----------------------------------------------------------------


def init_weights(module):
    """Normal(0, 0.02) conv/linear weights, zero biases, unit/zero norm affine."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, INIT_STD)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (InstanceNorm, FeatureNorm)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
    return module


class InstanceNorm(nn.Module):
    def __init__(self, channels, eps=NORM_EPS):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        return instance_norm(x, self.weight, self.bias, self.eps)


class FeatureNorm(nn.Module):
    """Normalisation across the features of a vector (instance norm on a 1-D signal)."""

    def __init__(self, features, eps=NORM_EPS):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(features))
        self.bias = nn.Parameter(torch.zeros(features))

    def forward(self, x):
        mean = x.mean(dim=-1, keepdim=True)
        var = x.var(dim=-1, unbiased=False, keepdim=True)
        return (x - mean) / torch.sqrt(var + max(self.eps, EPS_FLOOR)) * self.weight + self.bias


class Conv(nn.Module):
    """conv (or transposed conv) -> optional instance norm -> activation."""

    def __init__(self, c_in, c_out, stride=1, kernel=3, norm=True, act="relu", transpose=False, padding=None):
        super().__init__()
        self.c_in, self.c_out, self.stride, self.transpose = c_in, c_out, stride, transpose
        self.padding = kernel // 2 if padding is None else padding
        if transpose:
            self.conv = nn.ConvTranspose2d(c_in, c_out, kernel, stride, kernel // 2, output_padding=stride - 1)
        else:
            self.conv = nn.Conv2d(c_in, c_out, kernel, stride, self.padding)
        self.norm = InstanceNorm(c_out) if norm else None
        self.act = act

    def forward(self, x):
        if self.transpose:
            y = deconv2d(x, self.conv.weight, self.conv.bias, self.stride)
        else:
            y = conv2d(x, self.conv.weight, self.conv.bias, self.stride, self.padding)
        if self.norm is not None:
            y = self.norm(y)
        if self.act == "relu":
            y = relu(y)
        elif self.act == "lrelu":
            y = F.leaky_relu(y, 0.2)
        elif self.act == "tanh":
            y = tanh(y)
        elif self.act is not None:
            raise ValueError(f"unknown activation {self.act!r}")
        return y


class ResidualBlock(nn.Module):
    """``x + norm(conv(relu(norm(conv(x)))))``."""

    def __init__(self, channels):
        super().__init__()
        self.channels = channels
        self.body = nn.Sequential(Conv(channels, channels), Conv(channels, channels, act=None))

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != self.channels:
            raise ShapeError(
                f"residual_block: input has {x.shape[1] if x.dim() > 1 else '?'} channels, block has {self.channels}"
            )
        return x + self.body(x)

    def zero_(self):
        with torch.no_grad():
            for p in self.body.parameters():
                p.zero_()
        return self


def residual_block(x, block):
    return block(x)


def count_parameters(module):
    return sum(p.numel() for p in module.parameters())


# -- finite-difference gradient check ----------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    per_tensor: dict = field(default_factory=dict)
    n_coords: int = 0

    @property
    def passed(self):
        return bool(np.isfinite(self.max_rel_error) and self.max_rel_error < self.tolerance)

    def __str__(self):
        worst = max(self.per_tensor, key=self.per_tensor.get) if self.per_tensor else "-"
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} max_rel_error={self.max_rel_error:.3e} (tol {self.tolerance:.0e}, "
            f"{self.n_coords} coords, worst: {worst})"
        )


def _random_inputs(shapes, gen, kink_margin):
    out = []
    for shape in shapes:
        x = torch.randn(*shape, generator=gen, dtype=torch.float64)
        if kink_margin > 0:
            x = torch.where(x.abs() < kink_margin, torch.sign(x + 1e-30) * kink_margin + x, x)
        out.append(x)
    return out


def grad_check(
    op,
    shapes=None,
    tolerance=1e-5,
    inputs=None,
    params=None,
    wrt_inputs=None,
    step=1e-6,
    max_coords=None,
    seed=0,
    kink_margin=0.0,
):
    """Compare autograd gradients with central finite differences at 64-bit.

    ``op`` maps input tensors to a tensor (or tuple of tensors); it is reduced
    to a scalar by a fixed random projection. Inputs are drawn from ``shapes``
    (standard normal, pushed at least ``kink_margin`` away from zero) unless
    given. ``params`` defaults to ``op.parameters()`` when ``op`` is a module.
    ``max_coords`` samples at most that many coordinates per tensor.

    Element error is ``|a - n| / max(|a|, |n|, floor)`` where the floor is
    1e-3 of the largest gradient magnitude over all checked tensors (at
    least 1e-7), so near-zero entries, including structurally zero ones such
    as a bias feeding a normalization, are judged against the op's scale.
    """
    gen = torch.Generator().manual_seed(seed)
    if inputs is None:
        inputs = _random_inputs(shapes, gen, kink_margin)
    inputs = [x.detach().to(torch.float64).clone().contiguous() if torch.is_tensor(x) else x for x in inputs]
    if isinstance(op, nn.Module):
        op = op.double()
        if params is None:
            params = list(op.named_parameters())
    params = list(params or [])
    if wrt_inputs is None:
        wrt_inputs = [i for i, x in enumerate(inputs) if torch.is_tensor(x) and x.is_floating_point()]

    targets = [(f"input{i}", inputs[i]) for i in wrt_inputs] + [(n, p) for n, p in params]
    for _, t in targets:
        t.requires_grad_(True)

    def evaluate():
        out = op(*inputs)
        outs = out if isinstance(out, (tuple, list)) else (out,)
        return outs

    outs = evaluate()
    proj_gen = torch.Generator().manual_seed(seed + 1)
    projections = [torch.randn(o.shape, generator=proj_gen, dtype=torch.float64) for o in outs]

    def scalar():
        return sum((o.to(torch.float64) * r).sum() for o, r in zip(evaluate(), projections))

    for _, t in targets:
        t.grad = None
    scalar().backward()
    analytic = [t.grad.detach().clone() if t.grad is not None else torch.zeros_like(t) for _, t in targets]

    rng = np.random.default_rng(seed)
    per_tensor = {}
    n_coords = 0
    scale = max(max((float(a.abs().max()) for a in analytic if a.numel()), default=0.0) * 1e-3, 1e-7)
    with torch.no_grad():
        for (name, t), a in zip(targets, analytic):
            flat = t.data.view(-1)
            aflat = a.view(-1)
            coords = np.arange(flat.numel())
            if max_coords is not None and coords.size > max_coords:
                coords = rng.choice(coords, size=max_coords, replace=False)
            worst = 0.0
            for c in coords:
                orig = flat[c].item()
                flat[c] = orig + step
                fp = scalar().item()
                flat[c] = orig - step
                fm = scalar().item()
                flat[c] = orig
                num = (fp - fm) / (2 * step)
                an = aflat[c].item()
                err = abs(an - num) / max(abs(an), abs(num), scale)
                worst = max(worst, err)
            per_tensor[name] = worst
            n_coords += len(coords)
    for _, t in targets:
        t.requires_grad_(False)
        t.grad = None
    return GradCheckReport(max(per_tensor.values(), default=0.0), tolerance, per_tensor, n_coords)


# -- checkpoint container ----------------------------------------------------

CHECKPOINT_MAGIC = b"PTCKPT\x00\x00"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, state, manifest=None):
    """Write named arrays as little-endian float32.

    Layout: 8-byte magic, uint32 format version, uint32 header length, UTF-8
    JSON header ``{"tensors": [{"name", "shape", "offset", "nbytes"}], "manifest": {...}}``,
    then the concatenated payload (offsets relative to the payload start).
    """
    entries, blobs, offset = [], [], 0
    for name, value in state.items():
        arr = value.detach().cpu().numpy() if torch.is_tensor(value) else np.asarray(value)
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"tensors": entries, "manifest": manifest or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)
    return path


def load_checkpoint(path):
    """Return ``(state, manifest)`` with float32 numpy arrays."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    state = {}
    for e in header["tensors"]:
        raw = payload[e["offset"] : e["offset"] + e["nbytes"]]
        state[e["name"]] = np.frombuffer(raw, dtype="<f4").reshape(e["shape"]).copy()
    return state, header["manifest"]


def module_state(module, prefix=""):
    return {prefix + k: v for k, v in module.state_dict().items()}


def load_module_state(module, state, prefix=""):
    own = module.state_dict()
    missing = [k for k in own if prefix + k not in state]
    if missing:
        raise KeyError(f"checkpoint lacks parameters: {missing[:5]}")
    module.load_state_dict({k: torch.as_tensor(state[prefix + k], dtype=own[k].dtype) for k in own})
    return module
