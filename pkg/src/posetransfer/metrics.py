"""SSIM / MS-SSIM and the evaluation report.

Images are (H, W, 3) arrays in [-1, 1]; they are mapped to [0, 1] before
scoring. SSIM uses the canonical constants: 11x11 Gaussian window with
sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1, valid filtering.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .synthdata import write_png

WIN = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03
MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
PLUGIN_SLOTS = ("IS", "DS")
MISSING = "—"


def _to_unit(img):
    t = torch.as_tensor(np.asarray(img) if not torch.is_tensor(img) else img.detach(), dtype=torch.float64)
    if t.dim() != 3 or t.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {tuple(t.shape)}")
    return ((t + 1.0) / 2.0).permute(2, 0, 1).unsqueeze(0)


def gaussian_window(size=WIN, sigma=SIGMA):
    x = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter(x, g):
    c = x.shape[1]
    k = g.numel()
    x = F.conv2d(x, g.view(1, 1, 1, k).expand(c, 1, 1, k), groups=c)
    return F.conv2d(x, g.view(1, 1, k, 1).expand(c, 1, k, 1), groups=c)


def _ssim_cs(x, y, win):
    g = gaussian_window(win)
    c1, c2 = K1**2, K2**2
    mx, my = _filter(x, g), _filter(y, g)
    sxx = _filter(x * x, g) - mx * mx
    syy = _filter(y * y, g) - my * my
    sxy = _filter(x * y, g) - mx * my
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    # per-channel means
    return (lum * cs).mean(dim=(2, 3))[0], cs.mean(dim=(2, 3))[0]


def ssim(a, b):
    x, y = _to_unit(a), _to_unit(b)
    if x.shape != y.shape:
        raise ValueError(f"ssim: shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    if min(x.shape[2:]) < WIN:
        raise ValueError(f"ssim: images must be at least {WIN}x{WIN} pixels, got {tuple(x.shape[2:])}")
    s, _ = _ssim_cs(x, y, WIN)
    return float(s.mean())


def ms_ssim(a, b):
    """Five-scale MS-SSIM.

    Coarse scales narrower than 11 pixels use the Gaussian window truncated
    to the largest odd size that fits, so 64x64 images are scorable; images
    must still be at least 3 pixels at the coarsest scale (>= 48 px side).
    """
    x, y = _to_unit(a), _to_unit(b)
    if x.shape != y.shape:
        raise ValueError(f"ms_ssim: shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    side = min(x.shape[2:])
    if side // 16 < 3:
        raise ValueError(f"ms_ssim: images need a side of at least 48 pixels for 5 scales, got {side}")
    levels = len(MS_WEIGHTS)
    result = torch.ones(x.shape[1], dtype=torch.float64)
    for j, w in enumerate(MS_WEIGHTS):
        cur = min(x.shape[2:])
        win = min(WIN, cur if cur % 2 else cur - 1)
        s, cs = _ssim_cs(x, y, win)
        term = s if j == levels - 1 else cs
        result = result * torch.clamp(term, min=0.0) ** w
        if j < levels - 1:
            x = F.avg_pool2d(x, 2, ceil_mode=False)
            y = F.avg_pool2d(y, 2, ceil_mode=False)
    return float(result.mean())


# -- evaluation ----------------------------------------------------------------

_SCORERS = {}


def register_scorer(name, fn):
    """Register a realism scorer ``fn(list_of_images) -> float`` (e.g. IS, DS)."""
    if not callable(fn):
        raise TypeError("scorer must be callable")
    _SCORERS[name] = fn


def unregister_scorer(name):
    _SCORERS.pop(name, None)


def registered_scorers():
    return dict(_SCORERS)


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)  # dicts: pair, ssim, ms_ssim, error
    plugins: dict = field(default_factory=dict)
    label: str = "model"

    @property
    def ok_rows(self):
        return [r for r in self.rows if r.get("error") is None]

    @property
    def n_failed(self):
        return len(self.rows) - len(self.ok_rows)

    def mean(self, key):
        vals = [r[key] for r in self.ok_rows if r.get(key) is not None]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_ssim(self):
        return self.mean("ssim")

    @property
    def mean_ms_ssim(self):
        return self.mean("ms_ssim")

    def summary_row(self):
        row = {"Model": self.label, "SSIM": self.mean_ssim, "MS-SSIM": self.mean_ms_ssim}
        for slot in PLUGIN_SLOTS:
            row[slot] = self.plugins.get(slot)
        for k, v in self.plugins.items():
            row.setdefault(k, v)
        return row

    def to_table(self, sep=" | "):
        return format_table([self.summary_row()], sep=sep)

    def to_records(self):
        return {
            "label": self.label,
            "aggregate": {"ssim": self.mean_ssim, "ms_ssim": self.mean_ms_ssim, "n_failed": self.n_failed},
            "plugins": self.plugins,
            "pairs": self.rows,
        }

    def write(self, stem):
        with open(stem + ".txt", "w", encoding="utf-8") as fh:
            fh.write(self.to_table() + "\n")
        with open(stem + ".json", "w", encoding="utf-8") as fh:
            json.dump(self.to_records(), fh, indent=1, default=float)


def format_table(rows, columns=None, sep=" | "):
    """Delimited text table; missing values print as an em-dash placeholder."""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)

    def cell(v):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return MISSING
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    lines = [sep.join(columns)]
    lines += [sep.join(cell(r.get(c)) for c in columns) for r in rows]
    return "\n".join(lines)


def evaluate(samples, generator, label="model", scorers=None):
    """Score ``generator(sample) -> (H, W, 3) image`` against each sample's target.

    A failing pair is recorded with its error and excluded from aggregates.
    Registered scorers run once over all generated images.
    """
    rows, produced = [], []
    for i, s in enumerate(samples):
        row = {"pair": i, "item": getattr(s, "item_id", None), "ssim": None, "ms_ssim": None, "error": None}
        try:
            out = generator(s)
            out = out.detach().cpu().numpy() if torch.is_tensor(out) else np.asarray(out)
            row["ssim"] = ssim(out, s.target.image)
            row["ms_ssim"] = ms_ssim(out, s.target.image)
            produced.append(out)
        except Exception as exc:  # recorded per pair
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    plugins = {}
    for name, fn in (registered_scorers() if scorers is None else scorers).items():
        plugins[name] = float(fn(produced)) if produced else None
    return MetricReport(rows, plugins, label)


def image_grid(rows, pad=1):
    """Tile rows of (H, W, 3) [-1, 1] images into one uint8 mosaic."""
    h, w = np.asarray(rows[0][0]).shape[:2]
    ncol = max(len(r) for r in rows)
    out = np.full((len(rows) * (h + pad) + pad, ncol * (w + pad) + pad, 3), 255, dtype=np.uint8)
    for i, r in enumerate(rows):
        for j, img in enumerate(r):
            arr = img.detach().cpu().numpy() if torch.is_tensor(img) else np.asarray(img)
            tile = np.clip(np.rint((arr + 1) * 127.5), 0, 255).astype(np.uint8)
            y0, x0 = pad + i * (h + pad), pad + j * (w + pad)
            out[y0 : y0 + h, x0 : x0 + w] = tile
    return out


def save_grid(path, rows, upscale=1):
    grid = image_grid(rows)
    if upscale > 1:
        grid = np.kron(grid, np.ones((upscale, upscale, 1), dtype=np.uint8))
    write_png(path, grid)
    return path
