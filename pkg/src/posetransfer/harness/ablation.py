"""Ablation drivers: conditioning, functional blocks, loss terms, cross-conditioning."""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .. import metrics
from ..losses import LossWeights
from .pipeline import conditioning_planes
from .training import load_pretrained, train_inpainting, train_joint, train_predictive

log = logging.getLogger(__name__)

DEFAULT_WEIGHTS = LossWeights()  # 1, 0.5, 5e5, 0.1


@dataclass
class AblationRow:
    table: str
    label: str
    changes: dict = field(default_factory=dict)
    kind: str = "joint"  # "predictive": pretrain only; "joint": pretrain + joint stage


def _weights(*terms):
    full = {"l1": DEFAULT_WEIGHTS.l1, "perceptual": DEFAULT_WEIGHTS.perceptual, "style": DEFAULT_WEIGHTS.style, "gan": DEFAULT_WEIGHTS.gan}
    return tuple(full[k] if k in terms else 0.0 for k in ("l1", "perceptual", "style", "gan"))


def conditioning_rows():
    names = [
        ("Foreground mask", "mask"),
        ("Body part segmentation", "segmentation"),
        ("Body keypoints", "keypoints"),
        ("DensePose {I, U, V}", "iuv"),
        ("DensePose {one-hot I, U, V}", "onehot_iuv"),
    ]
    return [AblationRow("conditioning", label, {"conditioning": mode}, "predictive") for label, mode in names]


def block_rows():
    names = [
        ("predictive module only", "predictive"),
        ("predictive + blending (=self-refinement)", "predictive+blending"),
        ("predictive + warping + blending", "predictive+warping+blending"),
        ("predictive + warping + inpainting + blending (full)", "full"),
    ]
    return [AblationRow("blocks", label, {"blocks": b, "loss_weights": _weights("l1")}) for label, b in names]


def loss_rows():
    combos = [
        ("l1",),
        ("l1", "perceptual"),
        ("l1", "style"),
        ("l1", "perceptual", "style"),
        ("l1", "gan"),
        ("l1", "perceptual", "gan"),
        ("l1", "style", "gan"),
        ("l1", "perceptual", "style", "gan"),
    ]
    short = {"l1": "L_l1", "perceptual": "L_p", "style": "L_style", "gan": "L_GAN"}
    return [
        AblationRow("losses", "{" + ", ".join(short[t] for t in c) + "}", {"blocks": "full", "loss_weights": _weights(*c)})
        for c in combos
    ]


def cross_rows():
    names = [
        ("Keypoints -> Keypoints", "keypoints", "keypoints"),
        ("Keypoints -> DensePose", "keypoints", "densepose"),
        ("DensePose -> Keypoints", "densepose", "keypoints"),
        ("DensePose -> DensePose", "densepose", "densepose"),
    ]
    return [AblationRow("cross", label, {"conditioning": f"cross:{s}:{t}"}, "predictive") for label, s, t in names]


MATRICES = {
    "conditioning": conditioning_rows,
    "blocks": block_rows,
    "losses": loss_rows,
    "cross": cross_rows,
}


def ablation_matrix(table):
    if table == "all":
        return [r for fn in MATRICES.values() for r in fn()]
    if table not in MATRICES:
        raise ValueError(f"unknown ablation table {table!r}; choose from {sorted(MATRICES)} or 'all'")
    return MATRICES[table]()


def predict_images(model, samples, key="final", blocks=None, batch_size=8):
    outs = []
    with torch.no_grad():
        for i in range(0, len(samples), batch_size):
            chunk = samples[i : i + batch_size]
            res = model(model.make_batch(chunk), blocks=blocks)[key]
            outs.extend(res[b].permute(1, 2, 0).double().numpy() for b in range(len(chunk)))
    return outs


def score_model(model, samples, label, key="final", blocks=None):
    images = predict_images(model, samples, key, blocks)
    lookup = {id(s): img for s, img in zip(samples, images)}
    return metrics.evaluate(samples, lambda s: lookup[id(s)], label=label)


@dataclass
class AblationReport:
    rows: list  # (AblationRow, MetricReport or None, error or None)

    def table_rows(self, table=None):
        out = []
        for row, rep, err in self.rows:
            if table and row.table != table:
                continue
            r = {"Table": row.table, "Model": row.label}
            if rep is not None:
                s = rep.summary_row()
                r.update({k: s.get(k) for k in ("SSIM", "MS-SSIM", "IS", "DS")})
            else:
                r.update({"SSIM": None, "MS-SSIM": None, "IS": None, "DS": None})
            if "conditioning" in row.changes:
                r["planes"] = row.changes.get("_planes")
            r["error"] = err or ""
            out.append(r)
        return out

    def tables(self):
        seen = []
        for row, _, _ in self.rows:
            if row.table not in seen:
                seen.append(row.table)
        return seen

    def to_text(self, sep=" | "):
        chunks = []
        for t in self.tables():
            rows = self.table_rows(t)
            cols = ["Model", "SSIM", "MS-SSIM", "IS", "DS"] + (["planes"] if any("planes" in r for r in rows) else [])
            if any(r["error"] for r in rows):
                cols.append("error")
            chunks.append(f"## {t}\n" + metrics.format_table(rows, cols, sep))
        return "\n\n".join(chunks)

    def ssim(self, label):
        for row, rep, _ in self.rows:
            if row.label == label and rep is not None:
                return rep.mean_ssim
        return float("nan")


def ablate(base_config, rows, train_set, test_set, pretrain_steps=200, inpaint_steps=200, joint_steps=100, out_dir=None):
    """Train and score every row; failures are isolated per row.

    Pretrained streams are shared between joint rows with the same
    conditioning. Scores are on the cross-pose pairs of ``test_set``.
    """
    samples = test_set.pairs(cross_only=True)[: base_config.eval_pairs]
    pretrained = {}
    results = []
    for row in rows:
        try:
            changes = {k: v for k, v in row.changes.items() if not k.startswith("_")}
            cfg = base_config.replace(**changes)
            row.changes["_planes"] = conditioning_planes(cfg.conditioning, cfg.n_parts, cfg.n_keypoints)
            if row.kind == "predictive":
                res = train_predictive(cfg.replace(max_steps=pretrain_steps), train_set)
                rep = score_model(res.model, samples, row.label, key="predictive", blocks="predictive")
            else:
                key = (cfg.conditioning, cfg.seed)
                if key not in pretrained:
                    p = train_predictive(cfg.replace(max_steps=pretrain_steps), train_set).model
                    q = train_inpainting(cfg.replace(max_steps=inpaint_steps), train_set).model
                    pretrained[key] = (p, q)
                p, q = pretrained[key]
                model = load_pretrained(cfg, p, q)
                res = train_joint(cfg.replace(max_steps=joint_steps), dataset=train_set, model=model)
                rep = score_model(res.model, samples, row.label)
            results.append((row, rep, None))
        except Exception as exc:  # isolated per row
            log.exception("ablation row %s failed", row.label)
            results.append((row, None, f"{type(exc).__name__}: {exc}"))
    report = AblationReport(results)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "ablation.txt"), "w", encoding="utf-8") as fh:
            fh.write(report.to_text() + "\n")
    return report


def block_deltas(base_config, train_set, test_set, seeds=(0, 1, 2), **steps):
    """Mean-SSIM difference (full - predictive only) per model seed."""
    pair = [r for r in block_rows() if r.changes["blocks"] in ("predictive", "full")]
    deltas = []
    for seed in seeds:
        rep = ablate(base_config.replace(seed=seed), pair, train_set, test_set, **steps)
        full = rep.ssim(pair[1].label)
        pred = rep.ssim(pair[0].label)
        deltas.append(full - pred)
    return np.array(deltas)
