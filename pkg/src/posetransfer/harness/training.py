"""Pretraining and joint training loops."""

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .. import losses, metrics, nn_core
from ..warp import atlas_mosaic
from ..synthdata import write_png
from .pipeline import PoseTransfer

log = logging.getLogger(__name__)

@dataclass
class TrainResult:
    model: PoseTransfer
    log: list = field(default_factory=list)
    checkpoint: str = None
    out_dir: str = None
    artifacts: dict = field(default_factory=dict)

    def losses(self, key="total"):
        return [r[key] for r in self.log if key in r]


class TrainLog:
    """One JSON record per optimizer step, mirrored to ``train_log.jsonl``."""

    def __init__(self, out_dir=None, stage=""):
        self.records = []
        self.stage = stage
        self._fh = open(os.path.join(out_dir, "train_log.jsonl"), "a", encoding="utf-8") if out_dir else None

    def append(self, step, epoch, terms):
        rec = {"stage": self.stage, "step": step, "epoch": epoch}
        rec.update({k: float(v) for k, v in terms.items()})
        self.records.append(rec)
        if self._fh:
            self._fh.write(json.dumps(rec) + "\n")
        return rec

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


class CheckpointKeeper:
    """Per-epoch checkpoints: keep the last ``keep`` plus the best by score."""

    def __init__(self, out_dir, keep=3):
        self.out_dir, self.keep = out_dir, keep
        self.saved = []
        self.best = -math.inf

    def save(self, model, epoch, score, manifest):
        if not self.out_dir:
            return None
        path = os.path.join(self.out_dir, f"epoch{epoch:03d}.ptck")
        nn_core.save_checkpoint(path, model.state(), manifest)
        self.saved.append(path)
        while len(self.saved) > self.keep:
            old = self.saved.pop(0)
            if os.path.exists(old):
                os.remove(old)
        if score > self.best:
            self.best = score
            nn_core.save_checkpoint(os.path.join(self.out_dir, "best.ptck"), model.state(), dict(manifest, best_score=score))
        return path


def _optimizer(params, cfg):
    return torch.optim.Adam(params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), weight_decay=0.0)


def _batches(n, cfg, rng):
    order = rng.permutation(n)
    for i in range(0, n, cfg.batch_size):
        yield order[i : i + cfg.batch_size]


def _steps_per_epoch(n, cfg):
    return int(math.ceil(n / cfg.batch_size))


def _prepare(config, out_dir, model=None):
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        config.dump(os.path.join(out_dir, "config.txt"))
    torch.manual_seed(config.seed)
    if model is None:
        model = PoseTransfer(config)
    return model


def eval_samples(dataset, n):
    if hasattr(dataset, "pairs"):
        pairs = dataset.pairs(cross_only=True) or dataset.pairs()
    else:
        pairs = list(dataset)
    return pairs[:n]


def mean_ssim(model, samples, key="final", blocks=None, batch_size=8):
    vals = []
    with torch.no_grad():
        for i in range(0, len(samples), batch_size):
            chunk = samples[i : i + batch_size]
            out = model(model.make_batch(chunk), blocks=blocks)[key]
            for b, s in enumerate(chunk):
                vals.append(metrics.ssim(out[b].permute(1, 2, 0).double().numpy(), s.target.image))
    return float(np.mean(vals)) if vals else float("nan")


def _loop(stage, config, dataset, model, params, step_fn, out_dir, score_fn):
    """Shared epoch/step loop; ``step_fn(samples) -> dict of floats`` does one update."""
    rng = np.random.default_rng([config.seed, len(stage)])
    tlog = TrainLog(out_dir, stage)
    keeper = CheckpointKeeper(out_dir, config.keep_checkpoints)
    manifest = model.manifest(stage=stage, config=config.to_mapping())
    step = 0
    samples = list(dataset)
    done = config.max_steps > 0 and step >= config.max_steps
    for epoch in range(config.epochs):
        if done:
            break
        for idx in _batches(len(samples), config, rng):
            terms = step_fn([samples[i] for i in idx])
            step += 1
            tlog.append(step, epoch, terms)
            if step % max(config.log_every, 1) == 0:
                log.debug("%s step %d %s", stage, step, terms)
            if config.max_steps and step >= config.max_steps:
                done = True
                break
        if out_dir:
            keeper.save(model, epoch, score_fn(), manifest)
    tlog.close()
    ckpt = None
    if out_dir:
        ckpt = nn_core.save_checkpoint(os.path.join(out_dir, "final.ptck"), model.state(), manifest)
    return TrainResult(model, tlog.records, ckpt, out_dir)


def train_predictive(config, dataset, out_dir=None, model=None):
    """Pretrain the predictive stream alone under l1."""
    config = config.replace(stage="pretrain_predictive")
    model = _prepare(config, out_dir, model)
    opt = _optimizer(model.predictive.parameters(), config)
    evals = eval_samples(dataset, config.eval_pairs)

    def step(samples):
        batch = model.make_batch(samples)
        loss = losses.l1(model.predictive(batch.cond), batch.target)
        opt.zero_grad()
        loss.backward()
        opt.step()
        return {"l1": loss.item(), "total": loss.item()}

    def score():
        return mean_ssim(model, evals, key="predictive", blocks="predictive")

    return _loop("pretrain_predictive", config, dataset, model, None, step, out_dir, score)


def inpainting_loss(model, samples, atlases=None):
    atlases = atlases or model.batch_atlases(samples)
    pred = model.inpainting(torch.stack([a.values for a in atlases]))
    total = pred.new_zeros(())
    for b, s in enumerate(samples):
        targets = [model.source_atlas(vw, (s.item_id, j, id(vw))) for j, vw in _neighbors(s)]
        total = total + losses.masked_multiview_l1(pred[b], targets)
    return total / len(samples), pred


def _neighbors(sample):
    if not sample.neighbors:
        raise ValueError("multi-view supervision needs samples with neighbour views")
    # neighbour j's original view index, for caching
    idx = [j for j in range(len(sample.neighbors) + 1) if j != sample.source_index]
    return list(zip(idx, sample.neighbors))


def heldout_texel_error(model, samples):
    """Mean |prediction - neighbour| on texels visible in a neighbour but not in the input.

    Returns ``(model_error, baseline_error)`` where the baseline fills every
    texel with the mean colour of the input's visible texels.
    """
    m_err, b_err, count = 0.0, 0.0, 0
    with torch.no_grad():
        for s in samples:
            src = model.source_atlas(s.source, (s.item_id, s.source_index, id(s.source)))
            pred = model.inpainting(src.values.unsqueeze(0))[0].double()
            vis_in = src.visibility
            if vis_in.any():
                fill = src.values[vis_in].double().mean(dim=0)
            else:
                fill = torch.zeros(3, dtype=torch.float64)
            for j, vw in _neighbors(s):
                tgt = model.source_atlas(vw, (s.item_id, j, id(vw)))
                held = tgt.visibility & ~vis_in
                n = int(held.sum())
                if n == 0:
                    continue
                tv = tgt.values[held].double()
                m_err += float((pred[held] - tv).abs().sum())
                b_err += float((fill - tv).abs().sum())
                count += n * 3
    if count == 0:
        return float("nan"), float("nan")
    return m_err / count, b_err / count


def train_inpainting(config, dataset, out_dir=None, model=None):
    """Pretrain the inpainting autoencoder with masked multi-view l1."""
    config = config.replace(stage="pretrain_inpainting")
    model = _prepare(config, out_dir, model)
    opt = _optimizer(model.inpainting.parameters(), config)
    self_pairs = _SelfPairs(dataset)
    probe = self_pairs.samples[: min(4, len(self_pairs.samples))]

    def step(samples):
        loss, _ = inpainting_loss(model, samples)
        opt.zero_grad()
        loss.backward()
        opt.step()
        return {"inpaint_l1": loss.item(), "total": loss.item()}

    def score():
        with torch.no_grad():
            return -float(inpainting_loss(model, probe)[0])

    if out_dir:
        _inpainting_mosaic(model, probe[0], os.path.join(out_dir, "inpainting_before.png"))
    result = _loop("pretrain_inpainting", config, self_pairs, model, None, step, out_dir, score)
    if out_dir:
        path = os.path.join(out_dir, "inpainting_after.png")
        _inpainting_mosaic(model, probe[0], path)
        result.artifacts["mosaic_before"] = os.path.join(out_dir, "inpainting_before.png")
        result.artifacts["mosaic_after"] = path
    return result


class _SelfPairs:
    """One sample per view (source == target): the inpainting training set."""

    def __init__(self, dataset):
        self.samples = dataset.pairs(self_only=True)
        for s in self.samples:
            if not s.neighbors:
                raise ValueError("dataset items need at least two views for multi-view supervision")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def _inpainting_mosaic(model, sample, path):
    """Rows: observed input charts | inpainted charts | union of neighbour observations."""
    with torch.no_grad():
        src = model.source_atlas(sample.source, (sample.item_id, sample.source_index, id(sample.source)))
        filled = model.inpaint([src])[0]
        union_vals = torch.zeros_like(src.values)
        union_vis = torch.zeros_like(src.visibility)
        for j, vw in _neighbors(sample):
            t = model.source_atlas(vw, (sample.item_id, j, id(vw)))
            new = t.visibility & ~union_vis
            union_vals[new] = t.values[new]
            union_vis |= t.visibility
    n = src.n_parts
    rows = [
        atlas_mosaic(src.values, src.visibility, cols=n),
        atlas_mosaic(filled, None, cols=n),
        atlas_mosaic(union_vals, union_vis, cols=n),
    ]
    grid = np.concatenate(rows, axis=0)
    write_png(path, np.kron(grid, np.ones((2, 2, 1), dtype=np.uint8)))
    return path


def load_pretrained(config, predictive_ckpt=None, inpainting_ckpt=None):
    """Fresh model with stream weights taken from pretraining checkpoints."""
    torch.manual_seed(config.seed)
    model = PoseTransfer(config)
    for path, stream in ((predictive_ckpt, "predictive"), (inpainting_ckpt, "inpainting")):
        if path is None:
            continue
        if isinstance(path, PoseTransfer):
            state, manifest = path.state(), path.manifest()
        else:
            state, manifest = nn_core.load_checkpoint(path)
        model.check_manifest(manifest)
        model.load_streams(state, (stream,))
    return model


def train_joint(config, predictive_ckpt=None, inpainting_ckpt=None, dataset=None, out_dir=None, model=None):
    """Train blending and finetune both streams end-to-end.

    With a nonzero adversarial weight, each step first updates the
    discriminator on (real, detached fake), then the generator side.
    """
    config = config.replace(stage="joint")
    if model is None:
        model = load_pretrained(config, predictive_ckpt, inpainting_ckpt)
    model = _prepare(config, out_dir, model)
    weights = config.weights
    gen_params = [p for n in ("predictive", "inpainting", "blending") for p in getattr(model, n).parameters()]
    opt_g = _optimizer(gen_params, config)
    opt_d = _optimizer(model.discriminator.parameters(), config) if weights.gan > 0 else None
    extractor = model.extractor() if (weights.perceptual > 0 or weights.style > 0) else None
    evals = eval_samples(dataset, config.eval_pairs)

    def step(samples):
        batch = model.make_batch(samples)
        out = model(batch)
        fake = out["final"]
        record = {}
        if opt_d is not None:
            real_s = model.discriminator(batch.z, batch.target)
            fake_s = model.discriminator(batch.z, fake.detach())
            d_loss, _ = losses.lsgan_from_scores(real_s, fake_s)
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
            record["d_loss"] = d_loss.item()
        total, terms = losses.composite(
            fake, batch.target, weights, extractor, model.discriminator, batch.z, config.normalize_gram
        )
        if config.inpaint_loss_in_joint and config.blocks == "full":
            inp, _ = inpainting_loss(model, samples)
            terms["inpaint_l1"] = inp
            total = total + inp
        opt_g.zero_grad()
        total.backward()
        opt_g.step()
        if opt_d is not None:
            opt_d.zero_grad()  # generator step leaves grads on D
        record.update({k: float(v.detach()) if torch.is_tensor(v) else float(v) for k, v in terms.items()})
        record["total"] = total.item()
        return record

    def score():
        return mean_ssim(model, evals)

    return _loop("joint", config, dataset, model, None, step, out_dir, score)
