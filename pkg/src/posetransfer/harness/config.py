"""Training configuration and its ``key = value`` file format.

Every :class:`TrainConfig` field can appear in a config file, one per line::

    # desk-scale joint run
    stage = joint
    lr = 2e-4
    loss_weights = 1, 0.5, 5e5, 0.1
    epochs = 2

Tuple fields are comma-separated. Unknown keys are rejected.
"""

import dataclasses
import typing
from dataclasses import dataclass, field

from .. import kvfile
from ..losses import PRESETS, LossWeights
from ..synthdata import CONDITIONING_MODES, POSE_REPRESENTATIONS

STAGES = ("pretrain_predictive", "pretrain_inpainting", "joint")
BLOCKS = ("predictive", "predictive+blending", "predictive+warping+blending", "full")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 8
    epochs: int = 40
    max_steps: int = 0  # 0 = no cap
    stage: str = "joint"
    loss_weights: tuple = (1.0, 0.5, 5e5, 0.1)
    conditioning: str = "iuv"
    blocks: str = "full"
    scale: float = 0.5
    canvas: int = 64
    n_parts: int = 8
    n_keypoints: int = 18
    texture_res: int = 64
    atlas_res: int = 32  # texels per chart side; 64 leaves most texels unobserved on a 64px canvas
    n_items: int = 10
    views_per_item: int = 4
    n_test_items: int = 2
    seed: int = 0
    data_seed: int = 0
    dtype: str = "float32"
    keep_observed: bool = True
    inpaint_loss_in_joint: bool = False
    normalize_gram: bool = True
    disc_norm: bool = True
    heatmap_sigma: float = 2.0
    log_every: int = 1
    keep_checkpoints: int = 3
    eval_pairs: int = 16
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.loss_weights = tuple(float(x) for x in self.loss_weights)
        self.validate()

    @property
    def weights(self):
        return LossWeights(*self.loss_weights)

    def validate(self):
        for name in ("lr", "batch_size", "canvas", "n_parts", "atlas_res", "texture_res", "n_items", "scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0 or self.max_steps < 0:
            raise ConfigError("epochs and max_steps must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.views_per_item < 2:
            raise ConfigError("views_per_item must be >= 2")
        if not 0 <= self.n_test_items < self.n_items:
            raise ConfigError("n_test_items must leave at least one training item")
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}")
        if self.blocks not in BLOCKS:
            raise ConfigError(f"blocks must be one of {BLOCKS}")
        if len(self.loss_weights) != 4:
            raise ConfigError("loss_weights needs four values (l1, perceptual, style, gan)")
        try:
            LossWeights(*self.loss_weights)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        validate_conditioning(self.conditioning)
        if self.atlas_res % 16:
            raise ConfigError("atlas_res must be divisible by 16")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_mapping(self):
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "extra":
                continue
            v = getattr(self, f.name)
            out[f.name] = ", ".join(repr(x) for x in v) if isinstance(v, tuple) else v
        return out

    def dump(self, path):
        kvfile.dump(self.to_mapping(), path, header="posetransfer training config")


def validate_conditioning(mode):
    if mode in CONDITIONING_MODES:
        return mode
    if mode.startswith("cross:"):
        parts = mode.split(":")
        if len(parts) == 3 and all(p in POSE_REPRESENTATIONS for p in parts[1:]):
            return mode
    raise ConfigError(
        f"unknown conditioning {mode!r}; expected one of {CONDITIONING_MODES} or cross:<src>:<tgt> "
        f"with representations {POSE_REPRESENTATIONS}"
    )


def _coerce(name, typ, text):
    text = str(text).strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        if typ is float:
            return float(text)
        if typ is tuple:
            return tuple(kvfile.floats(text))
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc


def from_mapping(mapping, base=None):
    """Build a config from string values, starting from ``base`` (defaults if None)."""
    base = base or TrainConfig()
    hints = typing.get_type_hints(TrainConfig)
    changes = {}
    for key, value in mapping.items():
        key = key.strip().replace("-", "_")
        if key == "loss_preset":
            if value not in PRESETS:
                raise ConfigError(f"unknown loss preset {value!r}; choose from {sorted(PRESETS)}")
            w = PRESETS[value]
            changes["loss_weights"] = (w.l1, w.perceptual, w.style, w.gan)
            continue
        if key not in hints or key == "extra":
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, hints[key], value)
    return dataclasses.replace(base, **changes)


def load_config(path=None, overrides=(), base=None):
    """Read a config file (optional) and apply ``key=value`` overrides."""
    mapping = kvfile.load(path) if path else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        mapping[k.strip()] = v.strip()
    return from_mapping(mapping, base)


def desk_preset(**changes):
    return TrainConfig(**changes)


def full_preset(**changes):
    """Full-size settings: 256x256 canvas, 24 parts, 256 atlas, full widths."""
    cfg = dict(canvas=256, n_parts=24, texture_res=256, atlas_res=256, scale=1.0, n_items=13029, n_test_items=1000)
    cfg.update(changes)
    return TrainConfig(**cfg)


PRESET_CONFIGS = {"desk": desk_preset, "full": full_preset}
