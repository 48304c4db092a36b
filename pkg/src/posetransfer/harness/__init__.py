from .config import ConfigError, TrainConfig, desk_preset, full_preset, load_config
from .inference import infer, load_model
from .pipeline import PoseTransfer
from .training import train_inpainting, train_joint, train_predictive
from .ablation import ablate, ablation_matrix, block_deltas
