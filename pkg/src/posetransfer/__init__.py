"""Dense-correspondence pose transfer on synthetic articulated figures.

Modules: ``synthdata`` (figures, IUV maps, conditioning), ``nn_core``
(layers, gradient checks, checkpoints), ``warp`` (UV splat and sampling),
``models``, ``losses``, ``metrics`` and ``harness`` (training, ablation,
inference, CLI).
"""

__version__ = "0.1.0"
