import pytest

from posetransfer.harness.config import (
    ConfigError,
    TrainConfig,
    from_mapping,
    load_config,
    full_preset,
)


def test_optimizer_defaults():
    c = TrainConfig()
    assert c.lr == 2e-4
    assert (c.beta1, c.beta2) == (0.5, 0.999)
    assert c.batch_size == 8
    assert c.epochs == 40
    assert c.loss_weights == (1.0, 0.5, 5e5, 0.1)


def test_full_preset_sizes():
    c = full_preset()
    assert (c.canvas, c.n_parts, c.atlas_res, c.scale) == (256, 24, 256, 1.0)


@pytest.mark.parametrize(
    "changes",
    [
        {"lr": 0.0},
        {"batch_size": 0},
        {"epochs": -1},
        {"beta1": 1.0},
        {"views_per_item": 1},
        {"n_test_items": 10},
        {"stage": "finetune"},
        {"blocks": "warping"},
        {"loss_weights": (1, 0, 0)},
        {"loss_weights": (1, -1, 0, 0)},
        {"conditioning": "depth"},
        {"conditioning": "cross:iuv:keypoints"},
        {"atlas_res": 40},
        {"dtype": "float16"},
    ],
)
def test_invalid_values_rejected(changes):
    with pytest.raises(ConfigError):
        TrainConfig(**changes)


def test_cross_conditioning_accepted():
    assert TrainConfig(conditioning="cross:keypoints:densepose").conditioning == "cross:keypoints:densepose"


def test_mapping_coercion_and_preset():
    c = from_mapping({"lr": "1e-3", "batch-size": "4", "keep_observed": "no", "loss_preset": "best-structure"})
    assert c.lr == 1e-3 and c.batch_size == 4 and c.keep_observed is False
    assert c.loss_weights == (1.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("mapping", [{"learning_rate": "1"}, {"lr": "fast"}, {"keep_observed": "maybe"}, {"loss_preset": "nope"}])
def test_mapping_errors(mapping):
    with pytest.raises(ConfigError):
        from_mapping(mapping)


def test_dump_load_round_trip(tmp_path):
    c = TrainConfig(lr=3e-4, loss_weights=(1, 0, 2.5, 0.1), conditioning="cross:densepose:keypoints", keep_observed=False)
    path = tmp_path / "cfg.txt"
    c.dump(path)
    back = load_config(str(path))
    assert back.to_mapping() == c.to_mapping()


def test_overrides_apply_after_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\nlr = 1e-3\nepochs = 3\n")
    c = load_config(str(path), ["epochs=5", "stage = pretrain_inpainting"])
    assert (c.lr, c.epochs, c.stage) == (1e-3, 5, "pretrain_inpainting")
    with pytest.raises(ConfigError):
        load_config(None, ["epochs"])
