import json

import numpy as np
import pytest

from posetransfer import metrics, synthdata as sd


def _brute_ssim(a, b):
    """Direct sliding-window SSIM, one window position at a time."""
    x, y = (np.asarray(a) + 1) / 2, (np.asarray(b) + 1) / 2
    r = np.arange(11) - 5.0
    g = np.exp(-(r**2) / (2 * 1.5**2))
    g /= g.sum()
    w = np.outer(g, g)
    c1, c2 = 0.01**2, 0.03**2
    h, wd, ch = x.shape
    vals = []
    for c in range(ch):
        for i in range(h - 10):
            for j in range(wd - 10):
                px, py = x[i : i + 11, j : j + 11, c], y[i : i + 11, j : j + 11, c]
                mx, my = (w * px).sum(), (w * py).sum()
                vx = (w * (px - mx) ** 2).sum()
                vy = (w * (py - my) ** 2).sum()
                cov = (w * (px - mx) * (py - my)).sum()
                vals.append(((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


@pytest.mark.parametrize("seed", range(5))
def test_ssim_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, (32, 32, 3))
    b = np.clip(a + rng.normal(0, 0.3, a.shape), -1, 1)
    assert abs(metrics.ssim(a, b) - _brute_ssim(a, b)) < 1e-6


def test_identity_and_symmetry(desk_dataset):
    x = desk_dataset[0].source.image
    y = desk_dataset[1].target.image
    assert abs(metrics.ssim(x, x) - 1) < 1e-9
    assert abs(metrics.ms_ssim(x, x) - 1) < 1e-9
    assert metrics.ssim(x, y) == pytest.approx(metrics.ssim(y, x), abs=1e-15)
    assert metrics.ms_ssim(x, y) == pytest.approx(metrics.ms_ssim(y, x), abs=1e-15)
    assert -1 <= metrics.ssim(x, y) <= 1
    assert 0 <= metrics.ms_ssim(x, y) <= 1


def test_ms_ssim_monotone_under_noise(desk_dataset):
    x = desk_dataset[0].source.image
    noise = np.random.default_rng(0).standard_normal(x.shape)
    scores = [metrics.ms_ssim(x, x + s * noise) for s in (0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8)]
    assert all(a > b for a, b in zip(scores, scores[1:])), scores


def test_luminance_shift_scores_lower(desk_dataset):
    x = desk_dataset[0].source.image
    assert metrics.ms_ssim(x, x + 0.3) < 1
    assert metrics.ssim(x, x + 0.3) < 1


def test_size_errors():
    with pytest.raises(ValueError, match="11"):
        metrics.ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))
    with pytest.raises(ValueError, match="48"):
        metrics.ms_ssim(np.zeros((32, 32, 3)), np.zeros((32, 32, 3)))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((16, 16, 3)), np.zeros((16, 17, 3)))
    assert metrics.ms_ssim(np.zeros((48, 48, 3)), np.zeros((48, 48, 3))) == pytest.approx(1.0)


def test_gaussian_window():
    g = metrics.gaussian_window()
    assert g.numel() == 11 and abs(float(g.sum()) - 1) < 1e-15
    assert sum(metrics.MS_WEIGHTS) == pytest.approx(1.0001, abs=1e-12)


def _samples(ds, n=6):
    return ds.pairs(cross_only=True)[:n]


def test_evaluate_identity_and_gray(desk_dataset):
    samples = _samples(desk_dataset)
    rep = metrics.evaluate(samples, lambda s: s.target.image, label="oracle")
    assert rep.mean_ssim == pytest.approx(1.0, abs=1e-9)
    gray = metrics.evaluate(samples, lambda s: np.zeros_like(s.target.image))
    # the background is already mid-gray, so only the figure pulls the score down
    assert gray.mean_ssim < 0.8
    assert gray.mean_ms_ssim < 0.5


def test_evaluate_records_failures(desk_dataset):
    samples = _samples(desk_dataset)

    def gen(s):
        if s is samples[2]:
            raise RuntimeError("boom")
        return s.target.image

    rep = metrics.evaluate(samples, gen)
    assert rep.n_failed == 1
    assert "boom" in rep.rows[2]["error"]
    assert rep.rows[2]["ssim"] is None
    assert rep.mean_ssim == pytest.approx(1.0, abs=1e-9)
    assert len(rep.rows) == len(samples)


def test_report_table_placeholders(desk_dataset, tmp_path):
    rep = metrics.evaluate(_samples(desk_dataset, 2), lambda s: s.target.image, label="m")
    table = rep.to_table()
    header, row = table.splitlines()
    assert header.split(" | ") == ["Model", "SSIM", "MS-SSIM", "IS", "DS"]
    cells = row.split(" | ")
    assert cells[0] == "m" and cells[3] == "—" and cells[4] == "—"
    rep.write(str(tmp_path / "metrics"))
    rec = json.loads((tmp_path / "metrics.json").read_text())
    assert rec["aggregate"]["n_failed"] == 0 and len(rec["pairs"]) == 2
    assert (tmp_path / "metrics.txt").read_text().startswith("Model")


def test_registered_scorer_fills_slot(desk_dataset):
    metrics.register_scorer("IS", lambda images: float(len(images)))
    try:
        rep = metrics.evaluate(_samples(desk_dataset, 3), lambda s: s.target.image)
        assert rep.plugins == {"IS": 3.0}
        assert rep.summary_row()["IS"] == 3.0 and rep.summary_row()["DS"] is None
    finally:
        metrics.unregister_scorer("IS")
    assert "IS" not in metrics.registered_scorers()


def test_image_grid(tmp_path, desk_dataset):
    s = desk_dataset[1]
    rows = [[s.source.image, s.target.image, s.target.image]] * 2
    grid = metrics.image_grid(rows)
    assert grid.shape == (2 * 65 + 1, 3 * 65 + 1, 3) and grid.dtype == np.uint8
    metrics.save_grid(tmp_path / "g.png", rows, upscale=2)
    assert sd.read_png(tmp_path / "g.png").shape == (2 * grid.shape[0], 2 * grid.shape[1], 3)
