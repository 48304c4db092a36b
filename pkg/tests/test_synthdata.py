import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from posetransfer import synthdata as sd
from posetransfer.synthdata import PartSpec, SpecError


def _zero_pose(spec):
    return np.zeros(sum(p.parent >= 0 for p in spec.parts))


def test_white_texture_identity_pose():
    spec = sd.make_spec(textures=np.ones((8, 16, 16, 3)))
    image, iuv, _ = sd.render_figure(spec, _zero_pose(spec))
    fg = iuv.part > 0
    assert fg.any() and (~fg).any()
    assert np.all(image[fg] == 1.0)
    assert np.all(image[~fg] == sd.BACKGROUND)


def test_render_is_deterministic():
    spec = sd.make_spec(np.random.default_rng(3))
    pose = sd.random_pose(np.random.default_rng(4), spec)
    a = sd.render_figure(spec, pose, 0.2)
    b = sd.render_figure(spec, pose, 0.2)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1].part, b[1].part)
    assert np.array_equal(a[1].u, b[1].u) and np.array_equal(a[1].v, b[1].v)
    assert np.array_equal(a[2], b[2])


def test_single_part_u_ramp_matches_iuv():
    res = 32
    ramp = np.broadcast_to(np.linspace(0.0, 1.0, res)[None, :, None], (res, res, 3))
    spec = sd.make_spec(n_parts=1, n_keypoints=2, textures=ramp[None].copy())
    image, iuv, _ = sd.render_figure(spec, [], facing=0.1)
    fg = iuv.part > 0
    assert fg.sum() > 50
    for c in range(3):
        assert np.max(np.abs(image[fg, c] - iuv.u[fg])) < 1e-6


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), facing=st.floats(0.0, 0.5))
def test_correspondence_exactness(seed, facing):
    rng = np.random.default_rng(seed)
    spec = sd.make_spec(rng, texture_res=16)
    image, iuv, _ = sd.render_figure(spec, sd.random_pose(rng, spec), facing)
    for i in range(spec.n_parts):
        sel = iuv.part == i + 1
        if sel.any():
            resampled = sd.sample_chart(spec.textures[i], iuv.u[sel], iuv.v[sel])
            assert np.max(np.abs(resampled - image[sel])) <= 1e-6


def test_later_parts_paint_over_earlier_ones():
    spec = sd.make_spec()
    _, iuv, _ = sd.render_figure(spec, _zero_pose(spec))
    # the head (part index 1) overlaps the torso at the neck and wins there
    origin, _ = sd._joint_frames(spec, _zero_pose(spec))
    x, y = np.rint(origin[1]).astype(int)
    assert iuv.part[y, x] == 2


def test_iuv_range_and_background(toy_dataset):
    for s in toy_dataset:
        for view in (s.source, s.target):
            assert set(np.unique(view.iuv.part)) <= set(range(toy_dataset.n_parts + 1))
            fg = view.iuv.part > 0
            assert np.all((view.iuv.u[fg] >= 0) & (view.iuv.u[fg] <= 1))
            assert np.all((view.iuv.v[fg] >= 0) & (view.iuv.v[fg] <= 1))
            assert np.all(view.image[~fg] == 0.0)


def test_pair_counting():
    ds = sd.generate_dataset(0, 2, 3)
    assert len(ds) == 18
    assert sum(s.is_self_pair for s in ds) == 6


def test_generate_is_deterministic():
    a, b = sd.generate_dataset(5, 2, 2), sd.generate_dataset(5, 2, 2)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.source.image, sb.source.image)
        assert np.array_equal(sa.target.iuv.part, sb.target.iuv.part)
    c = sd.generate_dataset(6, 2, 2)
    assert not np.array_equal(a[0].source.image, c[0].source.image)


def test_items_do_not_depend_on_dataset_size():
    small, big = sd.generate_dataset(2, 2, 2), sd.generate_dataset(2, 4, 2)
    assert np.array_equal(small.items[1].views[0].image, big.items[1].views[0].image)


def test_pairs_share_item_and_neighbors_exclude_source(toy_dataset):
    for s in toy_dataset:
        assert s.source is toy_dataset.items[s.item_id].views[s.source_index]
        assert s.target is toy_dataset.items[s.item_id].views[s.target_index]
        assert len(s.neighbors) == 2
        assert all(n is not s.source for n in s.neighbors)
        assert s.source.keypoints.shape == (18, 2)


def test_self_pair_iuv_identical(toy_dataset):
    for s in toy_dataset.pairs(self_only=True):
        assert np.array_equal(s.source.iuv.part, s.target.iuv.part)
        assert np.array_equal(s.source.iuv.u, s.target.iuv.u)


def test_generate_validation():
    with pytest.raises(ValueError):
        sd.generate_dataset(0, 0, 2)
    with pytest.raises(ValueError):
        sd.generate_dataset(0, 2, 1)


def test_split_holds_out_last_items(desk_dataset):
    train, test = desk_dataset.split(2)
    assert [it.item_id for it in test.items] == [8, 9]
    assert len(train.items) == 8
    with pytest.raises(ValueError):
        desk_dataset.split(10)


@pytest.mark.parametrize(
    "parts, message",
    [
        ((PartSpec(10, 0, -1, 0.0),), "size"),
        ((PartSpec(10, 4, -1, 0.0), PartSpec(5, 3, -1, 0.0)), "root"),
        ((PartSpec(10, 4, -1, 0.0), PartSpec(5, 3, 2, 0.0), PartSpec(5, 3, 1, 0.0)), "cycle"),
    ],
)
def test_degenerate_specs_rejected(parts, message):
    spec = sd.FigureSpec(parts, np.zeros((len(parts), 4, 4, 3)), n_keypoints=1)
    with pytest.raises(SpecError, match=message):
        spec.validate()
    with pytest.raises(SpecError):
        sd.render_figure(spec, np.zeros(sum(p.parent >= 0 for p in parts)))


def test_texture_range_and_pose_checked():
    spec = sd.make_spec()
    bad = sd.FigureSpec(spec.parts, spec.textures * 2.0)
    with pytest.raises(SpecError):
        bad.validate()
    with pytest.raises(SpecError):
        sd.render_figure(spec, np.zeros(3))
    with pytest.raises(SpecError):
        sd.render_figure(spec, np.full(7, np.nan))


@pytest.mark.parametrize("n_parts", [1, 3, 8, 12, 24])
def test_part_counts_render(n_parts):
    spec = sd.make_spec(n_parts=n_parts, n_keypoints=min(18, 3 * n_parts), texture_res=8)
    _, iuv, kp = sd.render_figure(spec, _zero_pose(spec))
    assert iuv.part.max() <= n_parts
    assert kp.shape == (min(18, 3 * n_parts), 2)


# -- conditioning ---------------------------------------------------------


@pytest.mark.parametrize("mode, count", [("mask", 4), ("segmentation", 27), ("keypoints", 21), ("iuv", 9)])
def test_plane_counts_full_scale(mode, count):
    assert sd.plane_count(mode, n_parts=24, n_keypoints=18) == count


def test_plane_counts_other():
    assert sd.plane_count("segmentation", n_parts=8) == 11
    assert sd.plane_count("onehot_iuv", n_parts=24) == 3 + 2 * 27
    assert sd.cross_plane_count("keypoints", "keypoints", 18) == 3 + 18 + 18
    with pytest.raises(ValueError):
        sd.plane_count("depth")


@pytest.mark.parametrize("mode", sd.CONDITIONING_MODES)
def test_encoded_plane_count_matches(toy_dataset, mode):
    s = toy_dataset[1]
    planes = sd.encode_conditioning(s, mode)
    assert planes.shape == (sd.plane_count(mode, toy_dataset.n_parts), 64, 64)
    assert np.array_equal(planes[:3], np.transpose(s.source.image, (2, 0, 1)))
    assert np.all(np.isfinite(planes))


def test_mask_plane_is_target_foreground(toy_dataset):
    s = toy_dataset[1]
    planes = sd.encode_conditioning(s, "mask")
    assert np.array_equal(planes[3], (s.target.iuv.part > 0).astype(float))


def test_iuv_planes_are_source_then_target(toy_dataset):
    s = toy_dataset[1]
    planes = sd.encode_conditioning(s, "iuv")
    assert np.array_equal(planes[3:6], s.source.iuv.planes(toy_dataset.n_parts))
    assert np.array_equal(planes[6:9], s.target.iuv.planes(toy_dataset.n_parts))


def test_keypoint_heatmaps_peak_at_keypoints():
    kp = np.array([[10.0, 20.0], [40.0, 5.0]])
    maps = sd.keypoint_heatmaps(kp, (64, 64), sigma=2.0)
    assert maps.shape == (2, 64, 64)
    for k, (x, y) in enumerate(kp):
        assert np.unravel_index(np.argmax(maps[k]), (64, 64)) == (int(y), int(x))
        assert maps[k].max() == pytest.approx(1.0)


def test_unknown_mode_rejected(toy_dataset):
    with pytest.raises(ValueError):
        sd.encode_conditioning(toy_dataset[0], "depth")


def test_cross_encoding(toy_dataset):
    s = toy_dataset[1]
    for src in sd.POSE_REPRESENTATIONS:
        for tgt in sd.POSE_REPRESENTATIONS:
            planes = sd.encode_cross(s, src, tgt)
            assert planes.shape[0] == sd.cross_plane_count(src, tgt, 18)


# -- persistence ------------------------------------------------------------


def test_dataset_round_trip(tmp_path, toy_dataset):
    sd.save_dataset(toy_dataset, tmp_path)
    assert (tmp_path / "metadata.txt").exists()
    back = sd.load_dataset(tmp_path)
    assert len(back) == len(toy_dataset)
    for a, b in zip(toy_dataset.items, back.items):
        for va, vb in zip(a.views, b.views):
            assert np.array_equal(va.iuv.part, vb.iuv.part)
            assert np.max(np.abs(va.iuv.u - vb.iuv.u)) <= 0.5 / 65535 + 1e-12
            assert np.max(np.abs(va.image - vb.image)) <= 1 / 255 + 1e-12
            assert np.allclose(va.keypoints, vb.keypoints)
            assert np.allclose(va.pose, vb.pose)


def test_iuv_raster_is_16_bit(toy_dataset):
    iuv = toy_dataset[0].source.iuv
    raster = sd.encode_iuv_raster(iuv)
    assert raster.dtype == np.uint16 and raster.shape == iuv.shape + (3,)
    back = sd.decode_iuv_raster(raster)
    assert np.array_equal(back.part, iuv.part)


def test_view_split_holds_out_poses(toy_dataset):
    train, test = toy_dataset.split_views(1)
    assert all(len(it.views) == 2 for it in train.items)
    assert len(test) == 3 * 2  # per item: two kept sources to the held-out pose
    assert all(s.target_index == 2 and s.source_index < 2 for s in test)
    with pytest.raises(ValueError):
        toy_dataset.split_views(2)
