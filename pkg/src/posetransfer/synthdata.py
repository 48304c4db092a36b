"""Procedural articulated 2-D figures with exact dense correspondences.

A figure is a tree of rigid parts. Each part is a cylinder seen side-on: a
rectangle of ``length x width`` pixels whose surface chart is indexed by
``u`` along the axis and ``v`` around the circumference. A view shows half of
the circumference, starting at ``facing`` (0 = front half, 0.5 = back half),
so two views with different facings observe different texels.

The renderer samples the part's texture chart at exactly the (u, v) it writes
into the IUV map, which makes every rendered sample its own correspondence
oracle.
"""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import kvfile
from .kernels import bilinear_taps

BACKGROUND = 0.0
DATASET_FORMAT_VERSION = 1
CONDITIONING_MODES = ("mask", "segmentation", "keypoints", "iuv", "onehot_iuv")
POSE_REPRESENTATIONS = ("keypoints", "densepose")


class SpecError(ValueError):
    """Invalid figure specification or rendering request."""


@dataclass(frozen=True)
class PartSpec:
    length: float
    width: float
    parent: int
    rest_angle: float
    anchor: float = 1.0  # fraction along the parent's axis
    offset: float = 0.0  # lateral offset, in units of the parent's width
    pose_range: float = 0.5  # half-width of the random joint-angle range


@dataclass
class FigureSpec:
    parts: tuple
    textures: np.ndarray  # (n_parts, R, R, 3) in [-1, 1]
    canvas: tuple = (64, 64)
    root_position: tuple = (32.0, 14.0)  # (x, y) of the root joint
    n_keypoints: int = 18

    @property
    def n_parts(self):
        return len(self.parts)

    @property
    def texture_res(self):
        return self.textures.shape[1]

    def validate(self):
        n = self.n_parts
        if n < 1:
            raise SpecError("figure needs at least one part")
        roots = [i for i, p in enumerate(self.parts) if p.parent < 0]
        if len(roots) != 1:
            raise SpecError(f"skeleton must have exactly one root, found {len(roots)}")
        for i, p in enumerate(self.parts):
            if not (p.length > 0 and p.width > 0):
                raise SpecError(f"part {i} has zero or negative size")
            if p.parent >= n:
                raise SpecError(f"part {i} has out-of-range parent {p.parent}")
        for i in range(n):
            seen, j = set(), i
            while j >= 0:
                if j in seen:
                    raise SpecError(f"skeleton has a cycle through part {i}")
                seen.add(j)
                j = self.parts[j].parent
        tex = np.asarray(self.textures)
        if tex.ndim != 4 or tex.shape[0] != n or tex.shape[1] != tex.shape[2] or tex.shape[3] != 3:
            raise SpecError(f"textures must have shape ({n}, R, R, 3), got {tex.shape}")
        if tex.shape[1] < 2:
            raise SpecError("texture resolution must be at least 2")
        if not np.all(np.isfinite(tex)) or tex.min() < -1 or tex.max() > 1:
            raise SpecError("textures must be finite and within [-1, 1]")
        h, w = self.canvas
        if h < 1 or w < 1:
            raise SpecError(f"bad canvas {self.canvas}")
        if not 1 <= self.n_keypoints <= 3 * n:
            raise SpecError(f"n_keypoints must lie in [1, {3 * n}]")
        return self

    def depth_order(self):
        # parents before children so joint positions are resolved first;
        # painting order is part index (higher index drawn on top)
        order, placed = [], set()
        while len(order) < self.n_parts:
            for i, p in enumerate(self.parts):
                if i not in placed and (p.parent < 0 or p.parent in placed):
                    order.append(i)
                    placed.add(i)
        return order


@dataclass
class IUVMap:
    part: np.ndarray  # (H, W) int, 0 = background
    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self):
        return self.part.shape

    def planes(self, n_parts):
        """(3, H, W) float planes: part / n_parts, u, v (zero on background)."""
        return np.stack([self.part / float(n_parts), self.u, self.v]).astype(np.float64)

    def validate(self, n_parts=None):
        fg = self.part > 0
        if self.part.min(initial=0) < 0:
            raise SpecError("negative part index in IUV map")
        if n_parts is not None and self.part.max(initial=0) > n_parts:
            raise SpecError(
                f"IUV part index {int(self.part.max())} exceeds chart count {n_parts}"
            )
        if np.isnan(self.u[fg]).any() or np.isnan(self.v[fg]).any():
            raise SpecError("NaN UV coordinate on a foreground pixel")
        return self

    def copy(self):
        return IUVMap(self.part.copy(), self.u.copy(), self.v.copy())


@dataclass
class View:
    pose: np.ndarray
    facing: float
    image: np.ndarray  # (H, W, 3) in [-1, 1]
    iuv: IUVMap
    keypoints: np.ndarray  # (K, 2) pixel (x, y)


@dataclass
class Item:
    item_id: int
    spec: FigureSpec
    views: list


@dataclass
class PairedSample:
    source: View
    target: View
    item_id: int
    source_index: int
    target_index: int
    neighbors: list = field(default_factory=list)  # views of the item other than the source
    n_parts: int = 8

    @property
    def is_self_pair(self):
        return self.source_index == self.target_index


def default_parts(canvas=(64, 64), n_parts=8):
    """Humanoid skeleton scaled to the canvas height.

    Eight parts form torso, head, two two-segment arms and two legs. Other
    part counts extend the limbs with extra chained segments (up to any N),
    or truncate the list for N < 8.
    """
    s = canvas[0] / 64.0
    half_pi = np.pi / 2
    base = [
        PartSpec(22 * s, 14 * s, -1, half_pi),
        PartSpec(9 * s, 9 * s, 0, np.pi, anchor=0.0, pose_range=0.3),
        PartSpec(12 * s, 5 * s, 0, 0.35, anchor=0.12, offset=-0.5, pose_range=1.2),
        PartSpec(11 * s, 4 * s, 2, 0.0, pose_range=1.0),
        PartSpec(12 * s, 5 * s, 0, -0.35, anchor=0.12, offset=0.5, pose_range=1.2),
        PartSpec(11 * s, 4 * s, 4, 0.0, pose_range=1.0),
        PartSpec(20 * s, 6 * s, 0, 0.12, anchor=1.0, offset=-0.25, pose_range=0.4),
        PartSpec(20 * s, 6 * s, 0, -0.12, anchor=1.0, offset=0.25, pose_range=0.4),
    ]
    if n_parts <= len(base):
        return tuple(base[:n_parts])
    parts = list(base)
    # extra segments hang off the previous limb ends, shrinking as they go
    tips = [3, 5, 6, 7, 1]
    k = 0
    while len(parts) < n_parts:
        parent = tips[k % len(tips)]
        pp = parts[parent]
        parts.append(
            PartSpec(max(pp.length * 0.6, 2.0), max(pp.width * 0.8, 2.0), parent, 0.0, pose_range=0.6)
        )
        tips[k % len(tips)] = len(parts) - 1
        k += 1
    return tuple(parts)


def random_textures(rng, n_parts, res=64):
    """Smooth striped charts drawn from a small per-person palette.

    Parts share palette colours (top garment, bottom garment, skin), so
    appearance on an unseen part is predictable from the visible ones.
    """
    palette = rng.uniform(-0.75, 0.75, size=(3, 3))
    role = np.array([0, 2, 0, 2, 0, 2, 1, 1])
    g = np.linspace(0.0, 1.0, res)
    uu, vv = np.meshgrid(g, g)  # chart indexed [v, u]
    tex = np.empty((n_parts, res, res, 3))
    for i in range(n_parts):
        base = palette[role[i % len(role)]]
        accent = palette[(role[i % len(role)] + 1) % 3]
        freq = rng.integers(1, 4)
        phase = rng.uniform(0, 2 * np.pi)
        along_v = rng.random() < 0.5
        coord = vv if along_v else uu
        stripe = 0.5 + 0.5 * np.sin(2 * np.pi * freq * coord + phase)
        mix = 0.35 * stripe[..., None]
        shade = 0.1 * np.cos(np.pi * vv)[..., None]
        tex[i] = (1 - mix) * base + mix * accent + shade
    return np.clip(tex, -1.0, 1.0)


def make_spec(rng=None, canvas=(64, 64), n_parts=8, texture_res=64, n_keypoints=18, textures=None):
    parts = default_parts(canvas, n_parts)
    if textures is None:
        rng = np.random.default_rng(0) if rng is None else rng
        textures = random_textures(rng, n_parts, texture_res)
    h, w = canvas
    spec = FigureSpec(
        parts=parts,
        textures=np.asarray(textures, dtype=np.float64),
        canvas=(h, w),
        root_position=(w / 2.0, 14.0 * h / 64.0),
        n_keypoints=n_keypoints,
    )
    return spec.validate()


def random_pose(rng, spec):
    ranges = np.array([p.pose_range for p in spec.parts if p.parent >= 0])
    return rng.uniform(-1.0, 1.0, size=ranges.shape) * ranges


def _joint_frames(spec, pose):
    n = spec.n_parts
    nonroot = [i for i, p in enumerate(spec.parts) if p.parent >= 0]
    angles = np.zeros(n)
    angles[nonroot] = pose
    theta = np.zeros(n)
    origin = np.zeros((n, 2))
    for i in spec.depth_order():
        p = spec.parts[i]
        if p.parent < 0:
            theta[i] = p.rest_angle
            origin[i] = spec.root_position
            continue
        q = spec.parts[p.parent]
        d = np.array([np.cos(theta[p.parent]), np.sin(theta[p.parent])])
        nrm = np.array([-d[1], d[0]])
        origin[i] = origin[p.parent] + p.anchor * q.length * d + p.offset * q.width * nrm
        theta[i] = theta[p.parent] + p.rest_angle + angles[i]
    return origin, theta


def sample_chart(texture, u, v):
    """Bilinearly sample a single (R, R, 3) chart at continuous (u, v) in [0, 1]."""
    res = texture.shape[0]
    rows, cols, w = bilinear_taps(u * (res - 1), v * (res - 1), res)
    fx = (w[:, 1] + w[:, 3])[:, None]
    fy = (w[:, 2] + w[:, 3])[:, None]
    t = texture[rows, cols]
    # lerp form: exact on constant charts
    top = t[:, 0] + fx * (t[:, 1] - t[:, 0])
    bottom = t[:, 2] + fx * (t[:, 3] - t[:, 2])
    return top + fy * (bottom - top)


def render_figure(spec, pose, facing=0.0):
    """Render ``spec`` in ``pose``; return ``(image, iuv, keypoints)``.

    ``pose`` holds one joint angle (radians, relative to the rest pose) per
    non-root part, in part order. Pixel centres sit at integer coordinates.
    """
    spec.validate()
    pose = np.asarray(pose, dtype=np.float64).ravel()
    n_joints = sum(1 for p in spec.parts if p.parent >= 0)
    if pose.shape[0] != n_joints:
        raise SpecError(f"pose needs {n_joints} angles, got {pose.shape[0]}")
    if not np.all(np.isfinite(pose)):
        raise SpecError("pose angles must be finite")
    if not 0.0 <= facing <= 0.5:
        raise SpecError("facing must lie in [0, 0.5]")

    h, w = spec.canvas
    origin, theta = _joint_frames(spec, pose)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    part = np.zeros((h, w), dtype=np.int64)
    u = np.zeros((h, w))
    v = np.zeros((h, w))
    for i in range(spec.n_parts):
        p = spec.parts[i]
        d = np.array([np.cos(theta[i]), np.sin(theta[i])])
        dx, dy = xs - origin[i, 0], ys - origin[i, 1]
        s = dx * d[0] + dy * d[1]
        t = -dx * d[1] + dy * d[0]
        half = p.width / 2.0
        inside = (s >= 0) & (s <= p.length) & (np.abs(t) <= half)
        part[inside] = i + 1
        u[inside] = s[inside] / p.length
        around = np.arcsin(np.clip(t[inside] / half, -1.0, 1.0)) / np.pi + 0.5
        v[inside] = facing + 0.5 * around

    image = np.full((h, w, 3), BACKGROUND)
    fg = part > 0
    for i in range(spec.n_parts):
        sel = part == i + 1
        if sel.any():
            image[sel] = sample_chart(spec.textures[i], u[sel], v[sel])
    u[~fg] = 0.0
    v[~fg] = 0.0
    keypoints = _keypoints(spec, origin, theta)
    return image, IUVMap(part, u, v), keypoints


def _keypoints(spec, origin, theta):
    lengths = np.array([p.length for p in spec.parts])
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    ends = origin + lengths[:, None] * direction
    mids = origin + 0.5 * lengths[:, None] * direction
    candidates = np.concatenate([origin, ends, mids])
    return candidates[: spec.n_keypoints].copy()


class Dataset:
    """All ordered view pairs of a set of rendered items.

    Indexing yields :class:`PairedSample`; ``len`` is the pair count.
    """

    def __init__(self, items, seed=None, views_per_item=None):
        self.items = list(items)
        self.seed = seed
        self.views_per_item = views_per_item
        self._pairs = []
        for it in self.items:
            k = len(it.views)
            for a in range(k):
                for b in range(k):
                    self._pairs.append((it, a, b))

    @property
    def n_parts(self):
        return self.items[0].spec.n_parts

    @property
    def canvas(self):
        return self.items[0].spec.canvas

    @property
    def n_keypoints(self):
        return self.items[0].spec.n_keypoints

    def __len__(self):
        return len(self._pairs)

    def __getitem__(self, idx):
        it, a, b = self._pairs[idx]
        return PairedSample(
            source=it.views[a],
            target=it.views[b],
            item_id=it.item_id,
            source_index=a,
            target_index=b,
            neighbors=[vw for j, vw in enumerate(it.views) if j != a],
            n_parts=it.spec.n_parts,
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def subset(self, item_ids):
        keep = set(item_ids)
        return Dataset([it for it in self.items if it.item_id in keep], self.seed, self.views_per_item)

    def split(self, n_test):
        """Hold out the last ``n_test`` items; returns ``(train, test)``."""
        if not 0 <= n_test < len(self.items):
            raise ValueError("n_test must leave at least one training item")
        ids = [it.item_id for it in self.items]
        cut = len(ids) - n_test
        return self.subset(ids[:cut]), self.subset(ids[cut:])

    def split_views(self, n_test_views):
        """Hold out each item's last ``n_test_views`` poses.

        Returns ``(train, test_pairs)``: a dataset over the remaining views and
        the samples that carry a kept view to a held-out pose.
        """
        k = min(len(it.views) for it in self.items)
        if not 1 <= n_test_views <= k - 2:
            raise ValueError(f"n_test_views must be in [1, {k - 2}] so training items keep two views")
        train = Dataset(
            [Item(it.item_id, it.spec, it.views[: len(it.views) - n_test_views]) for it in self.items],
            self.seed, self.views_per_item,
        )
        test = []
        for i in range(len(self)):
            it, a, b = self._pairs[i]
            cut = len(it.views) - n_test_views
            if a < cut <= b:
                test.append(self[i])
        return train, test

    def pairs(self, cross_only=False, self_only=False):
        out = []
        for i in range(len(self)):
            _, a, b = self._pairs[i]
            if (cross_only and a == b) or (self_only and a != b):
                continue
            out.append(self[i])
        return out


def generate_dataset(seed, n_items, views_per_item, spec_template=None):
    """Render ``n_items`` textured figures in ``views_per_item`` random poses each.

    Each item gets its own textures and poses from a child seed of ``seed``,
    so items are independent of how many others are generated.
    """
    if n_items < 1:
        raise ValueError("n_items must be >= 1")
    if views_per_item < 2:
        raise ValueError("views_per_item must be >= 2")
    template = spec_template if spec_template is not None else make_spec()
    template.validate()
    children = np.random.SeedSequence(seed).spawn(n_items)
    items = []
    for item_id, child in enumerate(children):
        rng = np.random.default_rng(child)
        textures = random_textures(rng, template.n_parts, template.texture_res)
        spec = replace(template, textures=textures)
        views = []
        for _ in range(views_per_item):
            pose = random_pose(rng, spec)
            facing = float(rng.uniform(0.0, 0.5))
            image, iuv, kp = render_figure(spec, pose, facing)
            views.append(View(pose, facing, image, iuv, kp))
        items.append(Item(item_id, spec, views))
    return Dataset(items, seed=seed, views_per_item=views_per_item)


# -- conditioning ------------------------------------------------------------


def keypoint_heatmaps(keypoints, shape, sigma=2.0):
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    kp = np.asarray(keypoints, dtype=np.float64)
    d2 = (xs[None] - kp[:, 0, None, None]) ** 2 + (ys[None] - kp[:, 1, None, None]) ** 2
    return np.exp(-d2 / (2.0 * sigma**2))


def onehot_parts(part, n_parts, with_background=False):
    labels = np.arange(0 if with_background else 1, n_parts + 1)
    return (part[None] == labels[:, None, None]).astype(np.float64)


def plane_count(mode, n_parts=24, n_keypoints=18):
    """Number of input planes produced by :func:`encode_conditioning`."""
    counts = {
        "mask": 3 + 1,
        "segmentation": 3 + n_parts,
        "keypoints": 3 + n_keypoints,
        "iuv": 3 + 3 + 3,
        "onehot_iuv": 3 + 2 * (n_parts + 1 + 2),
    }
    if mode not in counts:
        raise ValueError(f"unknown conditioning mode {mode!r}; expected one of {CONDITIONING_MODES}")
    return counts[mode]


def encode_conditioning(sample, mode, sigma=2.0):
    """Stack the source image with a pose representation, channel-first.

    Only ``iuv`` and ``onehot_iuv`` carry the source pose; the other modes
    encode the target pose alone (3 + 1, 3 + N, 3 + K planes).
    """
    n = sample.n_parts
    img = np.transpose(sample.source.image, (2, 0, 1))
    tgt = sample.target
    if mode == "mask":
        rep = [(tgt.iuv.part > 0)[None].astype(np.float64)]
    elif mode == "segmentation":
        rep = [onehot_parts(tgt.iuv.part, n)]
    elif mode == "keypoints":
        rep = [keypoint_heatmaps(tgt.keypoints, tgt.iuv.shape, sigma)]
    elif mode == "iuv":
        rep = [sample.source.iuv.planes(n), tgt.iuv.planes(n)]
    elif mode == "onehot_iuv":
        rep = []
        for vw in (sample.source, tgt):
            rep.append(onehot_parts(vw.iuv.part, n, with_background=True))
            rep.append(np.stack([vw.iuv.u, vw.iuv.v]))
    else:
        raise ValueError(f"unknown conditioning mode {mode!r}; expected one of {CONDITIONING_MODES}")
    return np.concatenate([img] + rep, axis=0)


def encode_cross(sample, source_rep, target_rep, sigma=2.0):
    """Image plus independently chosen source and target pose representations."""
    planes = [np.transpose(sample.source.image, (2, 0, 1))]
    for vw, rep in ((sample.source, source_rep), (sample.target, target_rep)):
        if rep == "keypoints":
            planes.append(keypoint_heatmaps(vw.keypoints, vw.iuv.shape, sigma))
        elif rep == "densepose":
            planes.append(vw.iuv.planes(sample.n_parts))
        else:
            raise ValueError(f"unknown pose representation {rep!r}")
    return np.concatenate(planes, axis=0)


def cross_plane_count(source_rep, target_rep, n_keypoints=18):
    per = {"keypoints": n_keypoints, "densepose": 3}
    return 3 + per[source_rep] + per[target_rep]


# -- persistence -------------------------------------------------------------


def _to_u8(image):
    return np.clip(np.rint((image + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _from_u8(arr):
    return arr.astype(np.float64) / 127.5 - 1.0


def write_png(path, array):
    """Write an (H, W, 3) RGB array as PNG; float arrays are read as [-1, 1] images."""
    import cv2

    array = np.asarray(array)
    if np.issubdtype(array.dtype, np.floating):
        array = _to_u8(array)

    if not cv2.imwrite(str(path), np.ascontiguousarray(array[..., ::-1])):
        raise OSError(f"failed to write {path}")


def read_png(path):
    import cv2

    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise OSError(f"failed to read {path}")
    return arr[..., ::-1]


def encode_iuv_raster(iuv):
    return np.stack(
        [
            iuv.part.astype(np.uint16),
            np.rint(iuv.u * 65535).astype(np.uint16),
            np.rint(iuv.v * 65535).astype(np.uint16),
        ],
        axis=-1,
    )


def decode_iuv_raster(arr):
    arr = np.asarray(arr)
    return IUVMap(arr[..., 0].astype(np.int64), arr[..., 1] / 65535.0, arr[..., 2] / 65535.0)


def _fmt(values):
    return ",".join(repr(float(x)) for x in np.ravel(values))


def save_dataset(dataset, root):
    """Persist a dataset as ``metadata.txt`` plus per-view PNG rasters.

    Images are 8-bit RGB; IUV maps are 16-bit RGB holding the part index,
    ``u * 65535`` and ``v * 65535``; textures are one 8-bit tile strip per item.
    """
    os.makedirs(root, exist_ok=True)
    spec = dataset.items[0].spec
    meta = {
        "format_version": DATASET_FORMAT_VERSION,
        "seed": dataset.seed,
        "n_items": len(dataset.items),
        "views_per_item": dataset.views_per_item or len(dataset.items[0].views),
        "canvas": f"{spec.canvas[0]},{spec.canvas[1]}",
        "root_position": _fmt(spec.root_position),
        "n_parts": spec.n_parts,
        "n_keypoints": spec.n_keypoints,
        "texture_res": spec.texture_res,
    }
    for i, p in enumerate(spec.parts):
        meta[f"part.{i}"] = _fmt([p.length, p.width, p.parent, p.rest_angle, p.anchor, p.offset, p.pose_range])
    for it in dataset.items:
        meta[f"item.{it.item_id}.views"] = len(it.views)
        strip = np.concatenate(list(it.spec.textures), axis=1)
        write_png(os.path.join(root, f"item{it.item_id:04d}_texture.png"), _to_u8(strip))
        for k, vw in enumerate(it.views):
            key = f"item.{it.item_id}.view.{k}"
            meta[f"{key}.pose"] = _fmt(vw.pose)
            meta[f"{key}.facing"] = repr(float(vw.facing))
            meta[f"{key}.keypoints"] = _fmt(vw.keypoints)
            stem = os.path.join(root, f"item{it.item_id:04d}_view{k:02d}")
            write_png(stem + "_image.png", _to_u8(vw.image))
            write_png(stem + "_iuv.png", encode_iuv_raster(vw.iuv))
    kvfile.dump(meta, os.path.join(root, "metadata.txt"), header="posetransfer synthetic dataset")
    return root


def load_dataset(root):
    meta = kvfile.load(os.path.join(root, "metadata.txt"))
    version = int(meta["format_version"])
    if version != DATASET_FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format version {version}")
    n_parts = int(meta["n_parts"])
    parts = []
    for i in range(n_parts):
        f = kvfile.floats(meta[f"part.{i}"])
        parts.append(PartSpec(f[0], f[1], int(f[2]), f[3], f[4], f[5], f[6]))
    canvas = tuple(int(x) for x in meta["canvas"].split(","))
    res = int(meta["texture_res"])
    seed = meta.get("seed")
    items = []
    for item_id in range(int(meta["n_items"])):
        strip = _from_u8(read_png(os.path.join(root, f"item{item_id:04d}_texture.png")))
        textures = np.stack([strip[:, k * res : (k + 1) * res] for k in range(n_parts)])
        spec = FigureSpec(
            parts=tuple(parts),
            textures=np.clip(textures, -1, 1),
            canvas=canvas,
            root_position=tuple(kvfile.floats(meta["root_position"])),
            n_keypoints=int(meta["n_keypoints"]),
        )
        views = []
        for k in range(int(meta[f"item.{item_id}.views"])):
            key = f"item.{item_id}.view.{k}"
            stem = os.path.join(root, f"item{item_id:04d}_view{k:02d}")
            image = _from_u8(read_png(stem + "_image.png"))
            iuv = decode_iuv_raster(read_png(stem + "_iuv.png"))
            kp = np.array(kvfile.floats(meta[f"{key}.keypoints"])).reshape(-1, 2)
            views.append(
                View(np.array(kvfile.floats(meta[f"{key}.pose"])), float(meta[f"{key}.facing"]), image, iuv, kp)
            )
        items.append(Item(item_id, spec, views))
    return Dataset(items, seed=None if seed in (None, "None") else int(seed), views_per_item=int(meta["views_per_item"]))
