"""Bank of artificial specular-light patches.

Real highlights are segmented from corpus frames, cropped as
grayscale-on-black patches with a random intensity scaling, and then
expanded with flips, random scaling and random rotation into a bank of
``12 * crop_count`` patches (3,600 for 300 crops).
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import BoxOutOfBounds, EmptyPatch, FactorOutOfRange, InsufficientCandidates
from .raster import PixelBox, as_rgb, channel_min_max, load_gray, luma, save_gray

SCALE_RANGE = (0.8, 1.2)
ANGLE_RANGE = (-30.0, 30.0)
INTENSITY_RANGE = (0.3, 1.0)
DEFAULT_NMS_IOU = 0.3
BANK_SCHEMA = "wlsr-bank/1"

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ThresholdParams:
    """White-pixel predicate: bright enough and close enough to gray."""
    min_channel: int = 200
    max_chroma_spread: int = 30

    def __post_init__(self):
        for name in ("min_channel", "max_chroma_spread"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} must be in [0, 255], got {v}")


@dataclass(frozen=True)
class Provenance:
    source_id: str
    source_box: PixelBox
    chain: tuple = ()
    round: int = 0

    def then(self, op, **params):
        return replace(self, chain=self.chain + ({"op": op, **params},))

    def to_json(self):
        return {
            "source_id": self.source_id,
            "source_box": list(map(int, self.source_box)),
            "round": self.round,
            "chain": [dict(step) for step in self.chain],
        }

    @classmethod
    def from_json(cls, d):
        return cls(d["source_id"], PixelBox(*d["source_box"]),
                   tuple(dict(s) for s in d["chain"]), d["round"])


@dataclass(frozen=True, eq=False)
class LightPatch:
    pixels: np.ndarray  # (H, W) uint8, 0 = background
    provenance: Provenance = field(
        default_factory=lambda: Provenance("", PixelBox(0, 0, 1, 1)))

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8, order="C")
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"patch pixels must be a non-empty 2-D array, got {px.shape}")
        if not px.any():
            raise EmptyPatch("a light patch needs at least one nonzero pixel")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LightPatch):
            return NotImplemented
        return (np.array_equal(self.pixels, other.pixels)
                and self.provenance == other.provenance)

    __hash__ = None


@dataclass(eq=False)
class LightBank:
    patches: list
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.patches)

    def __getitem__(self, i):
        return self.patches[i]

    def round_counts(self):
        counts = {}
        for p in self.patches:
            counts[p.provenance.round] = counts.get(p.provenance.round, 0) + 1
        return counts


# -- segmentation and candidate boxes ---------------------------------------

def segment_specular(image, params: ThresholdParams = ThresholdParams()) -> np.ndarray:
    lo, hi = channel_min_max(as_rgb(image))
    return (lo >= params.min_channel) & ((hi - lo) <= params.max_chroma_spread)


def find_contours(mask) -> list:
    """8-connected components of ``mask``.

    Each component is an ``(n, 2)`` int array of ``(x, y)`` coordinates in
    row-major order; components are ordered by their first pixel in
    raster order.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    flat = np.flatnonzero(labels)
    lab = labels.ravel()[flat]
    order = np.argsort(lab, kind="stable")
    flat = flat[order]
    splits = np.cumsum(np.bincount(lab, minlength=n + 1)[1:])[:-1]
    w = mask.shape[1]
    xy = np.stack([flat % w, flat // w], axis=1)
    return np.split(xy, splits)


def bounding_boxes(components) -> list:
    boxes = []
    for comp in components:
        c = np.asarray(comp).reshape(-1, 2)
        if len(c) == 0:
            continue
        x0, y0 = c.min(axis=0)
        x1, y1 = c.max(axis=0)
        boxes.append(PixelBox(int(x0), int(y0), int(x1) + 1, int(y1) + 1))
    return boxes


def _nms_key(b):
    return (-b.area, b.y_min, b.x_min, b.y_max, b.x_max)


def nms(boxes, iou_threshold=DEFAULT_NMS_IOU) -> list:
    """Greedy NMS scored by box area.

    Visits boxes largest first (ties by ``(y_min, x_min)``) and keeps a box
    iff its IoU with every kept box is at most ``iou_threshold``.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in [0, 1]")
    ordered = sorted(boxes, key=_nms_key)
    if len(ordered) <= 1:
        return list(ordered)
    arr = np.array(ordered, dtype=np.int64).reshape(-1, 4)
    areas = (arr[:, 2] - arr[:, 0]) * (arr[:, 3] - arr[:, 1])
    kept = []
    for i in range(len(arr)):
        if kept:
            k = np.array(kept)
            iw = np.minimum(arr[k, 2], arr[i, 2]) - np.maximum(arr[k, 0], arr[i, 0])
            ih = np.minimum(arr[k, 3], arr[i, 3]) - np.maximum(arr[k, 1], arr[i, 1])
            inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
            ious = inter / (areas[k] + areas[i] - inter)
            if np.any(ious > iou_threshold):
                continue
        kept.append(i)
    return [ordered[i] for i in kept]


def light_boxes(image, params: ThresholdParams = ThresholdParams(),
                iou_threshold=DEFAULT_NMS_IOU, mask=None) -> list:
    """Segment, label, bound and NMS-refine the highlights of one image."""
    if mask is None:
        mask = segment_specular(image, params)
    return nms(component_boxes(mask), iou_threshold)


def component_boxes(mask) -> list:
    """Same as ``bounding_boxes(find_contours(mask))`` without materializing pixel lists."""
    labels, _ = ndimage.label(np.asarray(mask, dtype=bool), structure=_EIGHT_CONNECTED)
    return [PixelBox(sx.start, sy.start, sx.stop, sy.stop)
            for sy, sx in ndimage.find_objects(labels)]


# -- patch operations --------------------------------------------------------

def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def extract_light_patch(image, mask, box: PixelBox, source_id="") -> LightPatch:
    """Crop ``box``; masked pixels keep their luma, the rest become 0.

    Masked pixels whose luma rounds to 0 are stored as 1 so that the patch
    support always equals the mask support.
    """
    rgb = as_rgb(image)
    h, w = rgb.shape[:2]
    box = PixelBox(*map(int, box))
    if not box.is_valid(w, h):
        raise BoxOutOfBounds(f"box {tuple(box)} outside {w}x{h} image")
    sub_mask = np.asarray(mask, dtype=bool)[box.slices()]
    if not sub_mask.any():
        raise EmptyPatch(f"no light pixel inside box {tuple(box)}")
    values = np.clip(luma(rgb[box.slices()]), 1, 255)
    pixels = np.where(sub_mask, values, 0).astype(np.uint8)
    return LightPatch(pixels, Provenance(source_id, box))


def vary_intensity(patch: LightPatch, factor) -> LightPatch:
    lo, hi = INTENSITY_RANGE
    if not lo <= factor <= hi:
        raise FactorOutOfRange(f"intensity factor {factor} outside [{lo}, {hi}]")
    px = patch.pixels
    scaled = np.clip(_round_half_up(px * float(factor)), 1, 255)
    out = np.where(px > 0, scaled, 0).astype(np.uint8)
    return LightPatch(out, patch.provenance.then("intensity", factor=float(factor)))


def flip_horizontal(patch: LightPatch) -> LightPatch:
    return LightPatch(patch.pixels[:, ::-1], patch.provenance.then("flip_h"))


def flip_vertical(patch: LightPatch) -> LightPatch:
    return LightPatch(patch.pixels[::-1, :], patch.provenance.then("flip_v"))


def _bilinear(src, sx, sy, clamp):
    """Sample ``src`` at float coordinates.

    With ``clamp`` the edges are replicated, otherwise samples outside the
    source read as 0. Returns float values.
    """
    h, w = src.shape
    if clamp:
        sx = np.clip(sx, 0, w - 1)
        sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    srcf = src.astype(np.float64)
    out = np.zeros(np.shape(sx), dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            vals = np.zeros(np.shape(sx), dtype=np.float64)
            vals[inside] = srcf[yi[inside], xi[inside]]
            out += wx * wy * vals
    return out


def _quantize(values):
    # clamp rounded-away light to 1: a pixel is 0 only if every source it reads is 0
    q = _round_half_up(values)
    q[(q == 0) & (values > 0)] = 1
    return np.clip(q, 0, 255).astype(np.uint8)


def scale_patch(patch: LightPatch, factor) -> LightPatch:
    """Bilinear rescale; each dimension becomes max(1, round(dim * factor))."""
    h, w = patch.pixels.shape
    nw = max(1, int(_round_half_up(w * factor)))
    nh = max(1, int(_round_half_up(h * factor)))
    prov = patch.provenance.then("scale", factor=float(factor))
    if (nw, nh) == (w, h):
        return LightPatch(patch.pixels, prov)
    ys, xs = np.mgrid[0:nh, 0:nw].astype(np.float64)
    sx = (xs + 0.5) * (w / nw) - 0.5
    sy = (ys + 0.5) * (h / nh) - 0.5
    return LightPatch(_quantize(_bilinear(patch.pixels, sx, sy, clamp=True)), prov)


def rotated_extent(width, height, angle_deg):
    """Canvas size (width, height) holding a width x height box rotated by angle."""
    t = math.radians(angle_deg)
    c, s = abs(math.cos(t)), abs(math.sin(t))
    # epsilon keeps exact integer extents (e.g. angle 0) from growing by one
    nw = math.ceil(width * c + height * s - 1e-9)
    nh = math.ceil(width * s + height * c - 1e-9)
    return max(1, nw), max(1, nh)


def rotate_patch(patch: LightPatch, angle_deg) -> LightPatch:
    """Rotate counter-clockwise (as displayed) about the patch center.

    The canvas grows to the rotated extent; uncovered corners are 0.
    """
    h, w = patch.pixels.shape
    nw, nh = rotated_extent(w, h, angle_deg)
    prov = patch.provenance.then("rotate", angle=float(angle_deg))
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    ys, xs = np.mgrid[0:nh, 0:nw].astype(np.float64)
    ox = xs - (nw - 1) / 2.0
    oy = ys - (nh - 1) / 2.0
    sx = c * ox - s * oy + (w - 1) / 2.0
    sy = s * ox + c * oy + (h - 1) / 2.0
    return LightPatch(_quantize(_bilinear(patch.pixels, sx, sy, clamp=False)), prov)


def random_scale(patch: LightPatch, rng) -> LightPatch:
    return scale_patch(patch, float(rng.uniform(*SCALE_RANGE)))


def random_rotate(patch: LightPatch, rng) -> LightPatch:
    return rotate_patch(patch, float(rng.uniform(*ANGLE_RANGE)))


# -- bank construction -------------------------------------------------------

def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), rng


def collect_candidates(corpus_images, params: ThresholdParams = ThresholdParams(),
                       iou_threshold=DEFAULT_NMS_IOU, source_ids=None) -> list:
    """Every NMS-refined highlight of every corpus image, in corpus order."""
    candidates = []
    for i, image in enumerate(corpus_images):
        sid = source_ids[i] if source_ids is not None else f"img{i:05d}"
        rgb = as_rgb(image)
        mask = segment_specular(rgb, params)
        for box in light_boxes(rgb, params, iou_threshold, mask=mask):
            candidates.append(extract_light_patch(rgb, mask, box, source_id=sid))
    return candidates


def select_spread(patches, count) -> list:
    """Take ``count`` patches spread evenly over the area-descending ranking."""
    ranked = sorted(patches, key=lambda p: -p.pixels.size)
    m = len(ranked)
    return [ranked[(i * m) // count] for i in range(count)]


def expand_schedule(originals, rng) -> list:
    """Three-round transform schedule; returns 12 patches per original.

    Order: originals; round 1 flip_h, flip_v, scale, rotate; round 2
    scale(flip_h), rotate(flip_h), scale(flip_v), rotate(flip_v); round 3
    scale of rotate(originals), rotate(flip_v), rotate(flip_h). Random
    draws are taken block by block in exactly this order.
    """
    def tagged(patches, r):
        return [LightPatch(p.pixels, replace(p.provenance, round=r)) for p in patches]

    def apply(fn, patches, *args):
        return [fn(p, *args) for p in patches]

    orig = tagged(originals, 0)
    fh = apply(flip_horizontal, orig)
    fv = apply(flip_vertical, orig)
    s1 = apply(random_scale, orig, rng)
    r1 = apply(random_rotate, orig, rng)
    round1 = tagged(fh + fv + s1 + r1, 1)

    s_fh = apply(random_scale, fh, rng)
    r_fh = apply(random_rotate, fh, rng)
    s_fv = apply(random_scale, fv, rng)
    r_fv = apply(random_rotate, fv, rng)
    round2 = tagged(s_fh + r_fh + s_fv + r_fv, 2)

    round3 = tagged(apply(random_scale, r1, rng)
                    + apply(random_scale, r_fv, rng)
                    + apply(random_scale, r_fh, rng), 3)
    return orig + round1 + round2 + round3


def build_bank(corpus_images, params: ThresholdParams = ThresholdParams(),
               crop_count=300, rng=0, iou_threshold=DEFAULT_NMS_IOU,
               source_ids=None) -> LightBank:
    """Build a bank of ``12 * crop_count`` light patches from a corpus.

    ``rng`` is a seed or a ``numpy.random.Generator``; all randomness is
    drawn from it sequentially, so the bank is a pure function of corpus,
    parameters and seed.
    """
    if crop_count < 1:
        raise ValueError("crop_count must be >= 1")
    gen, seed = _as_rng(rng)
    candidates = collect_candidates(corpus_images, params, iou_threshold, source_ids)
    if len(candidates) < crop_count:
        raise InsufficientCandidates(len(candidates), crop_count, params)
    lo, hi = INTENSITY_RANGE
    varied = [vary_intensity(p, float(gen.uniform(lo, hi))) for p in candidates]
    originals = select_spread(varied, crop_count)
    patches = expand_schedule(originals, gen)
    meta = {
        "crop_count": crop_count,
        "candidate_count": len(candidates),
        "threshold": {"min_channel": params.min_channel,
                      "max_chroma_spread": params.max_chroma_spread},
        "nms_iou": iou_threshold,
    }
    return LightBank(patches, seed, meta)


# -- persistence -------------------------------------------------------------

def _patch_name(i, n):
    return f"{i:0{max(4, len(str(n - 1)))}d}.png"


def save_bank(bank: LightBank, out_dir) -> str:
    """Write ``patches/NNNN.png`` plus ``manifest.json``; returns the manifest path."""
    patch_dir = os.path.join(out_dir, "patches")
    os.makedirs(patch_dir, exist_ok=True)
    n = len(bank.patches)
    entries = []
    for i, p in enumerate(bank.patches):
        name = _patch_name(i, n)
        save_gray(p.pixels, os.path.join(patch_dir, name))
        entries.append({"id": i, "file": f"patches/{name}",
                        "width": p.width, "height": p.height,
                        **p.provenance.to_json()})
    counts = bank.round_counts()
    manifest = {
        "schema": BANK_SCHEMA,
        "seed": bank.seed,
        **bank.meta,
        "patch_count": n,
        "round_counts": {str(k): counts[k] for k in sorted(counts)},
        "patches": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_bank(bank_dir) -> LightBank:
    path = os.path.join(bank_dir, "manifest.json")
    with open(path, encoding="utf-8") as f:
        manifest = json.load(f)
    patches = []
    for e in manifest["patches"]:
        px = load_gray(os.path.join(bank_dir, e["file"]))
        patches.append(LightPatch(px, Provenance.from_json(e)))
    meta = {k: manifest[k] for k in ("crop_count", "candidate_count", "threshold", "nms_iou")
            if k in manifest}
    return LightBank(patches, manifest.get("seed"), meta)


def bank_digest(bank_dir) -> str:
    with open(os.path.join(bank_dir, "manifest.json"), "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()
