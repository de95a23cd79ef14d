"""Sliding-window fit search and non-black pasting of one light per image."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .errors import EmptyBank, EmptyFitList, OutOfBounds
from .prohibit import ProhibitionMask, ProhibitionParams, build_prohibition
from .raster import YELLOW, as_rgb

DEFAULT_MAX_RETRIES = 10
SKIP_REASON = "no-fit-after-n-retries"


@dataclass(frozen=True)
class Placement:
    patch_id: int
    top_left: tuple
    image_id: str = ""

    def to_json(self):
        return {"patch_id": int(self.patch_id),
                "x": int(self.top_left[0]), "y": int(self.top_left[1])}


@dataclass(frozen=True, eq=False)
class Augmented:
    placement: Placement
    image: np.ndarray
    tries: tuple = ()

    @property
    def retries(self):
        return len(self.tries)


@dataclass(frozen=True)
class Skipped:
    retries: int
    tries: tuple = ()
    reason: str = SKIP_REASON


def image_rng(seed, key) -> np.random.Generator:
    """Independent PCG64 stream for ``key`` (e.g. an image basename) under ``seed``."""
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *words]))


def _mask_of(prohibition):
    if isinstance(prohibition, ProhibitionMask):
        return prohibition.mask
    return np.asarray(prohibition, dtype=bool)


def summed_area(mask) -> np.ndarray:
    """Integral image padded with a leading zero row and column."""
    h, w = mask.shape
    dtype = np.int32 if h * w < 2**31 else np.int64
    sat = np.zeros((h + 1, w + 1), dtype=dtype)
    np.cumsum(np.cumsum(mask, axis=0, dtype=dtype), axis=1, out=sat[1:, 1:])
    return sat


def enumerate_fits(prohibition, patch_w, patch_h, sat=None) -> list:
    """Top-left corners of clear windows on the (dim + 1)-stepped grid.

    The grid starts at (0, 0) and is visited row by row; a position fits
    when the whole ``patch_w x patch_h`` window holds no prohibited pixel.
    """
    if patch_w < 1 or patch_h < 1:
        raise ValueError("patch dimensions must be >= 1")
    mask = _mask_of(prohibition)
    h, w = mask.shape
    if patch_w > w or patch_h > h:
        return []
    if sat is None:
        sat = summed_area(mask)
    xs = np.arange(0, w - patch_w + 1, patch_w + 1)
    ys = np.arange(0, h - patch_h + 1, patch_h + 1)
    Y, X = np.meshgrid(ys, xs, indexing="ij")
    counts = (sat[Y + patch_h, X + patch_w] - sat[Y, X + patch_w]
              - sat[Y + patch_h, X] + sat[Y, X])
    iy, ix = np.nonzero(counts == 0)
    return list(zip(xs[ix].tolist(), ys[iy].tolist()))


def choose_placement(fits, rng):
    if not fits:
        raise EmptyFitList("no fitting position to choose from")
    x, y = fits[int(rng.integers(len(fits)))]
    return (x, y)


def paste_patch(image, patch, top_left) -> np.ndarray:
    """Copy of ``image`` with the patch's nonzero pixels written as gray."""
    rgb = as_rgb(image)
    px = patch.pixels if hasattr(patch, "pixels") else np.asarray(patch, dtype=np.uint8)
    x, y = top_left
    ph, pw = px.shape
    h, w = rgb.shape[:2]
    if x < 0 or y < 0 or x + pw > w or y + ph > h:
        raise OutOfBounds(f"{pw}x{ph} patch at ({x}, {y}) leaves {w}x{h} image")
    out = rgb.copy()
    region = out[y:y + ph, x:x + pw]
    on = px > 0
    region[on] = px[on][:, None]
    return out


def augment_image(image, annotations, bank, params: ProhibitionParams = ProhibitionParams(),
                  rng=None, max_retries=DEFAULT_MAX_RETRIES, image_id="",
                  prohibition=None):
    """Place exactly one random bank light into the image, or give up.

    Each try draws a patch uniformly (with replacement) from the bank; the
    first try with any fitting window is pasted at a random fit. After
    ``max_retries`` failed tries the image is Skipped.
    """
    if bank is None or len(bank) == 0:
        raise EmptyBank("light bank is empty")
    if max_retries < 1:
        raise ValueError("max_retries must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    rgb = as_rgb(image)
    if prohibition is None:
        prohibition = build_prohibition(rgb, annotations, params)
    sat = summed_area(_mask_of(prohibition))
    tries = []
    for _ in range(max_retries):
        pid = int(rng.integers(len(bank)))
        tries.append(pid)
        patch = bank[pid]
        fits = enumerate_fits(prohibition, patch.width, patch.height, sat=sat)
        if fits:
            top_left = choose_placement(fits, rng)
            out = paste_patch(rgb, patch, top_left)
            return Augmented(Placement(pid, top_left, image_id), out, tuple(tries))
    return Skipped(len(tries), tuple(tries))


def changed_pixels(before, after) -> np.ndarray:
    return np.any(as_rgb(before) != as_rgb(after), axis=2)


def render_placement_debug(image, placement: Placement, patch) -> np.ndarray:
    """Augmented image with a yellow circle around the pasted light."""
    px = patch.pixels
    ys, xs = np.nonzero(px)
    cx = placement.top_left[0] + xs.mean()
    cy = placement.top_left[1] + ys.mean()
    r = max(px.shape) / 2 + 4
    im = Image.fromarray(as_rgb(image))
    ImageDraw.Draw(im).ellipse([cx - r, cy - r, cx + r, cy + r], outline=YELLOW, width=2)
    return np.asarray(im, dtype=np.uint8).copy()
