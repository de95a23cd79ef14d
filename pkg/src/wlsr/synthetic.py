"""Synthetic colonoscopy-like frames for tests, demos and benchmarks.

Frames have reddish tissue, a black vignette in the corners, one or two
darker polyps with known boxes, and a handful of near-white glints.
"""
from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np
from PIL import Image

from .raster import PixelBox, save_image


def _blob(h, w, cx, cy, rx, ry):
    """Window slices and normalized radial distance of an ellipse, clipped to the frame."""
    x0, x1 = max(0, int(cx - rx)), min(w, int(np.ceil(cx + rx)) + 1)
    y0, y1 = max(0, int(cy - ry)), min(h, int(np.ceil(cy + ry)) + 1)
    ys, xs = np.ogrid[y0:y1, x0:x1]
    d = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2
    return (slice(y0, y1), slice(x0, x1)), d


def make_frame(rng, width=640, height=480, n_polyps=None, n_glints=None):
    """Return ``(image, polyp_boxes)`` for one synthetic frame."""
    h, w = height, width
    base = np.array([rng.uniform(150, 200), rng.uniform(60, 100), rng.uniform(55, 90)],
                    dtype=np.float32)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    sx = np.sin(np.arange(w, dtype=np.float32) / w * 3 + phase[0])
    sy = np.cos(np.arange(h, dtype=np.float32) / h * 2 + phase[1])
    shade = 0.85 + 0.15 * sy[:, None] * sx[None, :]
    img = base[None, None, :] * shade[..., None]
    img += rng.integers(-6, 7, size=(h, w, 3)).astype(np.float32)

    n_polyps = int(rng.integers(1, 3)) if n_polyps is None else n_polyps
    boxes = []
    for _ in range(n_polyps):
        rx = rng.uniform(0.06, 0.14) * w
        ry = rng.uniform(0.06, 0.14) * h
        cx = rng.uniform(0.3 * w, 0.7 * w)
        cy = rng.uniform(0.3 * h, 0.7 * h)
        win, d = _blob(h, w, cx, cy, rx, ry)
        inside = d <= 1.0
        region = img[win]
        region[inside] = region[inside] * np.array([0.75, 0.6, 0.65]) + np.array([20, 5, 10])
        yy, xx = np.nonzero(inside)
        if len(xx):
            y0, x0 = win[0].start, win[1].start
            boxes.append(PixelBox(x0 + int(xx.min()), y0 + int(yy.min()),
                                  x0 + int(xx.max()) + 1, y0 + int(yy.max()) + 1))

    n_glints = int(rng.integers(6, 13)) if n_glints is None else n_glints
    for _ in range(n_glints):
        rx = rng.uniform(1.5, max(2.0, 0.02 * w))
        ry = rng.uniform(1.5, max(2.0, 0.02 * h))
        cx = rng.uniform(0.15 * w, 0.85 * w)
        cy = rng.uniform(0.15 * h, 0.85 * h)
        win, d = _blob(h, w, cx, cy, rx, ry)
        core = d <= 1.0
        peak = rng.uniform(225, 255)
        gray = np.clip(peak - 15 * d[core], 205, 255)
        region = img[win]
        region[core] = gray[:, None] + rng.uniform(-3, 3, size=(int(core.sum()), 3))

    # endoscope vignette: black outside a wide ellipse, mostly in the corners
    ys, xs = np.ogrid[0:h, 0:w]
    vign = (((xs - (w - 1) / 2) / (0.62 * w)) ** 2 + ((ys - (h - 1) / 2) / (0.62 * h)) ** 2) > 1.0
    img[vign] = rng.integers(0, 6, size=(int(vign.sum()), 3))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), boxes


def voc_xml(filename, width, height, boxes, name="polyp"):
    objs = "".join(
        "  <object>\n"
        f"    <name>{escape(name)}</name>\n"
        "    <bndbox>\n"
        f"      <xmin>{b.x_min}</xmin>\n      <ymin>{b.y_min}</ymin>\n"
        f"      <xmax>{b.x_max}</xmax>\n      <ymax>{b.y_max}</ymax>\n"
        "    </bndbox>\n"
        "  </object>\n"
        for b in boxes)
    return ("<annotation>\n"
            f"  <filename>{escape(filename)}</filename>\n"
            f"  <size>\n    <width>{width}</width>\n    <height>{height}</height>\n"
            "    <depth>3</depth>\n  </size>\n"
            f"{objs}</annotation>\n")


def write_dataset(root, n, seed=0, width=640, height=480, empty_every=0, fmt="png"):
    """Write ``n`` frames to ``root/images`` and VOC XML to ``root/voc``.

    Every ``empty_every``-th frame (if > 0) gets an annotation without
    objects. Returns ``(images_dir, voc_dir)``.
    """
    rng = np.random.default_rng(seed)
    img_dir = os.path.join(root, "images")
    voc_dir = os.path.join(root, "voc")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(voc_dir, exist_ok=True)
    for i in range(n):
        image, boxes = make_frame(rng, width, height)
        if empty_every and i % empty_every == empty_every - 1:
            boxes = []
        stem = f"frame_{i:04d}"
        fname = f"{stem}.{'jpg' if fmt == 'jpeg' else 'png'}"
        path = os.path.join(img_dir, fname)
        if fmt == "jpeg":
            Image.fromarray(image).save(path, format="JPEG", quality=95)
        else:
            save_image(image, path)
        with open(os.path.join(voc_dir, f"{stem}.xml"), "w", encoding="utf-8") as f:
            f.write(voc_xml(fname, width, height, boxes))
    return img_dir, voc_dir
