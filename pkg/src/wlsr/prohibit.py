"""Per-image prohibition masks: existing lights, polyp boxes, black borders."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AnnotationOutOfBounds, DimensionMismatch
from .lightbank import DEFAULT_NMS_IOU, ThresholdParams, light_boxes
from .raster import ORANGE, PixelBox, as_rgb, box_mask, channel_min_max

DEFAULT_BLACK_THRESHOLD = 10
DEFAULT_MARGIN = 0.2


@dataclass(frozen=True)
class ProhibitionParams:
    threshold: ThresholdParams = field(default_factory=ThresholdParams)
    iou_threshold: float = DEFAULT_NMS_IOU
    black_threshold: int = DEFAULT_BLACK_THRESHOLD
    margin_fraction: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not 0 <= self.black_threshold <= 255:
            raise ValueError("black_threshold must be in [0, 255]")
        if not 0.0 < self.margin_fraction < 0.5:
            raise ValueError("margin_fraction must be in (0, 0.5)")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")

    def to_json(self):
        return {
            "min_channel": self.threshold.min_channel,
            "max_chroma_spread": self.threshold.max_chroma_spread,
            "nms_iou": self.iou_threshold,
            "black_threshold": self.black_threshold,
            "margin_fraction": self.margin_fraction,
        }

    @classmethod
    def from_json(cls, d):
        return cls(ThresholdParams(d["min_channel"], d["max_chroma_spread"]),
                   d["nms_iou"], d["black_threshold"], d["margin_fraction"])


@dataclass(frozen=True, eq=False)
class ProhibitionMask:
    mask: np.ndarray          # (H, W) bool, True = placement forbidden
    light_boxes: tuple = ()
    polyp_boxes: tuple = ()
    border: np.ndarray | None = None

    @property
    def shape(self):
        return self.mask.shape

    @property
    def sources(self):
        """(tag, region) pairs; region is a PixelBox, or the border mask."""
        out = [("light", b) for b in self.light_boxes]
        out += [("polyp", b) for b in self.polyp_boxes]
        if self.border is not None and self.border.any():
            out.append(("border", self.border))
        return out


def mark_light_regions(image, params: ThresholdParams = ThresholdParams(),
                       iou_threshold=DEFAULT_NMS_IOU) -> list:
    return light_boxes(image, params, iou_threshold)


def mark_polyp_boxes(annotations, width=None, height=None) -> list:
    """Annotation boxes as prohibited regions, checked against the image size.

    ``width``/``height`` default to the dimensions stored on each annotation.
    """
    boxes = []
    for ann in annotations:
        w = width if width is not None else ann.width
        h = height if height is not None else ann.height
        if not ann.box.is_valid(w, h):
            raise AnnotationOutOfBounds(
                f"polyp box {tuple(ann.box)} outside {w}x{h} image")
        boxes.append(ann.box)
    return boxes


def margin_pixels(width, height, margin_fraction):
    return int(np.floor(width * margin_fraction)), int(np.floor(height * margin_fraction))


def mark_black_borders(image, black_threshold=DEFAULT_BLACK_THRESHOLD,
                       margin_fraction=DEFAULT_MARGIN) -> np.ndarray:
    """Black pixels (max channel <= threshold) lying in the outer margins.

    Margins are measured per dimension: ``floor(w * m)`` columns at the left
    and right, ``floor(h * m)`` rows at the top and bottom.
    """
    if not 0.0 < margin_fraction < 0.5:
        raise ValueError("margin_fraction must be in (0, 0.5)")
    rgb = as_rgb(image)
    h, w = rgb.shape[:2]
    mx, my = margin_pixels(w, h, margin_fraction)
    in_margin = np.zeros((h, w), dtype=bool)
    in_margin[:my, :] = True
    in_margin[h - my:, :] = True
    in_margin[:, :mx] = True
    in_margin[:, w - mx:] = True
    return in_margin & (channel_min_max(rgb)[1] <= black_threshold)


def build_prohibition(image, annotations=(), params: ProhibitionParams = ProhibitionParams(),
                      ) -> ProhibitionMask:
    rgb = as_rgb(image)
    h, w = rgb.shape[:2]
    lights = tuple(mark_light_regions(rgb, params.threshold, params.iou_threshold))
    polyps = tuple(mark_polyp_boxes(annotations, w, h))
    border = mark_black_borders(rgb, params.black_threshold, params.margin_fraction)
    mask = box_mask(lights + polyps, h, w) | border
    return ProhibitionMask(mask, lights, polyps, border)


def render_debug(image, prohibition) -> np.ndarray:
    """Copy of ``image`` with prohibited pixels painted orange."""
    rgb = as_rgb(image)
    mask = prohibition.mask if isinstance(prohibition, ProhibitionMask) else np.asarray(prohibition)
    if mask.shape != rgb.shape[:2]:
        raise DimensionMismatch(f"mask {mask.shape} vs image {rgb.shape[:2]}")
    out = rgb.copy()
    out[mask] = ORANGE
    return out


def prohibited_box_hits(changed, boxes) -> list:
    """Boxes that contain at least one True pixel of ``changed``."""
    return [b for b in boxes if np.any(changed[PixelBox(*b).slices()])]
