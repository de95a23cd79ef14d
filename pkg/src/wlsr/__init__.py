"""White-light specular reflection (WLSR) augmentation for polyp detection.

Build a bank of artificial light patches from real highlights, mask out
the regions a new light must not cover, and paste one light per frame at a
random sliding-window fit.
"""
from .annot import PolypAnnotation, parse_voc, to_yolo, write_labels
from .lightbank import (LightBank, LightPatch, ThresholdParams, build_bank, load_bank,
                        save_bank, segment_specular)
from .placement import Augmented, Placement, Skipped, augment_image, enumerate_fits
from .prohibit import ProhibitionMask, ProhibitionParams, build_prohibition, render_debug
from .raster import PixelBox, iou, load_image, save_image

__version__ = "0.1.0"

__all__ = [
    "Augmented", "LightBank", "LightPatch", "PixelBox", "Placement", "PolypAnnotation",
    "ProhibitionMask", "ProhibitionParams", "Skipped", "ThresholdParams",
    "augment_image", "build_bank", "build_prohibition", "enumerate_fits", "iou",
    "load_bank", "load_image", "parse_voc", "render_debug", "save_bank", "save_image",
    "segment_specular", "to_yolo", "write_labels",
]
