"""Where may a new light go?  Build the prohibition mask for one frame.

Run: python demos/02_prohibition_mask.py [out_dir]
"""
import os
import sys

import numpy as np

from wlsr import PolypAnnotation, ProhibitionParams, build_prohibition, render_debug, save_image
from wlsr.synthetic import make_frame

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)

image, boxes = make_frame(np.random.default_rng(11))
h, w = image.shape[:2]
anns = [PolypAnnotation(0, b, w, h) for b in boxes]

pm = build_prohibition(image, anns, ProhibitionParams(black_threshold=10, margin_fraction=0.2))
print(f"{len(pm.light_boxes)} light boxes, {len(pm.polyp_boxes)} polyp boxes, "
      f"{pm.border.sum()} border pixels")
print(f"prohibited: {pm.mask.mean():.1%} of the frame")

# orange = forbidden
save_image(render_debug(image, pm), os.path.join(out, "prohibit.png"))
save_image(image, os.path.join(out, "frame.png"))
print("wrote", os.path.join(out, "prohibit.png"))
