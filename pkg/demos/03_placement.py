"""Paste one light into a frame and check nothing forbidden was touched.

Run: python demos/03_placement.py [out_dir]
"""
import os
import sys

import numpy as np

from wlsr import (Augmented, PolypAnnotation, build_bank, build_prohibition, enumerate_fits,
                  augment_image, save_image)
from wlsr.placement import changed_pixels, image_rng, render_placement_debug
from wlsr.synthetic import make_frame

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)

rng = np.random.default_rng(5)
bank = build_bank([make_frame(rng)[0] for _ in range(10)], crop_count=20, rng=1)

image, boxes = make_frame(rng)
h, w = image.shape[:2]
anns = [PolypAnnotation(0, b, w, h) for b in boxes]
pm = build_prohibition(image, anns)

patch = bank[0]
fits = enumerate_fits(pm, patch.width, patch.height)
print(f"patch 0 is {patch.width}x{patch.height}: {len(fits)} grid positions fit")

res = augment_image(image, anns, bank, rng=image_rng(0, "demo-frame"), prohibition=pm)
if isinstance(res, Augmented):
    changed = changed_pixels(image, res.image)
    print(f"placed patch {res.placement.patch_id} at {res.placement.top_left} "
          f"after {res.retries} tries; {changed.sum()} pixels changed, "
          f"{(changed & pm.mask).sum()} of them prohibited")
    dbg = render_placement_debug(res.image, res.placement, bank[res.placement.patch_id])
    save_image(dbg, os.path.join(out, "placement.png"))
else:
    print("skipped:", res.reason)
