"""Build a light bank from synthetic frames and look at what is inside.

Run: python demos/01_light_bank.py [out_dir]
"""
import sys
from collections import Counter

import numpy as np

from wlsr import ThresholdParams, build_bank, load_bank, save_bank, segment_specular
from wlsr.synthetic import make_frame

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out/bank"
rng = np.random.default_rng(3)
corpus = [make_frame(rng)[0] for _ in range(20)]

# what counts as "light": bright and nearly colourless
mask = segment_specular(corpus[0], ThresholdParams(min_channel=200, max_chroma_spread=30))
print(f"frame 0: {mask.sum()} light pixels")

# 40 original crops -> 12 variants each (flips, scale 0.5-1.5, rotation -45..45)
bank = build_bank(corpus, crop_count=40, rng=7)
print(f"bank: {len(bank)} patches, rounds {bank.round_counts()}")
ops = Counter(p.provenance.chain[-1]["op"] for p in bank.patches)
print("last op per patch:", dict(ops))

sizes = np.array([(p.width, p.height) for p in bank.patches])
print(f"patch sizes: w {sizes[:, 0].min()}-{sizes[:, 0].max()}, "
      f"h {sizes[:, 1].min()}-{sizes[:, 1].max()}")

path = save_bank(bank, out)
again = load_bank(out)
assert len(again) == len(bank)
print("saved and reloaded", path)
