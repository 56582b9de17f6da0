"""Bilinear upscaling against OpenCV INTER_LINEAR (uint8 within 1 level)."""

import subprocess
import sys
import tempfile
from pathlib import Path

import cv2
import numpy as np
import tifffile

helper = sys.argv[1]
rng = np.random.default_rng(11)
worst = 0
cases = 0
with tempfile.TemporaryDirectory() as t:
    tmp = Path(t)
    for i in range(12):
        h, w = rng.integers(2, 40, size=2)
        bands = 3 if i % 2 else 1
        factor = int(rng.choice([2, 3, 4]))
        shape = (h, w, bands) if bands == 3 else (h, w)
        img = rng.integers(0, 256, shape, dtype=np.uint8)
        if i % 3 == 0:
            img = cv2.GaussianBlur(img, (5, 5), 1.5)
        tifffile.imwrite(tmp / "in.tif", img, photometric="rgb" if bands == 3 else "minisblack", metadata=None)
        subprocess.run([helper, "bilinear", str(tmp / "in.tif"), str(factor), str(tmp / "out.tif")], check=True,
                       capture_output=True)
        ours = tifffile.imread(tmp / "out.tif").astype(int)
        ref = cv2.resize(img, (int(w) * factor, int(h) * factor), interpolation=cv2.INTER_LINEAR).astype(int)
        if ours.shape != ref.shape:
            print(f"FAIL case {i}: shape {ours.shape} vs {ref.shape}")
            sys.exit(1)
        worst = max(worst, int(np.abs(ours - ref).max()))
        cases += 1

print(f"bilinear: {cases} cases against cv2.INTER_LINEAR, max abs difference {worst}")
sys.exit(0 if worst <= 1 else 1)
