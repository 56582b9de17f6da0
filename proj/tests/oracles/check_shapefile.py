"""Shapefile output read back with pyshp and compared to the traced polygons."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import shapefile
import tifffile

helper = sys.argv[1]
failures = []


def check(cond, msg):
    if not cond:
        failures.append(msg)


def shoelace(ring):
    a = np.asarray(ring, dtype=float)
    return 0.5 * float(np.sum(a[:-1, 0] * a[1:, 1] - a[1:, 0] * a[:-1, 1]))


rng = np.random.default_rng(5)
total = 0
with tempfile.TemporaryDirectory() as t:
    tmp = Path(t)
    for i in range(8):
        h, w = rng.integers(4, 30, size=2)
        mask = np.where(rng.random((h, w)) < 0.45, 255, 0).astype(np.uint8)
        if i == 0:
            mask[:] = 0
        x0, y0, px = 300000.0 + i, 1500000.0, 0.5
        tags = [(33550, "d", 3, (px, px, 0.0)), (33922, "d", 6, (0.0, 0.0, 0.0, x0, y0, 0.0))]
        tifffile.imwrite(tmp / "mask.tif", mask, extratags=tags, metadata=None)
        out = subprocess.run([helper, "vectorize", str(tmp / "mask.tif"), str(tmp / "poly")], check=True,
                             capture_output=True, text=True)
        feats = json.loads(out.stdout)
        r = shapefile.Reader(str(tmp / "poly"))
        check(r.shapeType == shapefile.POLYGON, f"case {i}: shape type {r.shapeType}")
        check(len(r) == len(feats), f"case {i}: {len(r)} records vs {len(feats)} features")
        names = [f[0] for f in r.fields[1:]]
        check(names == ["id", "area", "px_count"], f"case {i}: fields {names}")
        for sr, f in zip(r.iterShapeRecords(), feats):
            parts = list(sr.shape.parts) + [len(sr.shape.points)]
            rings = [sr.shape.points[parts[k]:parts[k + 1]] for k in range(len(parts) - 1)]
            expect = [f["outer"]] + f["holes"]
            check(len(rings) == len(expect), f"case {i}: part count")
            for got, exp in zip(rings, expect):
                check(np.allclose(got, exp, atol=0, rtol=0), f"case {i}: ring coordinates differ")
            check(shoelace(rings[0]) < 0, f"case {i}: outer ring not clockwise")
            for hole in rings[1:]:
                check(shoelace(hole) > 0, f"case {i}: hole not counter-clockwise")
            area = -sum(shoelace(r_) for r_ in rings)
            check(abs(area - f["area"]) < 1e-6, f"case {i}: area {area} vs {f['area']}")
            check(abs(f["pixel_count"] * px * px - f["area"]) < 1e-6, f"case {i}: area vs pixel count")
            rec = sr.record
            check(rec["id"] == f["id"] and rec["px_count"] == f["pixel_count"], f"case {i}: attributes {rec}")
            check(abs(rec["area"] - f["area"]) < 5e-7, f"case {i}: area attribute")
            bbox = sr.shape.bbox
            pts = np.asarray(sr.shape.points)
            check(np.allclose(bbox, [pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max()]),
                  f"case {i}: bbox")
        check(int((mask == 255).sum()) == sum(f["pixel_count"] for f in feats), f"case {i}: pixel conservation")
        total += len(feats)
        r.close()

for f in failures:
    print("FAIL", f)
print(f"shapefile: {total} polygons read back with pyshp, {len(failures)} failures")
sys.exit(1 if failures else 0)
