"""Train a score network on the eight-Gaussian ring and draw samples.

A shortened run by default (pass an iteration count to change it). Writes
``eight_gaussians.svg`` with the data in grey and the samples in colour.

    python3 demos/eight_gaussians.py 20000
"""
import logging
import sys

from holdpp import data, pipeline, score
from holdpp.plotting import scatter_svg

logging.basicConfig(level=logging.INFO, format="%(message)s")
iters = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
n = int(sys.argv[2]) if len(sys.argv) > 2 else 3

res = pipeline.run_toy(n, "eight_gaussians", score.TrainConfig(iters=iters, log_every=500))
r = res["report"]
print(f"n={n}, {iters} iterations: energy distance {r['energy_distance']:.5f}, "
      f"held-out baseline {r['baseline_energy_distance']:.5f} (ratio {r['ratio']:.2f})")
print("mode shares:", " ".join(f"{x:.3f}" for x in r["mode_shares"]))

ds = res["dataset"]
svg = scatter_svg(ds.denormalize(res["samples"]), ds.denormalize(ds.points[:2000]), title=f"eight gaussians, n={n}")
data.atomic_write("eight_gaussians.svg", svg.encode())
print("wrote eight_gaussians.svg")
