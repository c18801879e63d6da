"""End-to-end toy runs: train on a 2-D dataset, generate, score the samples."""
from __future__ import annotations

import logging
import time

import numpy as np

from . import data, dynamics, score, sde

log = logging.getLogger(__name__)

TRAIN_COUNT = 100_000
HOLDOUT_SEED = 10_001  # held-out split k uses seed HOLDOUT_SEED + k; training data use small seeds
N_SPLIT_PAIRS = 10


def evaluate(samples, ds: data.Dataset, count: int | None = None, pairs: int = N_SPLIT_PAIRS) -> dict:
    """Energy distance of ``samples`` to held-out data, with its self-calibrated threshold.

    Two versions are reported. The ``*_single`` numbers use one held-out split
    for the samples and one pair of splits for the baseline. Each of those is
    an energy distance between two finite samples of nearly equal
    distributions, so their ratio is heavy-tailed: even exact-score samples
    exceed three times the baseline for roughly one draw in seven. The
    headline numbers average the samples' distance over ``pairs`` held-out
    splits and the baseline over ``pairs`` independent split pairs, all of
    size ``count``, which estimates the same two quantities with much less
    noise.
    """
    count = len(samples) if count is None else count
    seeds = [HOLDOUT_SEED + 2 * k for k in range(pairs)]
    splits = [(ds.normalize(data.raw_points(ds.name, count, s)), ds.normalize(data.raw_points(ds.name, count, s + 1)))
              for s in seeds]
    to_samples = [data.energy_distance(samples, a) for a, _ in splits]
    between = [data.energy_distance(a, b) for a, b in splits]
    out = {
        "energy_distance": float(np.mean(to_samples)),
        "baseline_energy_distance": float(np.mean(between)),
        "energy_distance_single": to_samples[0],
        "baseline_energy_distance_single": between[0],
        "holdout_pairs": pairs,
        "holdout_size": count,
    }
    out["ratio"] = out["energy_distance"] / out["baseline_energy_distance"]
    out["ratio_single"] = out["energy_distance_single"] / out["baseline_energy_distance_single"]
    if ds.name == "eight_gaussians":
        shares = data.nearest_centroid_shares(ds.denormalize(samples), data.centroids(ds.name))
        out["mode_shares"] = shares.tolist()
        out["min_mode_share"] = float(shares.min())
    return out


def run_toy(
    n: int,
    dataset: str = "eight_gaussians",
    cfg: score.TrainConfig | None = None,
    count: int = 2000,
    steps: int = 250,
    hidden=(128, 128, 128),
    data_seed: int = 1,
) -> dict:
    """Train, sample and evaluate one order; returns a JSON-ready report."""
    cfg = cfg or score.TrainConfig()
    spec = dynamics.default_spec(n, cfg.l_inv)
    ds = data.make_dataset(dataset, TRAIN_COUNT, data_seed)
    net = score.ScoreNet.create(n, ds.h, hidden=hidden, seed=cfg.seed, T=cfg.T)
    start = time.perf_counter()
    net, trace = score.train(net, spec, ds.points, cfg)
    train_s = time.perf_counter() - start
    rcfg = sde.ReverseConfig(steps=steps, t_end=cfg.T, t_eps=cfg.t_eps, seed=cfg.seed)
    state = sde.em_reverse(spec, score.score_fn(net), rcfg, np.random.default_rng(rcfg.seed + 1), (count, ds.h))
    samples = state[:, 0, :]
    report = {
        "n": n,
        "dataset": dataset,
        "iters": cfg.iters,
        "train_seconds": train_s,
        "final_loss": float(np.mean(trace[-500:])) if trace else None,
        **evaluate(samples, ds),
    }
    log.info("n=%d energy distance %.5f (baseline %.5f)", n, report["energy_distance"], report["baseline_energy_distance"])
    return {"report": report, "net": net, "spec": spec, "dataset": ds, "samples": samples, "trace": trace}
